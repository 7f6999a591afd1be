mod common;

use deinterleave::clustering::{
    build_mst, cluster_embeddings, core_distances, mutual_reachability, pairwise_distances, HdbscanConfig, Points,
};
use deinterleave::pdw::Partition;
use proptest::prelude::*;

#[test]
fn reference_partitions_are_reproduced() {
    let cases = common::hdbscan_cases();
    assert!(cases.len() >= 50);
    let failed: Vec<&str> = cases
        .iter()
        .filter(|c| !common::hdbscan_case_matches(c))
        .map(|c| c.name.as_str())
        .collect();
    assert!(failed.is_empty(), "mismatching cases: {failed:?}");
}

#[test]
fn two_blobs_give_two_clusters_without_noise() {
    let pts = common::two_blobs(7);
    let labels = cluster_embeddings(&pts, 2, &HdbscanConfig::new(10)).unwrap();
    assert_eq!(labels.n_clusters(), 2);
    assert_eq!(labels.noise_count(), 0);
}

#[test]
fn three_blobs_give_three_clusters() {
    let mut pts = common::two_blobs(8);
    pts.extend(
        common::two_blobs(9)
            .iter()
            .take(100)
            .enumerate()
            .map(|(i, v)| if i % 2 == 0 { v + 0.0 } else { v + 10.0 }),
    );
    let labels = cluster_embeddings(&pts, 2, &HdbscanConfig::new(10)).unwrap();
    assert_eq!(labels.n_clusters(), 3);
}

#[test]
fn sparse_uniform_points_are_mostly_noise() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let pts: Vec<f64> = (0..120).map(|_| rng.gen_range(0.0..100.0)).collect();
    let labels = cluster_embeddings(&pts, 2, &HdbscanConfig::new(15).with_min_samples(10)).unwrap();
    assert!(
        labels.noise_count() as f64 / 60.0 > 0.5,
        "{} noise",
        labels.noise_count()
    );
}

/// Kruskal's algorithm; total weight only.
fn kruskal_weight(w: &[f64], n: usize) -> f64 {
    let mut edges: Vec<(f64, usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| (w[i * n + j], i, j))
        .collect();
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    let mut total = 0.0;
    for (wt, i, j) in edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a] = b;
            total += wt;
        }
    }
    total
}

fn point_sets() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (1usize..4, 3usize..40)
        .prop_flat_map(|(dim, n)| (proptest::collection::vec(-10.0f64..10.0, dim * n), Just(dim)))
        .prop_map(|(mut v, dim)| {
            v.truncate(v.len() / dim * dim);
            (v, dim)
        })
}

proptest! {
    #[test]
    fn core_distances_match_sorted_neighbours((pts, dim) in point_sets(), k in 1usize..4) {
        let p = Points::new(&pts, dim).unwrap();
        let n = p.len();
        let d = pairwise_distances(p);
        match core_distances(p, k) {
            None => prop_assert!(n < k + 1),
            Some(core) => for i in 0..n {
                let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d[i * n + j]).collect();
                row.sort_by(f64::total_cmp);
                prop_assert_eq!(core[i], row[k - 1]);
            },
        }
    }

    #[test]
    fn mutual_reachability_formula((pts, dim) in point_sets()) {
        let p = Points::new(&pts, dim).unwrap();
        let n = p.len();
        let d = pairwise_distances(p);
        let core = core_distances(p, 2).unwrap();
        let mr = mutual_reachability(&d, &core);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 0.0 } else { d[i * n + j].max(core[i]).max(core[j]) };
                prop_assert_eq!(mr[i * n + j], want);
                prop_assert_eq!(mr[i * n + j], mr[j * n + i]);
            }
        }
    }

    #[test]
    fn prim_matches_kruskal_weight(pairs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..20)) {
        let pts: Vec<f64> = pairs.iter().flat_map(|&(x, y)| [x, y]).collect();
        let p = Points::new(&pts, 2).unwrap();
        let n = p.len();
        let core = core_distances(p, 1).unwrap();
        let mr = mutual_reachability(&pairwise_distances(p), &core);
        let mst = build_mst(&mr, n);
        prop_assert_eq!(mst.len(), n - 1);
        let total: f64 = mst.iter().map(|e| e.weight).sum();
        prop_assert!((total - kruskal_weight(&mr, n)).abs() < 1e-9);
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(p: &[usize], mut x: usize) -> usize { while p[x] != x { x = p[x]; } x }
        for e in &mst {
            let (a, b) = (root(&parent, e.a), root(&parent, e.b));
            prop_assert_ne!(a, b);
            parent[a] = b;
        }
    }

    #[test]
    fn labelling_invariants((pts, dim) in point_sets(), mcs in 2usize..8) {
        let cfg = HdbscanConfig::new(mcs).with_min_samples(mcs.min(3));
        let labels = cluster_embeddings(&pts, dim, &cfg).unwrap();
        let n = pts.len() / dim;
        prop_assert_eq!(labels.len(), n);
        prop_assert!(labels.n_clusters() <= n / mcs);
        let again = cluster_embeddings(&pts, dim, &cfg).unwrap();
        prop_assert_eq!(&again, &labels);
        let scaled: Vec<f64> = pts.iter().map(|v| v * 3.5).collect();
        let s = cluster_embeddings(&scaled, dim, &cfg).unwrap();
        prop_assert_eq!(Partition::from_labels(&s), Partition::from_labels(&labels));
        for c in 0..labels.n_clusters() as i64 {
            prop_assert!(labels.as_slice().iter().filter(|&&l| l == c).count() >= mcs);
        }
    }

    #[test]
    fn permuted_input_permutes_labels((pts, dim) in point_sets(), seed in 0u64..1000) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let n = pts.len() / dim;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let permuted: Vec<f64> = order.iter().flat_map(|&i| pts[i * dim..(i + 1) * dim].to_vec()).collect();
        // With one neighbour the reachability weights are the raw distances, so
        // continuous inputs have no ties and the tree cannot depend on order.
        let cfg = HdbscanConfig::new(4).with_min_samples(1);
        let a = cluster_embeddings(&pts, dim, &cfg).unwrap();
        let b = cluster_embeddings(&permuted, dim, &cfg).unwrap();
        let back = a.permuted(&order);
        prop_assert_eq!(Partition::from_labels(&back), Partition::from_labels(&b));
        prop_assert_eq!(back.noise_count(), b.noise_count());
    }
}

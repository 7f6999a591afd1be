use super::tree::{condense_and_extract, SingleLinkageTree};
use super::HdbscanConfig;
use crate::pdw::{LabelVector, NOISE};
use crate::{Error, Result};

/// Borrowed row-major point matrix.
#[derive(Clone, Copy, Debug)]
pub struct Points<'a> {
    data: &'a [f64],
    dim: usize,
}

impl<'a> Points<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::shape("points", &[data.len()], &[dim]));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("points to cluster".into()));
        }
        Ok(Self { data, dim })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.point(a)
            .iter()
            .zip(self.point(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

/// Dense `n x n` Euclidean distance matrix.
pub fn pairwise_distances(points: Points<'_>) -> Vec<f64> {
    let n = points.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = points.distance(i, j);
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
    out
}

/// Distance from every point to its `k`-th nearest other point. Returns
/// `None` when fewer than `k + 1` points exist.
pub fn core_distances(points: Points<'_>, k: usize) -> Option<Vec<f64>> {
    let n = points.len();
    if k == 0 {
        return Some(vec![0.0; n]);
    }
    if n < k + 1 {
        return None;
    }
    let mut row = Vec::with_capacity(n - 1);
    let core = (0..n)
        .map(|i| {
            row.clear();
            row.extend((0..n).filter(|&j| j != i).map(|j| points.distance(i, j)));
            let (_, kth, _) = row.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect();
    Some(core)
}

/// `max(core_a, core_b, d(a, b))` for every pair, diagonal zero.
pub fn mutual_reachability(distances: &[f64], core: &[f64]) -> Vec<f64> {
    let n = core.len();
    assert_eq!(distances.len(), n * n);
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                out[i * n + j] = distances[i * n + j].max(core[i]).max(core[j]);
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Prim's algorithm over a dense symmetric weight matrix.
pub fn build_mst(weights: &[f64], n: usize) -> Vec<MstEdge> {
    assert_eq!(weights.len(), n * n);
    prim(n, |a, b| weights[a * n + b])
}

/// Prim's algorithm computing mutual-reachability weights on the fly, so no
/// `n x n` matrix is held.
pub fn build_mst_from_points(points: Points<'_>, core: &[f64]) -> Vec<MstEdge> {
    prim(points.len(), |a, b| points.distance(a, b).max(core[a]).max(core[b]))
}

fn prim(n: usize, weight: impl Fn(usize, usize) -> f64) -> Vec<MstEdge> {
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut source = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    for _ in 1..n {
        in_tree[current] = true;
        let mut next = usize::MAX;
        let mut next_w = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let w = weight(current, j);
            if w < best[j] {
                best[j] = w;
                source[j] = current;
            }
            // Strict comparison keeps the lowest index among ties.
            if next == usize::MAX || best[j] < next_w {
                next = j;
                next_w = best[j];
            }
        }
        edges.push(MstEdge {
            a: source[next],
            b: next,
            weight: next_w,
        });
        current = next;
    }
    edges
}

/// Full HDBSCAN on a point set.
pub fn cluster_points(points: Points<'_>, config: &HdbscanConfig) -> Result<LabelVector> {
    config.validate()?;
    let n = points.len();
    if n < config.min_cluster_size || n < 2 {
        return Ok(LabelVector::new(vec![NOISE; n]));
    }
    let Some(core) = core_distances(points, config.min_samples()) else {
        return Ok(LabelVector::new(vec![NOISE; n]));
    };
    let mst = build_mst_from_points(points, &core);
    let tree = SingleLinkageTree::from_mst(&mst, n);
    Ok(condense_and_extract(&tree, config))
}

/// Clusters an `n x d` embedding matrix given row-major.
pub fn cluster_embeddings(embeddings: &[f64], dim: usize, config: &HdbscanConfig) -> Result<LabelVector> {
    cluster_points(Points::new(embeddings, dim)?, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_distance_of_collinear_points() {
        let data = [0.0, 1.0, 3.0];
        let p = Points::new(&data, 1).unwrap();
        assert_eq!(core_distances(p, 1).unwrap(), vec![1.0, 1.0, 2.0]);
        assert_eq!(core_distances(p, 2).unwrap(), vec![3.0, 2.0, 3.0]);
        assert!(core_distances(p, 3).is_none());
    }

    #[test]
    fn duplicates_have_zero_core_distance() {
        let data = [0.5, 0.5, 0.5, 0.5, 2.0, 2.0];
        let p = Points::new(&data, 2).unwrap();
        assert_eq!(core_distances(p, 1).unwrap()[..2], [0.0, 0.0]);
    }

    #[test]
    fn zero_core_reduces_to_metric() {
        let data = [0.0, 0.0, 3.0, 4.0, 6.0, 8.0];
        let p = Points::new(&data, 2).unwrap();
        let d = pairwise_distances(p);
        assert_eq!(mutual_reachability(&d, &[0.0; 3]), d);
        let core = core_distances(p, 1).unwrap();
        let mr = mutual_reachability(&d, &core);
        assert!(mr.iter().zip(&d).all(|(m, d)| m >= d));
    }

    #[test]
    fn mst_of_a_path_is_the_path() {
        let data = [0.0, 1.0, 2.5, 4.5, 7.0];
        let p = Points::new(&data, 1).unwrap();
        let mut edges = build_mst(&pairwise_distances(p), 5);
        assert_eq!(edges.len(), 4);
        edges.sort_by(|x, y| x.weight.total_cmp(&y.weight));
        let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e.a.min(e.b), e.a.max(e.b))).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
    }

    #[test]
    fn too_few_points_are_noise() {
        let data = [0.0, 0.1, 0.2];
        let labels = cluster_embeddings(&data, 1, &HdbscanConfig::new(5)).unwrap();
        assert_eq!(labels.as_slice(), &[NOISE; 3]);
        assert!(cluster_embeddings(&[], 1, &HdbscanConfig::new(5)).unwrap().is_empty());
    }

    #[test]
    fn non_finite_points_are_rejected() {
        assert!(cluster_embeddings(&[0.0, f64::NAN], 1, &HdbscanConfig::new(2)).is_err());
    }
}

use std::collections::VecDeque;

use super::{HdbscanConfig, MstEdge};
use crate::pdw::{LabelVector, NOISE};

/// Lambda assigned to zero-distance merges. Finite so stabilities stay finite.
const LAMBDA_MAX: f64 = 1e200;

/// One agglomeration step. Ids below `n` are points and id `n + i` is the
/// cluster created by merge `i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingleLinkageTree {
    merges: Vec<Merge>,
    n: usize,
}

impl SingleLinkageTree {
    /// Edges are processed by ascending weight; ties break on the endpoint
    /// indices so the result does not depend on MST edge order.
    pub fn from_mst(mst: &[MstEdge], n: usize) -> Self {
        assert!(
            n == 0 || mst.len() == n - 1,
            "spanning tree of {n} points needs {} edges",
            n.saturating_sub(1)
        );
        let mut edges = mst.to_vec();
        edges.sort_by(|x, y| {
            x.weight
                .total_cmp(&y.weight)
                .then(x.a.min(x.b).cmp(&y.a.min(y.b)))
                .then(x.a.max(x.b).cmp(&y.a.max(y.b)))
        });
        let mut parent: Vec<usize> = (0..2 * n.max(1) - 1).collect();
        let mut size = vec![1usize; 2 * n.max(1) - 1];
        let find = |parent: &mut Vec<usize>, mut x: usize| {
            let mut root = x;
            while parent[root] != root {
                root = parent[root];
            }
            while parent[x] != root {
                let next = parent[x];
                parent[x] = root;
                x = next;
            }
            root
        };
        let mut merges = Vec::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
            assert_ne!(ra, rb, "minimum spanning tree contains a cycle");
            let id = n + i;
            size[id] = size[ra] + size[rb];
            parent[ra] = id;
            parent[rb] = id;
            merges.push(Merge {
                left: ra,
                right: rb,
                distance: e.weight,
                size: size[id],
            });
        }
        Self { merges, n }
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    fn size_of(&self, node: usize) -> usize {
        if node < self.n {
            1
        } else {
            self.merges[node - self.n].size
        }
    }

    /// Level-order traversal of the subtree at `root`, left before right.
    fn bfs(&self, root: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut queue = VecDeque::from([root]);
        while let Some(node) = queue.pop_front() {
            out.push(node);
            if node >= self.n {
                let m = &self.merges[node - self.n];
                queue.push_back(m.left);
                queue.push_back(m.right);
            }
        }
        out
    }
}

/// Edge of the condensed tree: a point (`child < n_points`) or a sub-cluster
/// leaving `parent` at `lambda = 1 / distance`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CondensedEdge {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub child_size: usize,
}

/// Cluster ids start at `n_points` (the root) and increase in creation order.
#[derive(Clone, Debug, PartialEq)]
pub struct CondensedTree {
    edges: Vec<CondensedEdge>,
    n_points: usize,
    n_clusters: usize,
}

impl CondensedTree {
    pub fn new(tree: &SingleLinkageTree, min_cluster_size: usize) -> Self {
        let n = tree.n;
        if n < 2 {
            return Self {
                edges: (0..n)
                    .map(|child| CondensedEdge {
                        parent: n,
                        child,
                        lambda: LAMBDA_MAX,
                        child_size: 1,
                    })
                    .collect(),
                n_points: n,
                n_clusters: 1,
            };
        }
        let root = 2 * n - 2;
        let mut relabel = vec![0usize; 2 * n - 1];
        relabel[root] = n;
        let mut next_label = n + 1;
        let mut ignore = vec![false; 2 * n - 1];
        let mut edges = Vec::with_capacity(2 * n);

        for node in tree.bfs(root) {
            if ignore[node] || node < n {
                continue;
            }
            let m = tree.merges[node - n];
            let lambda = lambda_of(m.distance);
            let parent = relabel[node];
            let (lc, rc) = (tree.size_of(m.left), tree.size_of(m.right));
            let mut shed = |side: usize, edges: &mut Vec<CondensedEdge>| {
                for sub in tree.bfs(side) {
                    if sub < n {
                        edges.push(CondensedEdge {
                            parent,
                            child: sub,
                            lambda,
                            child_size: 1,
                        });
                    }
                    ignore[sub] = true;
                }
            };
            match (lc >= min_cluster_size, rc >= min_cluster_size) {
                (true, true) => {
                    for (side, count) in [(m.left, lc), (m.right, rc)] {
                        relabel[side] = next_label;
                        edges.push(CondensedEdge {
                            parent,
                            child: next_label,
                            lambda,
                            child_size: count,
                        });
                        next_label += 1;
                    }
                }
                (false, false) => {
                    shed(m.left, &mut edges);
                    shed(m.right, &mut edges);
                }
                (false, true) => {
                    relabel[m.right] = parent;
                    shed(m.left, &mut edges);
                }
                (true, false) => {
                    relabel[m.left] = parent;
                    shed(m.right, &mut edges);
                }
            }
        }
        Self {
            edges,
            n_points: n,
            n_clusters: next_label - n,
        }
    }

    pub fn edges(&self) -> &[CondensedEdge] {
        &self.edges
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Number of cluster nodes including the root.
    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn root(&self) -> usize {
        self.n_points
    }

    /// Excess of mass per cluster, indexed by `cluster_id - n_points`.
    pub fn stability(&self) -> Vec<f64> {
        let base = self.n_points;
        let mut birth = vec![0.0; self.n_clusters];
        for e in self.edges.iter().filter(|e| e.child >= base) {
            birth[e.child - base] = e.lambda;
        }
        let mut stability = vec![0.0; self.n_clusters];
        for e in &self.edges {
            stability[e.parent - base] += (e.lambda - birth[e.parent - base]) * e.child_size as f64;
        }
        debug_assert!(stability.iter().all(|s| s.is_finite() && *s >= 0.0));
        stability
    }

    /// Excess-of-mass selection. The root is never selected; a cluster is
    /// replaced by its children only when they are strictly more stable.
    pub fn select_eom(&self) -> Vec<usize> {
        let base = self.n_points;
        let mut stability = self.stability();
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); self.n_clusters];
        for e in self.edges.iter().filter(|e| e.child >= base) {
            children[e.parent - base].push(e.child - base);
        }
        let mut selected = vec![true; self.n_clusters];
        selected[0] = false;
        for c in (1..self.n_clusters).rev() {
            let subtree: f64 = children[c].iter().map(|&k| stability[k]).sum();
            if subtree > stability[c] {
                selected[c] = false;
                stability[c] = subtree;
            } else {
                let mut stack = children[c].clone();
                while let Some(k) = stack.pop() {
                    selected[k] = false;
                    stack.extend_from_slice(&children[k]);
                }
            }
        }
        (0..self.n_clusters)
            .filter(|&c| selected[c])
            .map(|c| c + base)
            .collect()
    }

    /// Labels numbered by ascending cluster id; points whose nearest selected
    /// ancestor does not exist are noise.
    pub fn labels(&self, selected: &[usize]) -> LabelVector {
        let base = self.n_points;
        let mut parent = vec![usize::MAX; base + self.n_clusters];
        for e in &self.edges {
            parent[e.child] = e.parent;
        }
        let mut label_of = vec![NOISE; self.n_clusters];
        let mut sorted = selected.to_vec();
        sorted.sort_unstable();
        for (label, &c) in sorted.iter().enumerate() {
            label_of[c - base] = label as i64;
        }
        let labels = (0..base)
            .map(|p| {
                let mut node = parent[p];
                while node != usize::MAX {
                    let l = label_of[node - base];
                    if l != NOISE {
                        return l;
                    }
                    node = parent[node];
                }
                NOISE
            })
            .collect();
        LabelVector::new(labels)
    }
}

fn lambda_of(distance: f64) -> f64 {
    if distance > 0.0 {
        (1.0 / distance).min(LAMBDA_MAX)
    } else {
        LAMBDA_MAX
    }
}

/// The intermediate structures of one clustering run.
#[derive(Clone, Debug)]
pub struct ClusterHierarchy {
    pub single_linkage: SingleLinkageTree,
    pub condensed: CondensedTree,
    pub stability: Vec<f64>,
    pub selected: Vec<usize>,
    pub labels: LabelVector,
}

impl ClusterHierarchy {
    pub fn new(single_linkage: SingleLinkageTree, config: &HdbscanConfig) -> Self {
        let condensed = CondensedTree::new(&single_linkage, config.min_cluster_size);
        let stability = condensed.stability();
        let selected = condensed.select_eom();
        let labels = condensed.labels(&selected);
        debug_assert!(selected.len() <= single_linkage.n / config.min_cluster_size.max(1));
        Self {
            single_linkage,
            condensed,
            stability,
            selected,
            labels,
        }
    }
}

pub fn condense_and_extract(tree: &SingleLinkageTree, config: &HdbscanConfig) -> LabelVector {
    ClusterHierarchy::new(tree.clone(), config).labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{build_mst, cluster_embeddings, pairwise_distances, Points};
    use crate::pdw::Partition;

    fn line(xs: &[f64]) -> SingleLinkageTree {
        let p = Points::new(xs, 1).unwrap();
        SingleLinkageTree::from_mst(&build_mst(&pairwise_distances(p), xs.len()), xs.len())
    }

    #[test]
    fn single_linkage_merges_in_distance_order() {
        let t = line(&[0.0, 1.0, 3.0, 7.0]);
        let d: Vec<f64> = t.merges().iter().map(|m| m.distance).collect();
        assert_eq!(d, vec![1.0, 2.0, 4.0]);
        assert_eq!(t.merges()[2].size, 4);
        assert_eq!(t.merges()[1].left.max(t.merges()[1].right), 4);
    }

    #[test]
    fn condensed_tree_accounts_for_every_point() {
        let xs: Vec<f64> = (0..12)
            .map(|i| if i < 6 { i as f64 * 0.1 } else { 10.0 + i as f64 * 0.1 })
            .collect();
        let ct = CondensedTree::new(&line(&xs), 3);
        let mut seen = vec![0; xs.len()];
        for e in ct.edges().iter().filter(|e| e.child < xs.len()) {
            seen[e.child] += 1;
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert!(ct.n_clusters() >= 3);
    }

    #[test]
    fn two_groups_are_found() {
        let xs: Vec<f64> = (0..10)
            .map(|i| if i < 5 { i as f64 * 0.1 } else { 5.0 + i as f64 * 0.1 })
            .collect();
        let labels = cluster_embeddings(&xs, 1, &HdbscanConfig::new(3).with_min_samples(2)).unwrap();
        let want = Partition::from_label_slice(&[0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert_eq!(Partition::from_labels(&labels), want);
    }

    #[test]
    fn uniform_line_is_one_cluster_or_noise_never_root() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ct = CondensedTree::new(&line(&xs), 5);
        assert!(!ct.select_eom().contains(&ct.root()));
    }
}

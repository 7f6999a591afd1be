use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Label assigned by the clusterer to points outside every cluster.
pub const NOISE: i64 = -1;

/// One integer label per pulse. Only predictions may contain [`NOISE`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelVector(Vec<i64>);

impl LabelVector {
    pub fn new(labels: Vec<i64>) -> Self {
        Self(labels)
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<i64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has_noise(&self) -> bool {
        self.0.iter().any(|&l| l < 0)
    }

    pub fn noise_count(&self) -> usize {
        self.0.iter().filter(|&&l| l < 0).count()
    }

    /// Number of distinct non-noise labels.
    pub fn n_clusters(&self) -> usize {
        let mut seen: Vec<i64> = self.0.iter().copied().filter(|&l| l >= 0).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Labels reordered so that `out[i] = self[order[i]]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self(order.iter().map(|&i| self.0[i]).collect())
    }
}

impl From<Vec<i64>> for LabelVector {
    fn from(v: Vec<i64>) -> Self {
        Self(v)
    }
}

/// A set of disjoint, non-empty index blocks covering `0..n`.
///
/// Stored canonically: members ascending inside each block and blocks ordered
/// by their smallest member, so structural equality is partition equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    n: usize,
}

impl Partition {
    pub fn new(mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let n: usize = blocks.iter().map(Vec::len).sum();
        let mut seen = vec![false; n];
        for block in &mut blocks {
            if block.is_empty() {
                return Err(Error::Validation("partition contains an empty block".into()));
            }
            block.sort_unstable();
            for &i in block.iter() {
                if i >= n {
                    return Err(Error::Validation(format!("index {i} outside ground set of size {n}")));
                }
                if seen[i] {
                    return Err(Error::Validation(format!("index {i} appears in two blocks")));
                }
                seen[i] = true;
            }
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Self { blocks, n })
    }

    /// One block per distinct label; every [`NOISE`] index becomes a singleton.
    pub fn from_labels(labels: &LabelVector) -> Self {
        Self::from_label_slice(labels.as_slice())
    }

    pub fn from_label_slice(labels: &[i64]) -> Self {
        let mut index_of: HashMap<i64, usize> = HashMap::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            if l < 0 {
                blocks.push(vec![i]);
                continue;
            }
            let b = *index_of.entry(l).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[b].push(i);
        }
        // Blocks are created in order of first member and filled in index
        // order, which is already canonical.
        Self {
            blocks,
            n: labels.len(),
        }
    }

    /// Canonical labels: block `b` (ordered by smallest member) gets label `b`.
    pub fn to_labels(&self) -> LabelVector {
        LabelVector(self.assignment().into_iter().map(|b| b as i64).collect())
    }

    /// Block index of every point.
    pub fn assignment(&self) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for (b, block) in self.blocks.iter().enumerate() {
            for &i in block {
                out[i] = b;
            }
        }
        out
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }
}

pub fn partition_from_labels(labels: &LabelVector) -> Partition {
    Partition::from_labels(labels)
}

pub fn labels_from_partition(partition: &Partition) -> LabelVector {
    partition.to_labels()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks(p: &Partition) -> Vec<Vec<usize>> {
        p.blocks().to_vec()
    }

    #[test]
    fn labels_to_partition_groups_by_emitter() {
        let p = partition_from_labels(&vec![0, 0, 1, 1, 0].into());
        assert_eq!(blocks(&p), vec![vec![0, 1, 4], vec![2, 3]]);
        let p = partition_from_labels(&vec![7, 7, 7].into());
        assert_eq!(blocks(&p), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn noise_becomes_singletons() {
        let p = partition_from_labels(&vec![0, NOISE, NOISE].into());
        assert_eq!(blocks(&p), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn canonical_labels_follow_smallest_member() {
        let a = Partition::new(vec![vec![0, 1], vec![2]]).unwrap();
        let b = Partition::new(vec![vec![2], vec![1, 0]]).unwrap();
        assert_eq!(a.to_labels().as_slice(), &[0, 0, 1]);
        assert_eq!(b.to_labels().as_slice(), &[0, 0, 1]);
        assert_eq!(a, b);
    }

    #[test]
    fn round_trip_reproduces_partition() {
        let labels: LabelVector = vec![0, 0, 1, 1, 0].into();
        let p = partition_from_labels(&labels);
        assert_eq!(partition_from_labels(&labels_from_partition(&p)), p);
        let l = labels_from_partition(&p);
        assert_eq!(l.as_slice(), &[0, 0, 1, 1, 0]);
    }

    #[test]
    fn invalid_blocks_are_rejected() {
        assert!(Partition::new(vec![vec![0, 1], vec![1]]).is_err());
        assert!(Partition::new(vec![vec![0, 3], vec![1]]).is_err());
        assert!(Partition::new(vec![vec![0, 1], vec![]]).is_err());
    }

    #[test]
    fn cluster_count_ignores_noise() {
        let l: LabelVector = vec![3, NOISE, 3, 5, NOISE].into();
        assert_eq!(l.n_clusters(), 2);
        assert_eq!(l.noise_count(), 2);
    }
}

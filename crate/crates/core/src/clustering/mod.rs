//! HDBSCAN over per-pulse embeddings.
//!
//! Pipeline: core distances, mutual-reachability distances, a minimum
//! spanning tree (Prim's algorithm), the single-linkage dendrogram, the tree
//! condensed by `min_cluster_size`, and excess-of-mass cluster selection.
//! Points outside every selected cluster get [`NOISE`](crate::pdw::NOISE).

mod hdbscan;
mod tree;

pub use hdbscan::{
    build_mst, build_mst_from_points, cluster_embeddings, cluster_points, core_distances, mutual_reachability,
    pairwise_distances, MstEdge, Points,
};
pub use tree::{condense_and_extract, ClusterHierarchy, CondensedEdge, CondensedTree, Merge, SingleLinkageTree};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HdbscanConfig {
    pub min_cluster_size: usize,
    /// Neighbour rank (self excluded) that defines a point's core distance.
    /// `None` means "same as `min_cluster_size`".
    #[serde(default)]
    pub min_samples: Option<usize>,
}

impl HdbscanConfig {
    pub fn new(min_cluster_size: usize) -> Self {
        Self {
            min_cluster_size,
            min_samples: None,
        }
    }

    pub fn with_min_samples(mut self, min_samples: usize) -> Self {
        self.min_samples = Some(min_samples);
        self
    }

    /// Minimum cluster size 20 at 1000 pulses per train, scaled to the
    /// train length and floored at 5.
    pub fn for_train_length(len: usize) -> Self {
        let scaled = (20.0 * len as f64 / 1000.0).round() as usize;
        Self::new(scaled.max(5))
    }

    pub fn min_samples(&self) -> usize {
        self.min_samples.unwrap_or(self.min_cluster_size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_cluster_size < 2 {
            return Err(Error::Config(format!(
                "min_cluster_size must be at least 2, got {}",
                self.min_cluster_size
            )));
        }
        if self.min_samples() < 1 {
            return Err(Error::Config("min_samples must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for HdbscanConfig {
    fn default() -> Self {
        Self::new(20)
    }
}

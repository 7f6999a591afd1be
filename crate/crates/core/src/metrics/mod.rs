//! Extrinsic clustering metrics.
//!
//! A predicted partition `u` is compared with the ground truth `v`. All
//! entropies use the natural logarithm; every score below is a ratio of
//! entropic or pair-count quantities and does not depend on the base.

mod bootstrap;
mod contingency;
mod evaluation;
mod information;
mod pair_counting;

pub use bootstrap::{bootstrap_ci, quantile};
pub use contingency::ContingencyTable;
pub use evaluation::{
    ami_by_emitter_count, cluster_count_rms_error, cluster_size_distribution, confusion_matrix, evaluate_dataset,
    ClusterSizeBin, ClusterSizeSummary, ConfusionMatrix, DatasetReport, EmitterCountAmi, MetricReport, Scores,
};
pub use information::{
    adjusted_mutual_information, ami, entropy, expected_mutual_information, homogeneity_completeness_v,
    mutual_information, LogFactorials,
};
pub use pair_counting::{adjusted_rand_index, rand_index};

use crate::pdw::Partition;
use crate::Result;

/// All five scores of one prediction against its ground truth.
pub fn score(u: &Partition, v: &Partition) -> Result<Scores> {
    let table = ContingencyTable::new(u, v)?;
    let (homogeneity, completeness, v_measure) = table.homogeneity_completeness_v();
    let ari = if table.total() >= 2 {
        table.adjusted_rand_index()?
    } else {
        1.0
    };
    Ok(Scores {
        ami: table.adjusted_mutual_information(),
        ari,
        v_measure,
        homogeneity,
        completeness,
    })
}

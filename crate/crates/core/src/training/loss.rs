use serde::{Deserialize, Serialize};

use crate::numerics::{Scalar, Var};
use crate::{Error, Result};

/// Floor on distances inside the derivative of the Euclidean norm.
pub const DISTANCE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mining {
    /// Every non-easy triplet of a train.
    BatchAll,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// Mean over each train's triplets, then mean over the trains of a batch.
    PerTrain,
    /// Mean over all triplets of the batch at once.
    Pooled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripletLossConfig {
    pub margin: f64,
    #[serde(default = "batch_all")]
    pub mining: Mining,
    #[serde(default = "per_train")]
    pub reduction: Reduction,
}

fn batch_all() -> Mining {
    Mining::BatchAll
}
fn per_train() -> Reduction {
    Reduction::PerTrain
}

impl TripletLossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::Config(format!("margin must be positive, got {}", self.margin)));
        }
        Ok(())
    }
}

impl Default for TripletLossConfig {
    fn default() -> Self {
        Self {
            margin: 1.9,
            mining: Mining::BatchAll,
            reduction: Reduction::PerTrain,
        }
    }
}

/// Euclidean distances between the rows of a row-major `n x dim` matrix.
pub fn pairwise_distances(z: &[f64], dim: usize) -> Vec<f64> {
    let n = z.len() / dim;
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = (0..dim).map(|c| (z[i * dim + c] - z[j * dim + c]).powi(2)).sum();
            d[i * n + j] = s.sqrt();
            d[j * n + i] = s.sqrt();
        }
    }
    d
}

/// All `(anchor, positive, negative)` with `i ~ j`, `i != j`, `i !~ k` and
/// `d_ij + margin >= d_ik`. Both orderings of an anchor-positive pair appear.
pub fn mine_batch_all(d: &[f64], labels: &[i64], margin: f64) -> Vec<(usize, usize, usize)> {
    let n = labels.len();
    assert_eq!(d.len(), n * n, "distance matrix does not match labels");
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j || labels[i] != labels[j] {
                continue;
            }
            for k in 0..n {
                if labels[k] != labels[i] && d[i * n + j] + margin >= d[i * n + k] {
                    out.push((i, j, k));
                }
            }
        }
    }
    out
}

/// Mean hinge over the non-easy triplets; 0 when there are none.
pub fn triplet_loss_value(d: &[f64], labels: &[i64], margin: f64) -> f64 {
    let n = labels.len();
    let triplets = mine_batch_all(d, labels, margin);
    if triplets.is_empty() {
        return 0.0;
    }
    let sum: f64 = triplets
        .iter()
        .map(|&(i, j, k)| (d[i * n + j] - d[i * n + k] + margin).max(0.0))
        .sum();
    sum / triplets.len() as f64
}

/// Hinge sum over the non-easy triplets of one train's embeddings `[n, d]`
/// and the number of such triplets.
pub fn triplet_hinge<'t, T: Scalar>(z: Var<'t, T>, labels: &[i64], margin: f64) -> Result<(Var<'t, T>, usize)> {
    z.pairwise_distances(T::of(DISTANCE_EPS))?
        .triplet_hinge_sum(labels, T::of(margin))
}

/// Batch-all triplet loss of one train. A train without valid triplets gives
/// a constant zero that carries no gradient.
pub fn batch_all_triplet_loss<'t, T: Scalar>(z: Var<'t, T>, labels: &[i64], margin: f64) -> Result<Var<'t, T>> {
    let (sum, count) = triplet_hinge(z, labels, margin)?;
    if count == 0 {
        return Ok(z.tape().scalar(T::zero()));
    }
    Ok(sum.scale(T::of(1.0 / count as f64)))
}

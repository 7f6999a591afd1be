use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bootstrap_ci, quantile, score};
use crate::pdw::{LabelVector, Partition};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub ami: f64,
    pub ari: f64,
    pub v_measure: f64,
    pub homogeneity: f64,
    pub completeness: f64,
}

impl Scores {
    fn accumulate(&mut self, other: &Scores) {
        self.ami += other.ami;
        self.ari += other.ari;
        self.v_measure += other.v_measure;
        self.homogeneity += other.homogeneity;
        self.completeness += other.completeness;
    }

    fn scaled(mut self, k: f64) -> Self {
        self.ami *= k;
        self.ari *= k;
        self.v_measure *= k;
        self.homogeneity *= k;
        self.completeness *= k;
        self
    }
}

/// Scores of one train plus its cluster counts. The predicted count excludes
/// noise points; the scores treat each noise point as its own block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(flatten)]
    pub scores: Scores,
    pub n_pred_clusters: usize,
    pub n_true_clusters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub n_trains: usize,
    pub mean: Scores,
    pub cluster_count_rmse: f64,
    #[serde(skip)]
    pub per_train: Vec<MetricReport>,
}

pub fn evaluate_dataset(preds: &[LabelVector], truths: &[LabelVector]) -> Result<DatasetReport> {
    if preds.len() != truths.len() {
        return Err(Error::Validation(format!(
            "{} predictions for {} ground truths",
            preds.len(),
            truths.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Validation("empty evaluation set".into()));
    }
    let per_train = preds
        .par_iter()
        .zip(truths.par_iter())
        .map(|(p, t)| {
            let scores = score(&Partition::from_labels(p), &Partition::from_labels(t))?;
            Ok(MetricReport {
                scores,
                n_pred_clusters: p.n_clusters(),
                n_true_clusters: t.n_clusters(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sum = Scores::default();
    for r in &per_train {
        sum.accumulate(&r.scores);
    }
    let pred_counts: Vec<usize> = per_train.iter().map(|r| r.n_pred_clusters).collect();
    let true_counts: Vec<usize> = per_train.iter().map(|r| r.n_true_clusters).collect();
    Ok(DatasetReport {
        n_trains: per_train.len(),
        mean: sum.scaled(1.0 / per_train.len() as f64),
        cluster_count_rmse: cluster_count_rms_error(&pred_counts, &true_counts)?,
        per_train,
    })
}

pub fn cluster_count_rms_error(pred_counts: &[usize], true_counts: &[usize]) -> Result<f64> {
    if pred_counts.len() != true_counts.len() || pred_counts.is_empty() {
        return Err(Error::Validation("cluster counts must be paired and non-empty".into()));
    }
    let sq: f64 = pred_counts
        .iter()
        .zip(true_counts)
        .map(|(&p, &t)| (p as f64 - t as f64).powi(2))
        .sum();
    Ok((sq / pred_counts.len() as f64).sqrt())
}

/// Counts indexed by `(true cluster count, predicted cluster count)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn get(&self, n_true: usize, n_pred: usize) -> usize {
        self.counts
            .get(n_true)
            .and_then(|row| row.get(n_pred))
            .copied()
            .unwrap_or(0)
    }

    pub fn max_true(&self) -> usize {
        self.counts.len().saturating_sub(1)
    }

    pub fn max_pred(&self) -> usize {
        self.counts.first().map_or(0, |r| r.len().saturating_sub(1))
    }

    pub fn row_sum(&self, n_true: usize) -> usize {
        self.counts.get(n_true).map_or(0, |r| r.iter().sum())
    }

    /// Long-form non-zero cells `(n_true, n_pred, count)`.
    pub fn cells(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (t, row) in self.counts.iter().enumerate() {
            for (p, &c) in row.iter().enumerate() {
                if c > 0 {
                    out.push((t, p, c));
                }
            }
        }
        out
    }
}

pub fn confusion_matrix(pred_counts: &[usize], true_counts: &[usize]) -> Result<ConfusionMatrix> {
    if pred_counts.len() != true_counts.len() {
        return Err(Error::Validation("cluster counts must be paired".into()));
    }
    let max_t = true_counts.iter().copied().max().unwrap_or(0);
    let max_p = pred_counts.iter().copied().max().unwrap_or(0);
    let mut counts = vec![vec![0; max_p + 1]; max_t + 1];
    for (&p, &t) in pred_counts.iter().zip(true_counts) {
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmitterCountAmi {
    pub n_emitters: usize,
    pub n_trains: usize,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Mean AMI per true emitter count with a percentile-bootstrap interval.
pub fn ami_by_emitter_count(
    reports: &[MetricReport],
    lo: f64,
    hi: f64,
    n_resamples: usize,
    seed: u64,
) -> Result<Vec<EmitterCountAmi>> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in reports {
        groups.entry(r.n_true_clusters).or_default().push(r.scores.ami);
    }
    groups
        .into_iter()
        .map(|(k, values)| {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let (l, h) = bootstrap_ci(
                &values,
                lo,
                hi,
                n_resamples,
                seed ^ (k as u64).wrapping_mul(0x9E37_79B9),
            )?;
            Ok(EmitterCountAmi {
                n_emitters: k,
                n_trains: values.len(),
                mean,
                lo: l,
                hi: h,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSizeSummary {
    pub n_emitters: usize,
    pub n_clusters: usize,
    pub mean: f64,
    pub p10: f64,
    pub p90: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSizeBin {
    pub n_emitters: usize,
    pub size_lo: usize,
    pub size_hi: usize,
    pub count: usize,
    pub proportion: f64,
}

/// True cluster sizes grouped by the train's emitter count: per-group mean
/// and 10th/90th percentiles, plus a histogram with `bin_width`-wide bins
/// whose proportions sum to one within each group.
pub fn cluster_size_distribution(
    truths: &[LabelVector],
    bin_width: usize,
) -> (Vec<ClusterSizeSummary>, Vec<ClusterSizeBin>) {
    let bin_width = bin_width.max(1);
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for t in truths {
        let p = Partition::from_labels(t);
        groups.entry(t.n_clusters()).or_default().extend(p.block_sizes());
    }
    let mut summaries = Vec::new();
    let mut bins = Vec::new();
    for (k, mut sizes) in groups {
        sizes.sort_unstable();
        let as_f: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
        summaries.push(ClusterSizeSummary {
            n_emitters: k,
            n_clusters: sizes.len(),
            mean: as_f.iter().sum::<f64>() / as_f.len() as f64,
            p10: quantile(&as_f, 0.1),
            p90: quantile(&as_f, 0.9),
        });
        let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
        for &s in &sizes {
            *hist.entry(s / bin_width).or_default() += 1;
        }
        for (b, count) in hist {
            bins.push(ClusterSizeBin {
                n_emitters: k,
                size_lo: b * bin_width,
                size_hi: (b + 1) * bin_width,
                count,
                proportion: count as f64 / sizes.len() as f64,
            });
        }
    }
    (summaries, bins)
}

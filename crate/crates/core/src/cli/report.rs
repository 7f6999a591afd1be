//! Evaluation artifacts. Every CSV is long-form and sorted, so reports of the
//! same run are byte-identical.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::EvaluateSection;
use crate::clustering::{cluster_embeddings, HdbscanConfig};
use crate::metrics::{
    ami_by_emitter_count, cluster_size_distribution, confusion_matrix, evaluate_dataset, ClusterSizeBin,
    ClusterSizeSummary, EmitterCountAmi, MetricReport, Scores,
};
use crate::models::{EmbeddingSet, ModelConfig, ParameterStore};
use crate::pdw::LabelVector;
use crate::training::LabelledTrain;
use crate::{Error, Result};

pub const METRICS_FILE: &str = "metrics.json";
pub const PER_TRAIN_FILE: &str = "per_train.csv";
pub const CONFUSION_FILE: &str = "confusion_matrix.csv";
pub const AMI_BY_COUNT_FILE: &str = "ami_by_emitter_count.csv";
pub const SIZE_DISTRIBUTION_FILE: &str = "cluster_size_distribution.csv";
pub const SIZE_SUMMARY_FILE: &str = "cluster_size_summary.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Files written by [`EvaluationReport::write`], in write order.
pub const REPORT_FILES: [&str; 6] = [
    METRICS_FILE,
    PER_TRAIN_FILE,
    CONFUSION_FILE,
    AMI_BY_COUNT_FILE,
    SIZE_DISTRIBUTION_FILE,
    SIZE_SUMMARY_FILE,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRow {
    pub train_id: String,
    pub n_pulses: usize,
    pub n_true_clusters: usize,
    pub n_pred_clusters: usize,
    pub n_noise: usize,
    pub ami: f64,
    pub ari: f64,
    pub v_measure: f64,
    pub homogeneity: f64,
    pub completeness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionCell {
    pub n_true: usize,
    pub n_pred: usize,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub model: String,
    pub n_trains: usize,
    #[serde(flatten)]
    pub mean: Scores,
    pub cluster_count_rmse: f64,
    pub mean_pred_clusters: f64,
    pub mean_true_clusters: f64,
    pub noise_fraction: f64,
    /// `null` when `min_cluster_size` scaled with each train's length.
    pub hdbscan: Option<HdbscanConfig>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub metrics: AggregateMetrics,
    pub per_train: Vec<TrainRow>,
    pub confusion: Vec<ConfusionCell>,
    pub ami_by_emitter_count: Vec<EmitterCountAmi>,
    pub size_distribution: Vec<ClusterSizeBin>,
    pub size_summary: Vec<ClusterSizeSummary>,
}

/// Embeddings of every train, computed once and clustered many times.
pub fn embed_all(
    model: &ModelConfig,
    params: &ParameterStore<f32>,
    data: &[LabelledTrain],
) -> Result<Vec<EmbeddingSet>> {
    data.par_iter().map(|t| model.embed(params, &t.features)).collect()
}

/// Clusters every embedding set; `None` scales with each train's length.
pub fn cluster_all(embeddings: &[EmbeddingSet], hdbscan: Option<HdbscanConfig>) -> Result<Vec<LabelVector>> {
    embeddings
        .par_iter()
        .map(|z| {
            let cfg = hdbscan.unwrap_or_else(|| HdbscanConfig::for_train_length(z.len()));
            cluster_embeddings(z.as_slice(), z.dim(), &cfg)
        })
        .collect()
}

impl EvaluationReport {
    /// `data` and `preds` are paired; rows come out sorted by train id.
    pub fn build(
        model: &str,
        data: &[LabelledTrain],
        preds: &[LabelVector],
        hdbscan: Option<HdbscanConfig>,
        settings: &EvaluateSection,
    ) -> Result<Self> {
        if data.len() != preds.len() {
            return Err(Error::Validation(format!(
                "{} predictions for {} trains",
                preds.len(),
                data.len()
            )));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by(|&a, &b| data[a].train_id().cmp(data[b].train_id()));
        let truths: Vec<LabelVector> = order.iter().map(|&i| data[i].labels.clone()).collect();
        let preds: Vec<LabelVector> = order.iter().map(|&i| preds[i].clone()).collect();
        let ds = evaluate_dataset(&preds, &truths)?;

        let per_train: Vec<TrainRow> = order
            .iter()
            .zip(&ds.per_train)
            .zip(&preds)
            .map(|((&i, r), p)| row(data[i].train_id(), p, r))
            .collect();
        let pred_counts: Vec<usize> = ds.per_train.iter().map(|r| r.n_pred_clusters).collect();
        let true_counts: Vec<usize> = ds.per_train.iter().map(|r| r.n_true_clusters).collect();
        let confusion = confusion_matrix(&pred_counts, &true_counts)?
            .cells()
            .into_iter()
            .map(|(n_true, n_pred, count)| ConfusionCell { n_true, n_pred, count })
            .collect();
        let by_count = ami_by_emitter_count(
            &ds.per_train,
            settings.ci_lo,
            settings.ci_hi,
            settings.bootstrap_resamples,
            settings.bootstrap_seed,
        )?;
        let (size_summary, size_distribution) = cluster_size_distribution(&truths, settings.size_bin_width);

        let n = per_train.len() as f64;
        let total_pulses: usize = per_train.iter().map(|r| r.n_pulses).sum();
        let total_noise: usize = per_train.iter().map(|r| r.n_noise).sum();
        let metrics = AggregateMetrics {
            model: model.to_string(),
            n_trains: ds.n_trains,
            mean: ds.mean,
            cluster_count_rmse: ds.cluster_count_rmse,
            mean_pred_clusters: pred_counts.iter().sum::<usize>() as f64 / n,
            mean_true_clusters: true_counts.iter().sum::<usize>() as f64 / n,
            noise_fraction: if total_pulses == 0 {
                0.0
            } else {
                total_noise as f64 / total_pulses as f64
            },
            hdbscan,
        };
        Ok(Self {
            metrics,
            per_train,
            confusion,
            ami_by_emitter_count: by_count,
            size_distribution,
            size_summary,
        })
    }

    /// Writes [`REPORT_FILES`] into `dir` and returns their paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let metrics = dir.join(METRICS_FILE);
        let json = serde_json::to_string_pretty(&self.metrics).expect("metrics are serialisable");
        std::fs::write(&metrics, json + "\n").map_err(|e| Error::io(&metrics, e))?;
        Ok(vec![
            metrics,
            write_csv(&dir.join(PER_TRAIN_FILE), &self.per_train)?,
            write_csv(&dir.join(CONFUSION_FILE), &self.confusion)?,
            write_csv(
                &dir.join(AMI_BY_COUNT_FILE),
                &self.ami_by_emitter_count.iter().map(CountRow::from).collect::<Vec<_>>(),
            )?,
            write_csv(&dir.join(SIZE_DISTRIBUTION_FILE), &self.size_distribution)?,
            write_csv(&dir.join(SIZE_SUMMARY_FILE), &self.size_summary)?,
        ])
    }
}

fn row(train_id: &str, pred: &LabelVector, r: &MetricReport) -> TrainRow {
    TrainRow {
        train_id: train_id.to_string(),
        n_pulses: pred.len(),
        n_true_clusters: r.n_true_clusters,
        n_pred_clusters: r.n_pred_clusters,
        n_noise: pred.noise_count(),
        ami: r.scores.ami,
        ari: r.scores.ari,
        v_measure: r.scores.v_measure,
        homogeneity: r.scores.homogeneity,
        completeness: r.scores.completeness,
    }
}

/// Column order `lo, mean, hi` for direct interval plotting.
#[derive(Serialize)]
struct CountRow {
    n_emitters: usize,
    n_trains: usize,
    lo: f64,
    mean: f64,
    hi: f64,
}

impl From<&EmitterCountAmi> for CountRow {
    fn from(e: &EmitterCountAmi) -> Self {
        Self {
            n_emitters: e.n_emitters,
            n_trains: e.n_trains,
            lo: e.lo,
            mean: e.mean,
            hi: e.hi,
        }
    }
}

/// One row of the sweep table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub ami: f64,
    pub ari: f64,
    pub v_measure: f64,
    pub homogeneity: f64,
    pub completeness: f64,
    pub cluster_count_rmse: f64,
}

impl SweepRow {
    pub fn new(config: &HdbscanConfig, metrics: &AggregateMetrics) -> Self {
        Self {
            min_cluster_size: config.min_cluster_size,
            min_samples: config.min_samples(),
            ami: metrics.mean.ami,
            ari: metrics.mean.ari,
            v_measure: metrics.mean.v_measure,
            homogeneity: metrics.mean.homogeneity,
            completeness: metrics.mean.completeness,
            cluster_count_rmse: metrics.cluster_count_rmse,
        }
    }
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<PathBuf> {
    let to_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    for r in rows {
        w.serialize(r).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

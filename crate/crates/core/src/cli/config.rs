use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::HdbscanConfig;
use crate::models::{GruConfig, ModelConfig, TransformerConfig};
use crate::simulator::ScenarioConfig;
use crate::training::TrainConfig;
use crate::{Error, Result};

pub const RUN_SCHEMA_VERSION: u32 = 1;

/// Dataset splits written by `generate`.
pub const SPLITS: [&str; 3] = ["train", "val", "test"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn get(&self, split: &str) -> Option<usize> {
        match split {
            "train" => Some(self.train),
            "val" => Some(self.val),
            "test" => Some(self.test),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub transformer: TransformerConfig,
    pub gru: GruConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub bootstrap_resamples: usize,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub bootstrap_seed: u64,
    /// Histogram bin width of the true cluster size report, in pulses.
    pub size_bin_width: usize,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            bootstrap_resamples: 2000,
            ci_lo: 0.1,
            ci_hi: 0.9,
            bootstrap_seed: 0,
            size_bin_width: 5,
        }
    }
}

/// Everything a run needs, loadable from one TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    pub splits: SplitSizes,
    pub models: ModelSection,
    pub training: TrainConfig,
    /// Absent means `min_cluster_size` scales with train length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hdbscan: Option<HdbscanConfig>,
    #[serde(default)]
    pub evaluate: EvaluateSection,
}

impl RunConfig {
    /// 2,000 / 200 / 200 trains of 100 pulses, the small models, and
    /// HDBSCAN scaled with train length.
    pub fn desk() -> Self {
        Self {
            schema_version: RUN_SCHEMA_VERSION,
            scenario: ScenarioConfig::desk(),
            splits: SplitSizes {
                train: 2000,
                val: 200,
                test: 200,
            },
            models: ModelSection {
                transformer: TransformerConfig::desk(),
                gru: GruConfig::desk(),
            },
            training: TrainConfig::desk(),
            hdbscan: None,
            evaluate: EvaluateSection::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config is serialisable")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != RUN_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {RUN_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.scenario.validate()?;
        if self.splits.train == 0 || self.splits.val == 0 || self.splits.test == 0 {
            return Err(Error::Config("every split needs at least one train".into()));
        }
        self.models.transformer.validate()?;
        self.models.gru.validate()?;
        self.training.validate()?;
        if let Some(h) = &self.hdbscan {
            h.validate()?;
        }
        let e = &self.evaluate;
        if e.bootstrap_resamples == 0 || e.size_bin_width == 0 {
            return Err(Error::Config(
                "bootstrap_resamples and size_bin_width must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&e.ci_lo) || !(0.0..=1.0).contains(&e.ci_hi) || e.ci_lo >= e.ci_hi {
            return Err(Error::Config(format!("invalid interval [{}, {}]", e.ci_lo, e.ci_hi)));
        }
        Ok(())
    }

    pub fn model(&self, name: &str) -> Result<ModelConfig> {
        match name {
            "transformer" => Ok(ModelConfig::Transformer(self.models.transformer.clone())),
            "gru" => Ok(ModelConfig::Gru(self.models.gru.clone())),
            "identity" => Ok(ModelConfig::Identity),
            other => Err(Error::Usage(format!(
                "unknown model {other:?} (expected transformer, gru or identity)"
            ))),
        }
    }

    /// Scenario of one split: its own train count and a seed derived from
    /// the base seed, so splits never share trains.
    pub fn scenario_for(&self, split: &str) -> Result<ScenarioConfig> {
        let n_trains = self
            .splits
            .get(split)
            .ok_or_else(|| Error::Usage(format!("unknown split {split:?}")))?;
        let index = SPLITS.iter().position(|s| *s == split).expect("known split") as u64;
        Ok(ScenarioConfig {
            n_trains,
            rng_seed: split_seed(self.scenario.rng_seed, index),
            ..self.scenario.clone()
        })
    }

    /// Report clustering for trains of `len` pulses.
    pub fn hdbscan_for(&self, len: usize) -> HdbscanConfig {
        self.hdbscan.unwrap_or_else(|| HdbscanConfig::for_train_length(len))
    }

    /// The training section with the run-level clustering applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            hdbscan: self.hdbscan.or(self.training.hdbscan),
            ..self.training.clone()
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::desk()
    }
}

/// Split 0 keeps the base seed.
pub fn split_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

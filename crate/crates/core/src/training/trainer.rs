use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{triplet_hinge, Adam, AdamConfig, Reduction, TripletLossConfig};
use crate::clustering::{cluster_embeddings, HdbscanConfig};
use crate::metrics::adjusted_mutual_information;
use crate::models::{init_params, input_tensor, Checkpoint, CheckpointManifest, Mode, ModelConfig, ParameterStore};
use crate::numerics::{Tape, Tensor};
use crate::pdw::{normalize_train, LabelVector, NormalizedTrain, Partition, PulseTrain};
use crate::{Error, Result};

const SHUFFLE_TAG: u64 = 0x5348_5546_464c_4521;
const DROPOUT_TAG: u64 = 0x4452_4f50_4f55_5421;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default = "beta1")]
    pub beta1: f64,
    #[serde(default = "beta2")]
    pub beta2: f64,
    #[serde(default = "adam_eps")]
    pub adam_eps: f64,
    #[serde(default)]
    pub loss: TripletLossConfig,
    /// Clustering used for validation; `None` scales with train length.
    #[serde(default)]
    pub hdbscan: Option<HdbscanConfig>,
    /// Validates on the first this-many validation trains only.
    #[serde(default)]
    pub max_val_trains: Option<usize>,
}

fn beta1() -> f64 {
    0.9
}
fn beta2() -> f64 {
    0.999
}
fn adam_eps() -> f64 {
    1e-8
}

impl TrainConfig {
    /// Learning rate 1e-4, batches of 8 trains, 8 epochs, margin 1.9.
    pub fn paper() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 8,
            epochs: 8,
            seed: 0,
            beta1: beta1(),
            beta2: beta2(),
            adam_eps: adam_eps(),
            loss: TripletLossConfig::default(),
            hdbscan: None,
            max_val_trains: None,
        }
    }

    /// Ten times the learning rate and more epochs, for the small profile.
    pub fn desk() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 12,
            ..Self::paper()
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be positive".into()));
        }
        self.adam().validate()?;
        self.loss.validate()?;
        if let Some(h) = &self.hdbscan {
            h.validate()?;
        }
        Ok(())
    }

    pub fn hdbscan_for(&self, train_len: usize) -> HdbscanConfig {
        self.hdbscan
            .unwrap_or_else(|| HdbscanConfig::for_train_length(train_len))
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

/// Normalized features with their ground-truth labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelledTrain {
    pub features: NormalizedTrain,
    pub labels: LabelVector,
}

impl LabelledTrain {
    pub fn from_train(train: &PulseTrain) -> Result<Self> {
        let labels = train
            .labels()
            .cloned()
            .ok_or_else(|| Error::Validation(format!("train {} has no labels", train.train_id)))?;
        Ok(Self {
            features: normalize_train(train),
            labels,
        })
    }

    pub fn train_id(&self) -> &str {
        &self.features.train_id
    }
}

pub fn prepare(trains: &[PulseTrain]) -> Result<Vec<LabelledTrain>> {
    trains.iter().map(LabelledTrain::from_train).collect()
}

/// Embeds and clusters one train.
pub fn predict(
    model: &ModelConfig,
    params: &ParameterStore<f32>,
    features: &NormalizedTrain,
    hdbscan: &HdbscanConfig,
) -> Result<LabelVector> {
    let z = model.embed(params, features)?;
    cluster_embeddings(z.as_slice(), z.dim(), hdbscan)
}

/// Mean AMI of predicted against true partitions, computed in parallel and
/// reduced in input order.
pub fn evaluate_ami(
    model: &ModelConfig,
    params: &ParameterStore<f32>,
    data: &[LabelledTrain],
    hdbscan: Option<HdbscanConfig>,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Validation("no trains to evaluate".into()));
    }
    let scores: Vec<f64> = data
        .par_iter()
        .map(|t| {
            let cfg = hdbscan.unwrap_or_else(|| HdbscanConfig::for_train_length(t.features.len()));
            let pred = predict(model, params, &t.features, &cfg)?;
            adjusted_mutual_information(&Partition::from_labels(&pred), &Partition::from_labels(&t.labels))
        })
        .collect::<Result<_>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Loss and gradient of one batch.
#[derive(Clone, Debug)]
pub struct BatchResult {
    pub loss: f64,
    pub n_triplets: usize,
    pub grads: ParameterStore<f32>,
}

fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag);
    rng.set_stream(index);
    rng
}

/// Batch loss and gradients. `dropout_streams[b]` seeds train `b`'s dropout
/// masks; `None` runs without dropout. Per-train work may run in parallel;
/// the reduction follows batch order.
pub fn batch_gradients(
    model: &ModelConfig,
    params: &ParameterStore<f32>,
    batch: &[&LabelledTrain],
    loss: &TripletLossConfig,
    dropout: Option<(u64, &[u64])>,
) -> Result<BatchResult> {
    let per_train: Vec<(f64, usize, Option<ParameterStore<f32>>)> = batch
        .par_iter()
        .enumerate()
        .map(|(b, t)| {
            let tape = Tape::<f32>::new().with_finite_checks(false);
            let bound = params.bind(&tape, true);
            let x = tape.constant(input_tensor(&t.features)?);
            let z = match dropout {
                Some((seed, streams)) => {
                    let mut rng = stream(seed, DROPOUT_TAG, streams[b]);
                    model.forward(&bound, x, &mut Mode::Train(&mut rng))?
                }
                None => model.forward(&bound, x, &mut Mode::Eval)?,
            };
            let (sum, count) = triplet_hinge(z, t.labels.as_slice(), loss.margin)?;
            let s = sum.item() as f64;
            if !s.is_finite() {
                return Err(Error::NonFinite(format!("loss on train {}", t.train_id())));
            }
            if count == 0 {
                return Ok((0.0, 0, None));
            }
            let grads = tape.backward(sum)?;
            Ok((s, count, Some(bound.gradients(&grads))))
        })
        .collect::<Result<_>>()?;

    let total: usize = per_train.iter().map(|p| p.1).sum();
    let weight = |count: usize| match loss.reduction {
        Reduction::PerTrain if count > 0 => 1.0 / (batch.len() * count) as f64,
        Reduction::Pooled if total > 0 => 1.0 / total as f64,
        _ => 0.0,
    };
    let mut grads = ParameterStore::new();
    for (k, t) in params.iter() {
        grads.insert(k, Tensor::<f32>::zeros(t.shape().to_vec()))?;
    }
    let mut value = 0.0;
    for (s, count, g) in &per_train {
        let w = weight(*count);
        value += w * s;
        if let Some(g) = g {
            let wf = w as f32;
            for (k, acc) in grads.iter_mut() {
                let src = g.get(k)?;
                for (a, &b) in acc.data_mut().iter_mut().zip(src.data()) {
                    *a += wf * b;
                }
            }
        }
    }
    Ok(BatchResult {
        loss: value,
        n_triplets: total,
        grads,
    })
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub epoch: usize,
    pub step: u64,
    pub train_loss: f64,
    pub val_ami: f64,
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub best_val_ami: f64,
    pub log: Vec<LogRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Progress {
    /// Completed epochs.
    epoch: usize,
    step: u64,
    best_val_ami: f64,
    best_epoch: usize,
    train: TrainConfig,
    log: Vec<LogRecord>,
}

pub struct Trainer {
    model: ModelConfig,
    config: TrainConfig,
    out_dir: Option<PathBuf>,
    verbose: bool,
}

impl Trainer {
    pub fn new(model: ModelConfig, config: TrainConfig) -> Self {
        Self {
            model,
            config,
            out_dir: None,
            verbose: false,
        }
    }

    /// Writes `best.ckpt`, `last.ckpt` and `train_log.jsonl` into `dir`.
    pub fn with_out_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.out_dir = Some(dir.into());
        self
    }

    /// Prints one line per epoch to stderr.
    pub fn verbose(mut self, on: bool) -> Self {
        self.verbose = on;
        self
    }

    fn checkpoint(&self, params: &ParameterStore<f32>, adam: Option<&Adam<f32>>, progress: &Progress) -> Checkpoint {
        let mut manifest = CheckpointManifest::new(self.model.clone(), self.config.seed);
        let mut meta = serde_json::to_value(progress).expect("progress is serialisable");
        if let Some(a) = adam {
            meta["adam_t"] = a.t.into();
        }
        manifest.metadata = meta;
        Checkpoint {
            manifest,
            params: params.clone(),
            optimizer: adam.map(|a| (a.m.clone(), a.v.clone())),
        }
    }

    fn dump_nonfinite(&self, err: &Error, epoch: usize, step: u64) {
        if let Some(dir) = &self.out_dir {
            let dump = serde_json::json!({ "error": err.to_string(), "epoch": epoch, "step": step });
            let _ = std::fs::write(dir.join("nonfinite_dump.json"), dump.to_string());
        }
    }

    /// Trains from fresh parameters or continues from a `last.ckpt`.
    pub fn run(
        &self,
        train: &[LabelledTrain],
        val: &[LabelledTrain],
        resume: Option<&Checkpoint>,
    ) -> Result<TrainOutcome> {
        self.config.validate()?;
        self.model.validate()?;
        if !self.model.is_trainable() {
            return Err(Error::Usage("identity model has no parameters".into()));
        }
        if train.is_empty() || val.is_empty() {
            return Err(Error::Validation(
                "training and validation sets must be non-empty".into(),
            ));
        }
        if let Some(dir) = &self.out_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let val = &val[..self.config.max_val_trains.unwrap_or(val.len()).min(val.len()).max(1)];
        let cfg = &self.config;

        let (mut params, mut adam, mut progress, mut best) = match resume {
            None => {
                let params = init_params(&self.model, cfg.seed);
                let adam = Adam::new(cfg.adam(), &params);
                let progress = Progress {
                    epoch: 0,
                    step: 0,
                    best_val_ami: f64::NEG_INFINITY,
                    best_epoch: 0,
                    train: cfg.clone(),
                    log: Vec::new(),
                };
                (params, adam, progress, None)
            }
            Some(ck) => {
                ck.ensure_model(&self.model)?;
                let progress: Progress = serde_json::from_value(ck.manifest.metadata.clone())
                    .map_err(|e| Error::Checkpoint(format!("training state: {e}")))?;
                let (m, v) = ck
                    .optimizer
                    .clone()
                    .ok_or_else(|| Error::Checkpoint("checkpoint has no optimizer state".into()))?;
                let t = ck.manifest.metadata["adam_t"].as_u64().unwrap_or(progress.step);
                let adam = Adam {
                    config: cfg.adam(),
                    t,
                    m,
                    v,
                };
                let best = self
                    .out_dir
                    .as_ref()
                    .map(|d| d.join("best.ckpt"))
                    .filter(|p| p.exists());
                let best = best.map(|p| Checkpoint::load(&p)).transpose()?;
                (ck.params.clone(), adam, progress, best)
            }
        };

        let log_path = self.out_dir.as_ref().map(|d| d.join("train_log.jsonl"));
        let start = Instant::now();
        let offset = progress.log.last().map_or(0.0, |r| r.wall_time);
        let mut order: Vec<usize> = (0..train.len()).collect();
        for epoch in progress.epoch + 1..=cfg.epochs {
            order.sort_unstable();
            order.shuffle(&mut stream(cfg.seed, SHUFFLE_TAG, epoch as u64));
            let mut epoch_loss = 0.0;
            let mut n_batches = 0usize;
            for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
                let batch: Vec<&LabelledTrain> = chunk.iter().map(|&i| &train[i]).collect();
                let streams: Vec<u64> = (0..chunk.len())
                    .map(|b| ((epoch as u64) << 32) | (bi * cfg.batch_size + b) as u64)
                    .collect();
                let result = batch_gradients(&self.model, &params, &batch, &cfg.loss, Some((cfg.seed, &streams)))
                    .inspect_err(|e| self.dump_nonfinite(e, epoch, progress.step))?;
                adam.step(&mut params, &result.grads)?;
                progress.step += 1;
                epoch_loss += result.loss;
                n_batches += 1;
            }
            if !params.is_finite() {
                let e = Error::NonFinite(format!("parameters after epoch {epoch}"));
                self.dump_nonfinite(&e, epoch, progress.step);
                return Err(e);
            }
            let val_ami = evaluate_ami(&self.model, &params, val, cfg.hdbscan)?;
            let record = LogRecord {
                epoch,
                step: progress.step,
                train_loss: epoch_loss / n_batches as f64,
                val_ami,
                wall_time: offset + start.elapsed().as_secs_f64(),
            };
            if self.verbose {
                eprintln!(
                    "epoch {epoch:>3}  step {:>6}  loss {:.5}  val AMI {:.4}  {:.1}s",
                    record.step, record.train_loss, record.val_ami, record.wall_time
                );
            }
            if let Some(p) = &log_path {
                let mut f = std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(p)
                    .map_err(|e| Error::io(p, e))?;
                writeln!(f, "{}", serde_json::to_string(&record).expect("serialisable"))
                    .map_err(|e| Error::io(p, e))?;
            }
            progress.log.push(record);
            progress.epoch = epoch;
            if val_ami > progress.best_val_ami || best.is_none() {
                progress.best_val_ami = val_ami;
                progress.best_epoch = epoch;
                let ck = self.checkpoint(&params, None, &progress);
                if let Some(dir) = &self.out_dir {
                    ck.save(&dir.join("best.ckpt"))?;
                }
                best = Some(ck);
            }
            if let Some(dir) = &self.out_dir {
                self.checkpoint(&params, Some(&adam), &progress)
                    .save(&dir.join("last.ckpt"))?;
            }
        }
        let last = self.checkpoint(&params, Some(&adam), &progress);
        let best = best.unwrap_or_else(|| last.clone());
        Ok(TrainOutcome {
            best,
            last,
            best_val_ami: progress.best_val_ami,
            log: progress.log,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GruConfig, TransformerConfig};
    use crate::simulator::{generate_trains, ScenarioConfig};

    fn data(n: usize, seed: u64) -> Vec<LabelledTrain> {
        let cfg = ScenarioConfig {
            n_trains: n,
            n_pulses_per_train: 40,
            rng_seed: seed,
            emitter_count_range: crate::simulator::IntRange::new(2, 3),
            ..ScenarioConfig::desk()
        };
        prepare(&generate_trains(&cfg, "t").unwrap()).unwrap()
    }

    fn tiny() -> ModelConfig {
        ModelConfig::Transformer(TransformerConfig {
            n_layers: 1,
            d_model: 8,
            d_ff: 16,
            ..TransformerConfig::desk()
        })
    }

    #[test]
    fn identity_cannot_be_trained() {
        let d = data(2, 1);
        let err = Trainer::new(ModelConfig::Identity, TrainConfig::desk())
            .run(&d, &d, None)
            .unwrap_err();
        assert!(err.to_string().contains("identity model has no parameters"));
    }

    #[test]
    fn single_emitter_train_adds_nothing() {
        let model = tiny();
        let params = init_params(&model, 0);
        let d = data(2, 2);
        let mut lone = d[0].clone();
        lone.labels = LabelVector::new(vec![0; lone.labels.len()]);
        let loss = TripletLossConfig::default();
        let r = batch_gradients(&model, &params, &[&lone], &loss, None).unwrap();
        assert_eq!(r.loss, 0.0);
        assert!(r.grads.iter().all(|(_, g)| g.data().iter().all(|&x| x == 0.0)));
        let pooled = TripletLossConfig {
            reduction: Reduction::Pooled,
            ..loss
        };
        let with = batch_gradients(&model, &params, &[&d[1], &lone], &pooled, None).unwrap();
        let without = batch_gradients(&model, &params, &[&d[1]], &pooled, None).unwrap();
        assert!((with.loss - without.loss).abs() < 1e-9);
    }

    #[test]
    fn resume_continues_identically() {
        let (train, val) = (data(6, 3), data(2, 4));
        let dir = tempfile::tempdir().unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 3,
            ..TrainConfig::desk()
        };
        let full = Trainer::new(tiny(), cfg.clone()).run(&train, &val, None).unwrap();
        let one = Trainer::new(
            tiny(),
            TrainConfig {
                epochs: 1,
                ..cfg.clone()
            },
        )
        .with_out_dir(dir.path())
        .run(&train, &val, None)
        .unwrap();
        assert_eq!(one.log.len(), 1);
        let last = Checkpoint::load(&dir.path().join("last.ckpt")).unwrap();
        let resumed = Trainer::new(tiny(), cfg)
            .with_out_dir(dir.path())
            .run(&train, &val, Some(&last))
            .unwrap();
        assert_eq!(resumed.log.iter().map(|r| r.epoch).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(resumed.log[1].train_loss, full.log[1].train_loss);
        assert_eq!(resumed.last.params, full.last.params);
        let lines = std::fs::read_to_string(dir.path().join("train_log.jsonl")).unwrap();
        assert_eq!(lines.lines().count(), 2);
    }

    #[test]
    fn gru_training_reduces_loss() {
        let (train, val) = (data(8, 5), data(2, 6));
        let model = ModelConfig::Gru(GruConfig {
            n_layers: 1,
            hidden: 8,
            ..GruConfig::desk()
        });
        let cfg = TrainConfig {
            epochs: 6,
            batch_size: 4,
            learning_rate: 1e-2,
            ..TrainConfig::desk()
        };
        let out = Trainer::new(model, cfg).run(&train, &val, None).unwrap();
        assert!(out.log.last().unwrap().train_loss < out.log[0].train_loss);
        assert!(out.best_val_ami.is_finite());
    }
}

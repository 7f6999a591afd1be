use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_emitter_pulses, sample_emitter, EmitterSpec, FreqMode, ScenarioConfig};
use crate::pdw::{DatasetWriter, LabelVector, PulseTrain};
use crate::{Error, Result};

const MAX_ATTEMPTS: usize = 100;
const MAX_DOUBLINGS: usize = 12;
/// Trains generated in parallel before being written.
const CHUNK: usize = 512;

/// RNG stream for train `index`; independent of every other index.
pub fn train_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn train_id(split: &str, seed: u64, index: usize) -> String {
    format!("{split}-{seed:016x}-{index:06}")
}

/// A train with exactly `n_pulses_per_train` pulses in which every sampled
/// emitter appears. Emitter `e` gets label `e`.
pub fn generate_train<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    train_id: impl Into<String>,
    rng: &mut R,
) -> Result<PulseTrain> {
    generate_with_specs(config, train_id.into(), rng).map(|(t, _)| t)
}

fn generate_with_specs<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    train_id: String,
    rng: &mut R,
) -> Result<(PulseTrain, Vec<EmitterSpec>)> {
    config.validate()?;
    let n = config.n_pulses_per_train;
    for _ in 0..MAX_ATTEMPTS {
        let k = config.emitter_count_range.sample(rng);
        let specs = (0..k)
            .map(|_| sample_emitter(config, rng))
            .collect::<Result<Vec<_>>>()?;
        let rate: f64 = specs.iter().map(EmitterSpec::pulse_rate).sum();
        let offset = specs.iter().map(|s| s.toa_offset).fold(0.0, f64::max);
        let mut t_end = offset + 1.5 * n as f64 / rate;
        let mut merged = Vec::new();
        for _ in 0..MAX_DOUBLINGS {
            merged.clear();
            for (e, spec) in specs.iter().enumerate() {
                merged.extend(
                    generate_emitter_pulses(spec, t_end, rng)
                        .into_iter()
                        .map(|p| (p, e as i64)),
                );
            }
            if merged.len() >= n {
                break;
            }
            t_end *= 2.0;
        }
        if merged.len() < n {
            continue;
        }
        merged.sort_by(|a, b| a.0.toa.total_cmp(&b.0.toa).then(a.1.cmp(&b.1)));
        merged.truncate(n);
        let mut present = vec![false; k];
        for (_, e) in &merged {
            present[*e as usize] = true;
        }
        if present.iter().all(|&p| p) {
            let (pulses, labels): (Vec<_>, Vec<_>) = merged.into_iter().unzip();
            let train = PulseTrain::new(train_id, pulses, Some(LabelVector::new(labels)))?;
            return Ok((train, specs));
        }
    }
    Err(Error::Config(format!(
        "no train of {n} pulses with every emitter present after {MAX_ATTEMPTS} attempts"
    )))
}

/// `config.n_trains` trains, in index order, generated in parallel.
pub fn generate_trains(config: &ScenarioConfig, split: &str) -> Result<Vec<PulseTrain>> {
    Ok(generate_range(config, split, 0..config.n_trains)?
        .into_iter()
        .map(|(t, _)| t)
        .collect())
}

fn generate_range(
    config: &ScenarioConfig,
    split: &str,
    range: std::ops::Range<usize>,
) -> Result<Vec<(PulseTrain, Vec<EmitterSpec>)>> {
    range
        .into_par_iter()
        .map(|i| {
            let mut rng = train_rng(config.rng_seed, i as u64);
            generate_with_specs(config, train_id(split, config.rng_seed, i), &mut rng)
        })
        .collect()
}

/// Configuration echo and summary statistics written beside a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub split: String,
    pub n_trains: usize,
    pub n_pulses_per_train: usize,
    pub emitter_count_histogram: BTreeMap<usize, usize>,
    pub pri_mode_counts: BTreeMap<String, usize>,
    pub hopping_emitters: usize,
    pub total_emitters: usize,
    pub smallest_emitter_pulses: usize,
    pub mean_emitter_pulses: f64,
    pub config: ScenarioConfig,
}

/// `data.jsonl` -> `data.manifest.json`.
pub fn manifest_path(dataset: &Path) -> PathBuf {
    dataset.with_extension("manifest.json")
}

/// Writes `config.n_trains` trains to `path` and the manifest beside it.
pub fn generate_dataset(config: &ScenarioConfig, split: &str, path: &Path) -> Result<DatasetManifest> {
    config.validate()?;
    let mut writer = DatasetWriter::create(path)?;
    let mut manifest = DatasetManifest {
        split: split.to_string(),
        n_trains: config.n_trains,
        n_pulses_per_train: config.n_pulses_per_train,
        emitter_count_histogram: BTreeMap::new(),
        pri_mode_counts: BTreeMap::new(),
        hopping_emitters: 0,
        total_emitters: 0,
        smallest_emitter_pulses: usize::MAX,
        mean_emitter_pulses: 0.0,
        config: config.clone(),
    };
    let mut start = 0;
    while start < config.n_trains {
        let end = (start + CHUNK).min(config.n_trains);
        for (train, specs) in generate_range(config, split, start..end)? {
            writer.write(&train)?;
            *manifest.emitter_count_histogram.entry(specs.len()).or_default() += 1;
            for s in &specs {
                *manifest
                    .pri_mode_counts
                    .entry(s.pri_mode.name().to_string())
                    .or_default() += 1;
                manifest.hopping_emitters += usize::from(s.freq_mode == FreqMode::Hopping);
            }
            manifest.total_emitters += specs.len();
            let mut counts = vec![0usize; specs.len()];
            for &l in train.labels().expect("generated trains are labelled").as_slice() {
                counts[l as usize] += 1;
            }
            manifest.smallest_emitter_pulses = manifest
                .smallest_emitter_pulses
                .min(counts.into_iter().min().unwrap_or(0));
        }
        start = end;
    }
    writer.finish()?;
    if manifest.total_emitters > 0 {
        manifest.mean_emitter_pulses =
            (config.n_trains * config.n_pulses_per_train) as f64 / manifest.total_emitters as f64;
    } else {
        manifest.smallest_emitter_pulses = 0;
    }
    let mpath = manifest_path(path);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest is serialisable");
    std::fs::write(&mpath, json).map_err(|e| Error::io(&mpath, e))?;
    Ok(manifest)
}

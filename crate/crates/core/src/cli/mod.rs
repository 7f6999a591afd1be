//! The `generate` / `train` / `evaluate` / `sweep` harness.
//!
//! Every command reads an optional run configuration (`--config`, the desk
//! profile otherwise), applies its flags on top, and writes a `manifest.json`
//! with the effective configuration into its output directory. Exit codes:
//! 0 on success, 2 for usage and configuration errors, 1 for runtime
//! failures. `DEINTERLEAVE_THREADS` caps the worker thread count.

pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use config::{RunConfig, SplitSizes, SPLITS};
pub use report::{EvaluationReport, SweepRow, REPORT_FILES};

use crate::clustering::HdbscanConfig;
use crate::models::{Checkpoint, ModelConfig, ParameterStore};
use crate::pdw::read_dataset_all;
use crate::simulator::{generate_dataset, IntRange};
use crate::training::{prepare, LabelledTrain, Trainer};
use crate::{Error, Result};

pub const THREADS_ENV: &str = "DEINTERLEAVE_THREADS";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(
    name = "deinterleave",
    version,
    about = "Radar pulse deinterleaving by metric learning and HDBSCAN"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate labelled train, validation and test datasets.
    Generate(GenerateArgs),
    /// Train an embedding model with the triplet loss.
    Train(TrainArgs),
    /// Embed, cluster and score a labelled dataset.
    Evaluate(EvaluateArgs),
    /// Evaluate across a grid of HDBSCAN minimum cluster sizes.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Run configuration (TOML); the built-in desk profile when absent.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the command's seed: simulation, training or bootstrap.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of training trains.
    #[arg(long)]
    pub n_trains: Option<usize>,
    /// Number of validation trains.
    #[arg(long)]
    pub n_val: Option<usize>,
    /// Number of test trains.
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Also draw one-emitter trains (for inference-only sets).
    #[arg(long)]
    pub allow_single_emitter: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// transformer, gru or identity.
    #[arg(long, default_value = "transformer")]
    pub model: String,
    /// Directory holding train.jsonl and val.jsonl.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub margin: Option<f64>,
    /// Continue from `--checkpoint`, or from `last.ckpt` in the output directory.
    #[arg(long)]
    pub resume: bool,
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// No per-epoch progress lines.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// transformer, gru or identity; taken from the checkpoint when absent.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// A dataset file, or a directory holding test.jsonl.
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Fixed HDBSCAN minimum cluster size instead of the length-scaled one.
    #[arg(long)]
    pub min_cluster_size: Option<usize>,
    #[arg(long)]
    pub min_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated minimum cluster sizes.
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true, required = true)]
    pub grid: Vec<i64>,
    /// Fixed min_samples; each grid value is used when absent.
    #[arg(long)]
    pub min_samples: Option<usize>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Like [`main_with_args`] but returns the error instead of printing it.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Usage(e.to_string()))?;
    execute(&cli.command)
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) | Error::Config(_) => 2,
        _ => 1,
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Usage(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    // A pool set up earlier in the process wins; that is not an error.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    match &common.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::desk()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Output written into a staging sibling and renamed into place on success,
/// so a failed run never leaves a half-written new directory. An existing
/// directory is written in place.
struct Staged {
    target: PathBuf,
    work: PathBuf,
}

impl Staged {
    fn begin(target: &Path) -> Result<Self> {
        if target.is_dir() {
            return Ok(Self {
                target: target.to_path_buf(),
                work: target.to_path_buf(),
            });
        }
        let name = target
            .file_name()
            .ok_or_else(|| Error::Usage(format!("invalid output directory {}", target.display())))?
            .to_string_lossy();
        let work = target.with_file_name(format!(".{name}.partial-{}", std::process::id()));
        if work.exists() {
            std::fs::remove_dir_all(&work).map_err(|e| Error::io(&work, e))?;
        }
        create_dir(&work)?;
        Ok(Self {
            target: target.to_path_buf(),
            work,
        })
    }

    fn finish<T>(self, result: Result<T>) -> Result<T> {
        if self.work == self.target {
            return result;
        }
        match result {
            Ok(v) => {
                std::fs::rename(&self.work, &self.target).map_err(|e| Error::io(&self.target, e))?;
                Ok(v)
            }
            Err(e) => {
                let _ = std::fs::remove_dir_all(&self.work);
                Err(e)
            }
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a, E: Serialize> {
    command: &'a str,
    version: &'a str,
    config: &'a RunConfig,
    inputs: Vec<String>,
    outputs: Vec<String>,
    #[serde(flatten)]
    extra: E,
}

fn write_manifest<E: Serialize>(
    dir: &Path,
    command: &str,
    config: &RunConfig,
    inputs: &[&Path],
    outputs: &[PathBuf],
    extra: E,
) -> Result<()> {
    let rel = |p: &Path| {
        p.file_name()
            .map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
    };
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: outputs.iter().map(|p| rel(p)).collect(),
        extra,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest is serialisable");
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

fn dataset_file(split: &str) -> String {
    format!("{split}.jsonl")
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(seed) = args.common.seed {
        cfg.scenario.rng_seed = seed;
    }
    for (n, slot) in [
        (args.n_trains, &mut cfg.splits.train),
        (args.n_val, &mut cfg.splits.val),
        (args.n_test, &mut cfg.splits.test),
    ] {
        if let Some(n) = n {
            if n == 0 {
                return Err(Error::Usage("train counts must be positive".into()));
            }
            *slot = n;
        }
    }
    if args.allow_single_emitter {
        cfg.scenario.allow_single_emitter = true;
        cfg.scenario.emitter_count_range = IntRange::new(1, cfg.scenario.emitter_count_range.hi);
    }
    cfg.validate()?;

    let staged = Staged::begin(&args.common.out)?;
    let work = staged.work.clone();
    let result = (|| {
        let mut outputs = Vec::new();
        let mut splits = Vec::new();
        for split in SPLITS {
            let t0 = Instant::now();
            let path = work.join(dataset_file(split));
            let m = generate_dataset(&cfg.scenario_for(split)?, split, &path)?;
            eprintln!("{split}: {} trains in {:.1}s", m.n_trains, t0.elapsed().as_secs_f64());
            outputs.push(path.clone());
            outputs.push(crate::simulator::manifest_path(&path));
            splits.push(m);
        }
        write_manifest(
            &work,
            "generate",
            &cfg,
            &[],
            &outputs,
            serde_json::json!({ "splits": splits }),
        )
    })();
    staged.finish(result)
}

fn load_labelled(path: &Path) -> Result<Vec<LabelledTrain>> {
    prepare(&read_dataset_all(path)?)
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    let model = cfg.model(&args.model)?;
    if !model.is_trainable() {
        return Err(Error::Usage("identity model has no parameters".into()));
    }
    let t = &mut cfg.training;
    if let Some(seed) = args.common.seed {
        t.seed = seed;
    }
    if let Some(lr) = args.lr {
        t.learning_rate = lr;
    }
    if let Some(b) = args.batch_size {
        t.batch_size = b;
    }
    if let Some(e) = args.epochs {
        t.epochs = e;
    }
    if let Some(m) = args.margin {
        t.loss.margin = m;
    }
    cfg.validate()?;

    let train_path = args.data.join(dataset_file("train"));
    let val_path = args.data.join(dataset_file("val"));
    let train = load_labelled(&train_path)?;
    let val = load_labelled(&val_path)?;
    let out = &args.common.out;
    create_dir(out)?;
    let resume = if args.resume {
        let path = args.checkpoint.clone().unwrap_or_else(|| out.join("last.ckpt"));
        Some(Checkpoint::load(&path)?)
    } else {
        None
    };
    let outcome = Trainer::new(model.clone(), cfg.train_config())
        .with_out_dir(out)
        .verbose(!args.quiet)
        .run(&train, &val, resume.as_ref())?;
    let outputs = ["best.ckpt", "last.ckpt", "train_log.jsonl"].map(|f| out.join(f));
    write_manifest(
        out,
        "train",
        &cfg,
        &[&train_path, &val_path],
        &outputs,
        serde_json::json!({
            "model": model.name(),
            "parameter_count": model.parameter_count(),
            "best_val_ami": outcome.best_val_ami,
            "epochs_completed": outcome.log.last().map_or(0, |r| r.epoch),
            "resumed": args.resume,
        }),
    )?;
    eprintln!("best validation AMI {:.4}", outcome.best_val_ami);
    Ok(())
}

/// The model, its parameters and the labelled evaluation set.
struct Loaded {
    model: ModelConfig,
    params: ParameterStore<f32>,
    data: Vec<LabelledTrain>,
    data_path: PathBuf,
}

fn load_model(cfg: &RunConfig, explicit_config: bool, args: &ModelArgs) -> Result<Loaded> {
    let checkpoint = args.checkpoint.as_deref().map(Checkpoint::load).transpose()?;
    let (model, params) = match (&args.model, checkpoint) {
        (Some(name), _) if name == "identity" => {
            if args.checkpoint.is_some() {
                return Err(Error::Usage("the identity model takes no checkpoint".into()));
            }
            (ModelConfig::Identity, ParameterStore::new())
        }
        (Some(name), Some(ck)) => {
            let model = cfg.model(name)?;
            ck.ensure_model(&model)?;
            (model, ck.params)
        }
        (None, Some(ck)) => {
            let model = ck.manifest.model.clone();
            if explicit_config {
                ck.ensure_model(&cfg.model(model.name())?)?;
            }
            (model, ck.params)
        }
        (Some(name), None) => {
            cfg.model(name)?;
            return Err(Error::Usage(format!("model {name} needs --checkpoint")));
        }
        (None, None) => return Err(Error::Usage("give --checkpoint or --model identity".into())),
    };
    let data_path = if args.data.is_dir() {
        args.data.join(dataset_file("test"))
    } else {
        args.data.clone()
    };
    let data = load_labelled(&data_path)?;
    if data.is_empty() {
        return Err(Error::Validation(format!("{} holds no trains", data_path.display())));
    }
    Ok(Loaded {
        model,
        params,
        data,
        data_path,
    })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(seed) = args.common.seed {
        cfg.evaluate.bootstrap_seed = seed;
    }
    match (args.min_cluster_size, args.min_samples) {
        (Some(m), s) => {
            let mut h = HdbscanConfig::new(m);
            h.min_samples = s;
            cfg.hdbscan = Some(h);
        }
        (None, Some(_)) => return Err(Error::Usage("--min-samples needs --min-cluster-size".into())),
        (None, None) => {}
    }
    cfg.validate()?;
    let loaded = load_model(&cfg, args.common.config.is_some(), &args.model)?;

    let t0 = Instant::now();
    let embeddings = report::embed_all(&loaded.model, &loaded.params, &loaded.data)?;
    let preds = report::cluster_all(&embeddings, cfg.hdbscan)?;
    let rep = EvaluationReport::build(loaded.model.name(), &loaded.data, &preds, cfg.hdbscan, &cfg.evaluate)?;

    let staged = Staged::begin(&args.common.out)?;
    let work = staged.work.clone();
    let result = (|| {
        let outputs = rep.write(&work)?;
        let inputs: Vec<&Path> = std::iter::once(loaded.data_path.as_path())
            .chain(args.model.checkpoint.as_deref())
            .collect();
        write_manifest(
            &work,
            "evaluate",
            &cfg,
            &inputs,
            &outputs,
            serde_json::json!({ "model": loaded.model }),
        )
    })();
    staged.finish(result)?;
    let m = &rep.metrics;
    eprintln!(
        "{}: {} trains, AMI {:.4}, ARI {:.4}, V {:.4}, cluster-count RMSE {:.3} ({:.1}s)",
        m.model,
        m.n_trains,
        m.mean.ami,
        m.mean.ari,
        m.mean.v_measure,
        m.cluster_count_rmse,
        t0.elapsed().as_secs_f64()
    );
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    if args.grid.is_empty() {
        return Err(Error::Usage("the grid is empty".into()));
    }
    if let Some(&bad) = args.grid.iter().find(|&&v| v <= 0) {
        return Err(Error::Usage(format!("grid values must be positive, got {bad}")));
    }
    let mut cfg = load_config(&args.common)?;
    if let Some(seed) = args.common.seed {
        cfg.evaluate.bootstrap_seed = seed;
    }
    let grid: Vec<HdbscanConfig> = args
        .grid
        .iter()
        .map(|&v| HdbscanConfig {
            min_cluster_size: v as usize,
            min_samples: args.min_samples,
        })
        .collect();
    for h in &grid {
        h.validate()?;
    }
    cfg.validate()?;
    let loaded = load_model(&cfg, args.common.config.is_some(), &args.model)?;
    let embeddings = report::embed_all(&loaded.model, &loaded.params, &loaded.data)?;
    let mut rows = Vec::with_capacity(grid.len());
    for h in &grid {
        let preds = report::cluster_all(&embeddings, Some(*h))?;
        let rep = EvaluationReport::build(loaded.model.name(), &loaded.data, &preds, Some(*h), &cfg.evaluate)?;
        eprintln!(
            "min_cluster_size {:>3}: AMI {:.4}",
            h.min_cluster_size, rep.metrics.mean.ami
        );
        rows.push(SweepRow::new(h, &rep.metrics));
    }

    let staged = Staged::begin(&args.common.out)?;
    let work = staged.work.clone();
    let result = (|| {
        let csv = report::write_csv(&work.join(report::SWEEP_FILE), &rows)?;
        let inputs: Vec<&Path> = std::iter::once(loaded.data_path.as_path())
            .chain(args.model.checkpoint.as_deref())
            .collect();
        write_manifest(
            &work,
            "sweep",
            &cfg,
            &inputs,
            &[csv],
            serde_json::json!({ "model": loaded.model, "grid": args.grid }),
        )
    })();
    staged.finish(result)
}

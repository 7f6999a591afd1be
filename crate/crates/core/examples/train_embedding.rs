//! Trains a small transformer with the batch-all triplet loss for a few
//! epochs and compares it with the identity baseline on held-out trains.

use deinterleave::models::{ModelConfig, ParameterStore, TransformerConfig};
use deinterleave::simulator::{generate_trains, ScenarioConfig};
use deinterleave::training::{evaluate_ami, prepare, TrainConfig, Trainer};

fn split(seed: u64, n: usize) -> deinterleave::Result<Vec<deinterleave::training::LabelledTrain>> {
    let cfg = ScenarioConfig {
        n_trains: n,
        rng_seed: seed,
        ..ScenarioConfig::desk()
    };
    prepare(&generate_trains(&cfg, "example")?)
}

fn main() -> deinterleave::Result<()> {
    let (train, val, test) = (split(1, 200)?, split(2, 40)?, split(3, 40)?);
    let model = ModelConfig::Transformer(TransformerConfig::desk());
    let config = TrainConfig {
        epochs: 3,
        ..TrainConfig::desk()
    };
    let outcome = Trainer::new(model.clone(), config)
        .verbose(true)
        .run(&train, &val, None)?;
    let trained = evaluate_ami(&model, &outcome.best.params, &test, None)?;
    let identity = evaluate_ami(&ModelConfig::Identity, &ParameterStore::new(), &test, None)?;
    println!("test AMI: transformer {trained:.4}, identity {identity:.4}");
    Ok(())
}

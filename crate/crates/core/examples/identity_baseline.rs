//! Clusters normalized raw PDWs: the untrained baseline.

use deinterleave::clustering::HdbscanConfig;
use deinterleave::models::{ModelConfig, ParameterStore};
use deinterleave::simulator::{generate_trains, ScenarioConfig};
use deinterleave::training::{evaluate_ami, prepare};

fn main() -> deinterleave::Result<()> {
    let cfg = ScenarioConfig {
        n_trains: 100,
        rng_seed: 3,
        ..ScenarioConfig::desk()
    };
    let data = prepare(&generate_trains(&cfg, "test")?)?;
    let none = ParameterStore::new();
    let scaled = evaluate_ami(&ModelConfig::Identity, &none, &data, None)?;
    println!("identity mean AMI, length-scaled HDBSCAN: {scaled:.4}");
    for m in [3, 10, 20] {
        let ami = evaluate_ami(&ModelConfig::Identity, &none, &data, Some(HdbscanConfig::new(m)))?;
        println!("identity mean AMI, min_cluster_size {m:>2}: {ami:.4}");
    }
    Ok(())
}

//! Simulates a few desk-scale pulse trains and writes them as JSONL.

use deinterleave::pdw::write_dataset;
use deinterleave::simulator::{generate_trains, ScenarioConfig};

fn main() -> deinterleave::Result<()> {
    let cfg = ScenarioConfig {
        n_trains: 5,
        ..ScenarioConfig::desk()
    };
    let trains = generate_trains(&cfg, "example")?;
    for t in &trains {
        let first = t.pulses()[0];
        println!(
            "{}: {} pulses, {} emitters, first pulse at {:.3e} s, {:.4} GHz, AoA {:.1} deg",
            t.train_id,
            t.len(),
            t.n_emitters().unwrap_or(0),
            first.toa,
            first.frequency / 1e9,
            first.aoa
        );
    }
    let path = std::env::temp_dir().join("deinterleave-example-trains.jsonl");
    write_dataset(&trains, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

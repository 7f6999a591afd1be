//! Saves freshly initialised GRU parameters and loads them back.

use deinterleave::models::{init_params, Checkpoint, CheckpointManifest, GruConfig, ModelConfig};

fn main() -> deinterleave::Result<()> {
    let model = ModelConfig::Gru(GruConfig::desk());
    let params = init_params(&model, 7);
    let ckpt = Checkpoint::new(CheckpointManifest::new(model.clone(), 7), params);
    let path = std::env::temp_dir().join("deinterleave-example.ckpt");
    ckpt.save(&path)?;
    let back = Checkpoint::load(&path)?;
    back.ensure_model(&model)?;
    println!(
        "{}: {} tensors, {} parameters, identical after reload: {}",
        path.display(),
        back.params.len(),
        back.params.n_scalars(),
        back.params == ckpt.params
    );
    Ok(())
}

//! Synthetic interleaved pulse trains.
//!
//! Each emitter follows one PRI process (constant, jittered, staggered or
//! sliding) and either a fixed or a hopping carrier. A train draws between
//! `emitter_count_range[0]` and `emitter_count_range[1]` emitters, merges
//! their pulses by time of arrival and keeps the first `n_pulses_per_train`.
//!
//! Generation is deterministic: train `i` of a dataset uses its own RNG
//! stream derived from `(rng_seed, i)`, so serial and parallel runs write the
//! same bytes.

mod config;
mod emitter;
mod generate;

pub use config::{FloatRange, IntRange, PriModeWeights, ScenarioConfig, SCENARIO_SCHEMA_VERSION};
pub use emitter::{generate_emitter_pulses, sample_emitter, EmitterSpec, FreqMode, PriMode};
pub use generate::{
    generate_dataset, generate_train, generate_trains, manifest_path, train_id, train_rng, DatasetManifest,
};

//! Radar pulse deinterleaving toolkit.
//!
//! A received pulse train mixes pulses from an unknown number of emitters.
//! This crate partitions such trains by emitter with a metric-learning
//! pipeline: every pulse descriptor word (PDW) is embedded in the context of
//! its train by a sequence-to-sequence model trained with a batch-all triplet
//! loss, and the embeddings are grouped with HDBSCAN.
//!
//! Modules, bottom-up:
//!
//! * [`pdw`]: domain types, per-train normalization, label/partition
//!   conversion and the JSON-lines dataset format.
//! * [`simulator`]: synthetic interleaved pulse trains with agile emitters.
//! * [`metrics`]: AMI, ARI, V-measure and the evaluation statistics.
//! * [`numerics`]: a small reverse-mode automatic differentiation tape.
//! * [`models`]: transformer, GRU and identity embedding models.
//! * [`training`]: triplet mining, the batch-all loss, Adam, the train loop.
//! * [`clustering`]: HDBSCAN over embeddings.
//! * [`cli`]: the `generate` / `train` / `evaluate` / `sweep` harness.

// `!(x > 0.0)` is how validation rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod clustering;
pub mod error;
pub mod metrics;
pub mod models;
pub mod numerics;
pub mod pdw;
pub mod simulator;
pub mod training;

pub use error::{Error, Result};

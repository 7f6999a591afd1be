//! Metric learning with the batch-all triplet loss.
//!
//! Triplets are mined inside one train only. A batch's loss is the mean of
//! its per-train losses ([`Reduction::PerTrain`]) or the mean over every
//! triplet of the batch ([`Reduction::Pooled`]). After each epoch the model
//! is scored by mean validation AMI of the HDBSCAN partition, and the best
//! scoring parameters are kept.

mod adam;
mod loss;
mod trainer;

pub use adam::{Adam, AdamConfig};
pub use loss::{
    batch_all_triplet_loss, mine_batch_all, pairwise_distances, triplet_hinge, triplet_loss_value, Mining, Reduction,
    TripletLossConfig, DISTANCE_EPS,
};
pub use trainer::{
    batch_gradients, evaluate_ami, predict, prepare, BatchResult, LabelledTrain, LogRecord, TrainConfig, TrainOutcome,
    Trainer,
};

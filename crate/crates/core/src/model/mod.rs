//! The multi-source adaptation network, its training step and checkpoints.

mod checkpoint;
mod config;
mod network;

pub use checkpoint::MAGIC as CHECKPOINT_MAGIC;
pub use config::{BetaMode, ModelConfig, StepWeights, TrainConfig};
pub use network::{argmax_rows, Branch, LabeledBatch, MsMdaModel, Prediction, StepOutput};

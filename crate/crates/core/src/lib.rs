//! Multi-source marginal distribution adaptation (MS-MDA) for
//! differential-entropy EEG features.
//!
//! - [`neuralcore`]: dense matrices, layers, Adam and gradient checking
//! - [`losses`]: MMD, classification, discrepancy and the adaptation schedule
//! - [`model`]: the multi-branch network, training step and checkpoints
//! - [`data`]: CSV ingestion, normalization, transfer folds, synthetic domains
//! - [`harness`]: experiment runner, ablations, feature dumps, self-checks

pub mod data;
pub mod error;
pub mod harness;
pub mod losses;
pub mod model;
pub mod neuralcore;
pub mod oracle;

pub use error::{Error, Result};

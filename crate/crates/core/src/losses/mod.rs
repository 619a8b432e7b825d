//! Adaptation, classification and discrepancy losses plus the weight schedule.

mod branch;
mod kernel;
mod mmd;
mod schedule;

pub use branch::{classification_loss, discrepancy_loss};
pub use kernel::{median_pairwise_sq_distance, multiscale_bandwidths, KernelSpec, ResolvedKernel};
pub use mmd::{mmd_squared, mmd_squared_resolved, MmdOutput};
pub use schedule::{alpha_schedule, total_loss, LossBreakdown};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{alpha_schedule, KernelSpec};
use crate::neuralcore::{validate_slope, AdamConfig, DEFAULT_LEAKY_SLOPE};

/// Network dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    /// Output widths of the common extractor layers; the last one feeds every branch.
    pub cfe_dims: Vec<usize>,
    pub dsfe_dim: usize,
    pub num_classes: usize,
    pub num_branches: usize,
    pub leaky_slope: f64,
    pub rng_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_dim: 310,
            cfe_dims: vec![256, 128, 64],
            dsfe_dim: 32,
            num_classes: 3,
            num_branches: 1,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            rng_seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::validation("input_dim must be >= 1"));
        }
        if self.cfe_dims.is_empty() || self.cfe_dims.contains(&0) {
            return Err(Error::validation("cfe_dims must be nonempty and positive"));
        }
        if self.dsfe_dim == 0 {
            return Err(Error::validation("dsfe_dim must be >= 1"));
        }
        if self.num_classes < 2 {
            return Err(Error::validation("num_classes must be >= 2"));
        }
        if self.num_branches == 0 {
            return Err(Error::validation("num_branches must be >= 1"));
        }
        validate_slope(self.leaky_slope)
    }

    /// Width of the common features fed to each branch.
    pub fn common_dim(&self) -> usize {
        *self.cfe_dims.last().expect("validated cfe_dims")
    }
}

/// How the discrepancy weight relates to the adaptation weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    /// `β = beta_weight · α(epoch)`.
    #[default]
    Relative,
    /// `β = beta_weight`.
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta_weight: f64,
    pub beta_mode: BetaMode,
    /// Fraction of training after which the discrepancy loss is switched on.
    pub disc_start_fraction: f64,
    pub ablate_mmd: bool,
    pub ablate_disc: bool,
    /// `None` means `ceil(largest source size / batch_size)`.
    pub iterations_per_epoch: Option<usize>,
    pub kernel: KernelSpec,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            epochs: 200,
            batch_size: 256,
            lr: adam.lr,
            beta_weight: 0.01,
            beta_mode: BetaMode::Relative,
            disc_start_fraction: 0.0,
            ablate_mmd: false,
            ablate_disc: false,
            iterations_per_epoch: None,
            kernel: KernelSpec::default(),
            adam_beta1: adam.beta1,
            adam_beta2: adam.beta2,
            adam_eps: adam.eps,
            rng_seed: 0,
        }
    }
}

/// Loss weights for one step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::validation("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be >= 1"));
        }
        if self.iterations_per_epoch == Some(0) {
            return Err(Error::validation("iterations_per_epoch must be >= 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::validation("lr must be positive"));
        }
        if !(self.beta_weight >= 0.0 && self.beta_weight.is_finite()) {
            return Err(Error::validation("beta weight must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.disc_start_fraction) {
            return Err(Error::validation("disc_start_fraction must lie in [0, 1]"));
        }
        self.kernel.validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn disc_active(&self, epoch: usize) -> bool {
        epoch as f64 >= self.disc_start_fraction * self.epochs as f64
    }

    /// Weights for 0-based `epoch`, after applying the schedule and ablations.
    pub fn weights_for_epoch(&self, epoch: usize) -> Result<StepWeights> {
        let scheduled = alpha_schedule(epoch, self.epochs)?;
        let alpha = if self.ablate_mmd { 0.0 } else { scheduled };
        let beta = if self.ablate_disc || !self.disc_active(epoch) {
            0.0
        } else {
            match self.beta_mode {
                BetaMode::Relative => self.beta_weight * scheduled,
                BetaMode::Absolute => self.beta_weight,
            }
        };
        Ok(StepWeights { alpha, beta })
    }

    pub fn iterations_for(&self, largest_source: usize) -> usize {
        self.iterations_per_epoch
            .unwrap_or_else(|| largest_source.div_ceil(self.batch_size).max(1))
    }
}

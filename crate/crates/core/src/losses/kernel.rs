use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuralcore::Matrix;

/// Kernel used by the MMD estimator.
///
/// All RBF variants use `k(x, y) = exp(-‖x - y‖² / (2σ²))`; the multi-scale
/// kernel averages several of these with `σ²` spread geometrically around the
/// median pairwise squared distance of the joint batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    RbfMultiscale { num_scales: usize, scale_step: f64 },
    RbfFixed { bandwidth: f64 },
    Linear,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::RbfMultiscale {
            num_scales: 5,
            scale_step: 2.0,
        }
    }
}

/// A kernel whose data-dependent bandwidths have been fixed.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedKernel {
    /// Mean of RBF kernels with the given `σ²` values.
    Rbf {
        sigma_sq: Vec<f64>,
    },
    Linear,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::RbfMultiscale {
                num_scales,
                scale_step,
            } => {
                if num_scales == 0 {
                    return Err(Error::validation("kernel num_scales must be >= 1"));
                }
                if !(scale_step > 0.0 && scale_step.is_finite()) {
                    return Err(Error::validation("kernel scale_step must be positive"));
                }
            }
            KernelSpec::RbfFixed { bandwidth } => {
                if !(bandwidth > 0.0 && bandwidth.is_finite()) {
                    return Err(Error::validation("kernel bandwidth must be positive"));
                }
            }
            KernelSpec::Linear => {}
        }
        Ok(())
    }

    /// Fixes bandwidths for the joint batch `source ∪ target`.
    pub fn resolve(&self, source: &Matrix, target: &Matrix) -> Result<ResolvedKernel> {
        self.validate()?;
        Ok(match *self {
            KernelSpec::Linear => ResolvedKernel::Linear,
            KernelSpec::RbfFixed { bandwidth } => ResolvedKernel::Rbf {
                sigma_sq: vec![bandwidth],
            },
            KernelSpec::RbfMultiscale {
                num_scales,
                scale_step,
            } => {
                let median = median_pairwise_sq_distance(source, target);
                ResolvedKernel::Rbf {
                    sigma_sq: multiscale_bandwidths(median, num_scales, scale_step),
                }
            }
        })
    }
}

/// `num_scales` values `base · step^(k − (num_scales − 1)/2)`.
pub fn multiscale_bandwidths(base: f64, num_scales: usize, step: f64) -> Vec<f64> {
    let center = (num_scales as f64 - 1.0) / 2.0;
    (0..num_scales)
        .map(|k| base * step.powf(k as f64 - center))
        .collect()
}

pub(crate) fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median of squared distances over distinct pairs of the joint batch.
/// Falls back to 1 when there are no pairs or every pair coincides.
pub fn median_pairwise_sq_distance(source: &Matrix, target: &Matrix) -> f64 {
    let rows: Vec<&[f64]> = source.iter_rows().chain(target.iter_rows()).collect();
    let mut d = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            d.push(sq_distance(rows[i], rows[j]));
        }
    }
    let median = median_in_place(&mut d);
    match median {
        Some(m) if m > 0.0 && m.is_finite() => m,
        _ => 1.0,
    }
}

pub(crate) fn median_in_place(values: &mut [f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mid = n / 2;
    let (lower, &mut upper_mid, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        Some(upper_mid)
    } else {
        let lower_mid = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(0.5 * (lower_mid + upper_mid))
    }
}

impl ResolvedKernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            ResolvedKernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            ResolvedKernel::Rbf { sigma_sq } => rbf_mixture(sq_distance(a, b), sigma_sq).0,
        }
    }
}

/// Returns `(k, g)` where `k` is the mixture value at squared distance `d2` and
/// `g = Σ_s w·exp(−d2/2σ_s²)/σ_s²`, so that `∂k/∂a = −g·(a − b)`.
#[inline]
pub(crate) fn rbf_mixture(d2: f64, sigma_sq: &[f64]) -> (f64, f64) {
    let w = 1.0 / sigma_sq.len() as f64;
    let mut k = 0.0;
    let mut g = 0.0;
    for &s in sigma_sq {
        let e = (-d2 / (2.0 * s)).exp();
        k += w * e;
        g += w * e / s;
    }
    (k, g)
}

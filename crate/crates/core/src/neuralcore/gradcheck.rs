//! Central finite-difference gradient checking.
//!
//! Relative error is `|a - n| / max(|a|, |n|, abs_floor)`, so entries whose
//! gradients are both tiny are compared in absolute terms against the floor.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Matrix, Parameter, ParameterSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    pub abs_floor: f64,
    /// Check at most this many entries per tensor, chosen with `seed`.
    pub max_entries: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            abs_floor: 1e-6,
            max_entries: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckEntry {
    pub tensor: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    /// Worst entries, largest error first.
    pub worst: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }

    pub fn ensure(&self, what: &str) -> Result<()> {
        if self.passed() {
            return Ok(());
        }
        let listing: Vec<String> = self
            .worst
            .iter()
            .filter(|e| e.rel_error >= self.tolerance)
            .map(|e| {
                format!(
                    "tensor {} entry {}: analytic {:.6e} numeric {:.6e} rel {:.3e}",
                    e.tensor, e.index, e.analytic, e.numeric, e.rel_error
                )
            })
            .collect();
        Err(Error::validation(format!(
            "{what}: gradient check failed (max rel error {:.3e} >= {:.1e}); {}",
            self.max_rel_error,
            self.tolerance,
            listing.join("; ")
        )))
    }

    fn merge(mut self, other: GradCheckReport) -> GradCheckReport {
        self.checked += other.checked;
        self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
        self.worst.extend(other.worst);
        sort_and_truncate(&mut self.worst);
        self
    }
}

const WORST_KEPT: usize = 8;

fn sort_and_truncate(entries: &mut Vec<GradCheckEntry>) {
    entries.sort_by(|a, b| b.rel_error.total_cmp(&a.rel_error));
    entries.truncate(WORST_KEPT);
}

pub fn relative_error(analytic: f64, numeric: f64, abs_floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(abs_floor);
    (analytic - numeric).abs() / denom
}

fn chosen_indices(len: usize, cfg: &GradCheckConfig, tensor: usize) -> Vec<usize> {
    match cfg.max_entries {
        Some(k) if k < len => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(tensor as u64);
            let mut idx = sample(&mut rng, len, k).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..len).collect(),
    }
}

/// Checks `analytic` against central differences of `f` around `x`.
pub fn check_input_gradient(
    x: &Matrix,
    analytic: &Matrix,
    mut f: impl FnMut(&Matrix) -> Result<f64>,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    check_input_gradient_tensor(x, analytic, &mut f, cfg, 0)
}

fn check_input_gradient_tensor(
    x: &Matrix,
    analytic: &Matrix,
    f: &mut dyn FnMut(&Matrix) -> Result<f64>,
    cfg: &GradCheckConfig,
    tensor: usize,
) -> Result<GradCheckReport> {
    if x.shape() != analytic.shape() {
        return Err(Error::Shape {
            op: "gradient check",
            left: x.shape(),
            right: analytic.shape(),
        });
    }
    let mut probe = x.clone();
    let mut entries = Vec::new();
    let mut max_rel: f64 = 0.0;
    let indices = chosen_indices(x.len(), cfg, tensor);
    for &i in &indices {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + cfg.step;
        let plus = f(&probe)?;
        probe.data_mut()[i] = orig - cfg.step;
        let minus = f(&probe)?;
        probe.data_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * cfg.step);
        let a = analytic.data()[i];
        let rel = relative_error(a, numeric, cfg.abs_floor);
        max_rel = max_rel.max(rel);
        entries.push(GradCheckEntry {
            tensor,
            index: i,
            analytic: a,
            numeric,
            rel_error: rel,
        });
    }
    sort_and_truncate(&mut entries);
    Ok(GradCheckReport {
        checked: indices.len(),
        max_rel_error: max_rel,
        tolerance: cfg.tolerance,
        worst: entries,
    })
}

/// Checks several input tensors of one scalar function at once.
pub fn check_inputs_gradient(
    xs: &[Matrix],
    analytic: &[Matrix],
    mut f: impl FnMut(&[Matrix]) -> Result<f64>,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    if xs.len() != analytic.len() {
        return Err(Error::validation("gradient check: tensor count mismatch"));
    }
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        tolerance: cfg.tolerance,
        worst: Vec::new(),
    };
    for t in 0..xs.len() {
        let mut inputs = xs.to_vec();
        let mut g = |probe: &Matrix| {
            inputs[t] = probe.clone();
            f(&inputs)
        };
        let r = check_input_gradient_tensor(&xs[t], &analytic[t], &mut g, cfg, t)?;
        report = report.merge(r);
    }
    Ok(report)
}

fn with_param<M: ParameterSet + ?Sized>(
    model: &mut M,
    target: usize,
    mut f: impl FnMut(&mut Parameter),
) {
    let mut k = 0;
    model.visit_params(&mut |p| {
        if k == target {
            f(p);
        }
        k += 1;
    });
}

/// Checks every parameter gradient of `model`.
///
/// `loss_and_backward` must evaluate the loss and accumulate gradients into the
/// parameters; `loss` must evaluate the same loss without side effects on the
/// parameter values.
pub fn check_parameter_gradients<M: ParameterSet + ?Sized>(
    model: &mut M,
    mut loss_and_backward: impl FnMut(&mut M) -> Result<f64>,
    mut loss: impl FnMut(&mut M) -> Result<f64>,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    model.zero_grads();
    loss_and_backward(model)?;
    let mut analytic = Vec::new();
    model.visit_params(&mut |p| analytic.push(p.grad.clone()));
    model.zero_grads();

    let mut entries = Vec::new();
    let mut checked = 0;
    let mut max_rel: f64 = 0.0;
    for (t, grad) in analytic.iter().enumerate() {
        for i in chosen_indices(grad.len(), cfg, t) {
            let mut orig = 0.0;
            with_param(model, t, |p| {
                orig = p.value.data()[i];
                p.value.data_mut()[i] = orig + cfg.step;
            });
            let plus = loss(model)?;
            with_param(model, t, |p| p.value.data_mut()[i] = orig - cfg.step);
            let minus = loss(model)?;
            with_param(model, t, |p| p.value.data_mut()[i] = orig);
            let numeric = (plus - minus) / (2.0 * cfg.step);
            let a = grad.data()[i];
            let rel = relative_error(a, numeric, cfg.abs_floor);
            max_rel = max_rel.max(rel);
            checked += 1;
            entries.push(GradCheckEntry {
                tensor: t,
                index: i,
                analytic: a,
                numeric,
                rel_error: rel,
            });
            if entries.len() > 4 * WORST_KEPT {
                sort_and_truncate(&mut entries);
            }
        }
    }
    sort_and_truncate(&mut entries);
    Ok(GradCheckReport {
        checked,
        max_rel_error: max_rel,
        tolerance: cfg.tolerance,
        worst: entries,
    })
}

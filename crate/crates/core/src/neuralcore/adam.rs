use serde::{Deserialize, Serialize};

use super::{Parameter, ParameterSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. Zeroes the gradient afterwards.
pub fn adam_step(param: &mut Parameter, cfg: &AdamConfig) {
    param.step_count += 1;
    let t = param.step_count as f64;
    let bc1 = 1.0 - cfg.beta1.powf(t);
    let bc2 = 1.0 - cfg.beta2.powf(t);
    let value = param.value.data_mut();
    let grad = param.grad.data_mut();
    let m = param.adam_m.data_mut();
    let v = param.adam_v.data_mut();
    for i in 0..value.len() {
        let g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        value[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        grad[i] = 0.0;
    }
}

pub fn adam_step_all<P: ParameterSet + ?Sized>(params: &mut P, cfg: &AdamConfig) {
    params.visit_params(&mut |p| adam_step(p, cfg));
}

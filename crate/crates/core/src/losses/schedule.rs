use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adaptation-weight ramp `2 / (1 + exp(−10·i/E)) − 1`.
pub fn alpha_schedule(epoch_index: usize, total_epochs: usize) -> Result<f64> {
    if total_epochs == 0 {
        return Err(Error::validation("alpha schedule needs total_epochs >= 1"));
    }
    if epoch_index > total_epochs {
        return Err(Error::validation(format!(
            "epoch index {epoch_index} exceeds total epochs {total_epochs}"
        )));
    }
    let progress = epoch_index as f64 / total_epochs as f64;
    Ok(2.0 / (1.0 + (-10.0 * progress).exp()) - 1.0)
}

/// Loss components of one step. `cls`, `mmd` and `disc` are unweighted;
/// `alpha` and `beta` are the weights that were applied.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub cls: f64,
    pub mmd: f64,
    pub disc: f64,
    pub total: f64,
    pub alpha: f64,
    pub beta: f64,
}

pub fn total_loss(cls: f64, mmd: f64, disc: f64, alpha: f64, beta: f64) -> Result<LossBreakdown> {
    for (name, v) in [
        ("cls", cls),
        ("mmd", mmd),
        ("disc", disc),
        ("alpha", alpha),
        ("beta", beta),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("{name} loss input is {v}")));
        }
    }
    Ok(LossBreakdown {
        cls,
        mmd,
        disc,
        total: cls + alpha * mmd + beta * disc,
        alpha,
        beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        assert_eq!(alpha_schedule(0, 200).unwrap(), 0.0);
        assert!((alpha_schedule(200, 200).unwrap() - 0.9999092).abs() < 1e-6);
        assert!((alpha_schedule(100, 200).unwrap() - 0.9866143).abs() < 1e-6);
        assert!(alpha_schedule(0, 0).is_err());
        assert!(alpha_schedule(3, 2).is_err());
    }

    #[test]
    fn schedule_is_monotone() {
        for e in [1, 10, 200] {
            let vals: Vec<f64> = (0..=e).map(|i| alpha_schedule(i, e).unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[1] >= w[0]));
            assert!(vals.iter().all(|&v| (0.0..1.0).contains(&v)));
        }
    }

    #[test]
    fn total_loss_arithmetic() {
        let b = total_loss(1.0, 2.0, 3.0, 0.5, 0.01).unwrap();
        assert!((b.total - 2.03).abs() < 1e-15);
        assert_eq!(total_loss(1.7, 2.0, 3.0, 0.0, 0.0).unwrap().total, 1.7);
        assert_eq!(total_loss(0.0, 0.0, 0.0, 0.0, 0.0).unwrap().total, 0.0);
        assert!(total_loss(f64::NAN, 0.0, 0.0, 0.0, 0.0).is_err());
    }
}

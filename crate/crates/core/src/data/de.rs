use crate::error::{Error, Result};

/// Differential entropy of a window under a Gaussian model: `½·ln(2πe·σ²)`,
/// with `σ²` the population variance.
pub fn de_gaussian(window: &[f64]) -> Result<f64> {
    if window.len() < 2 {
        return Err(Error::validation(
            "differential entropy needs at least two samples",
        ));
    }
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let var = window.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    if var <= 0.0 {
        return Err(Error::validation(
            "differential entropy is undefined for a zero-variance window",
        ));
    }
    Ok(de_from_variance(var))
}

pub fn de_from_variance(variance: f64) -> f64 {
    0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * variance).ln()
}

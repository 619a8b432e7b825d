use super::Matrix;
use crate::error::{Error, Result};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

pub fn leaky_relu(input: &Matrix, slope: f64) -> Matrix {
    input.map(|x| if x > 0.0 { x } else { slope * x })
}

/// Derivative is 1 for `x > 0` and `slope` otherwise, including at exactly zero.
pub fn leaky_relu_backward(input: &Matrix, grad_out: &Matrix, slope: f64) -> Result<Matrix> {
    if input.shape() != grad_out.shape() {
        return Err(Error::Shape {
            op: "leaky_relu_backward",
            left: input.shape(),
            right: grad_out.shape(),
        });
    }
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { slope * g })
        .collect();
    Matrix::from_parts(input.rows(), input.cols(), data)
}

pub fn validate_slope(slope: f64) -> Result<()> {
    if slope > 0.0 && slope < 1.0 {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "leaky slope {slope} must lie in (0, 1)"
        )))
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Pulls a gradient w.r.t. softmax probabilities back to the logits:
/// `g_logit = p ⊙ (g − ⟨g, p⟩)` per row.
pub fn softmax_backward(probs: &Matrix, grad_probs: &Matrix) -> Result<Matrix> {
    if probs.shape() != grad_probs.shape() {
        return Err(Error::Shape {
            op: "softmax_backward",
            left: probs.shape(),
            right: grad_probs.shape(),
        });
    }
    let mut out = Matrix::zeros(probs.rows(), probs.cols());
    for r in 0..probs.rows() {
        let p = probs.row(r);
        let g = grad_probs.row(r);
        let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
        for ((o, &pi), &gi) in out.row_mut(r).iter_mut().zip(p).zip(g) {
            *o = pi * (gi - dot);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaky_hand_values() {
        let x = Matrix::new(1, 2, vec![2.0, -2.0]).unwrap();
        assert_eq!(leaky_relu(&x, 0.01).data(), &[2.0, -0.02]);
        let pos = Matrix::new(1, 3, vec![0.5, 1.0, 7.0]).unwrap();
        assert_eq!(leaky_relu(&pos, 0.01), pos);
    }

    #[test]
    fn derivative_at_zero_is_slope() {
        let x = Matrix::new(1, 3, vec![0.0, 1.0, -1.0]).unwrap();
        let g = leaky_relu_backward(&x, &Matrix::filled(1, 3, 1.0), 0.2).unwrap();
        assert_eq!(g.data(), &[0.2, 1.0, 0.2]);
    }

    #[test]
    fn slope_bounds() {
        assert!(validate_slope(0.01).is_ok());
        assert!(validate_slope(0.0).is_err());
        assert!(validate_slope(1.0).is_err());
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let x = Matrix::new(2, 3, vec![1000.0, 0.0, -1000.0, 1.0, 2.0, 3.0]).unwrap();
        let p = softmax(&x);
        for row in p.iter_rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        assert!(p.is_finite());
    }
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, Parameter, ParameterSet};
use crate::error::{Error, Result};

/// Dense affine layer `y = x·W + b` with `W` stored as `in_dim × out_dim`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearLayer {
    pub weight: Parameter,
    pub bias: Parameter,
    #[serde(skip)]
    cached_input: Option<Matrix>,
}

impl LinearLayer {
    pub fn new<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let weight = Parameter::fan_in_uniform(in_dim, out_dim, in_dim, rng);
        let bias = Parameter::fan_in_uniform(1, out_dim, in_dim, rng);
        Self {
            weight,
            bias,
            cached_input: None,
        }
    }

    pub fn from_values(weight: Matrix, bias: Matrix) -> Result<Self> {
        if bias.rows() != 1 || bias.cols() != weight.cols() {
            return Err(Error::Shape {
                op: "linear bias",
                left: weight.shape(),
                right: bias.shape(),
            });
        }
        Ok(Self {
            weight: Parameter::new(weight),
            bias: Parameter::new(bias),
            cached_input: None,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.cols()
    }

    /// Forward pass without touching the backward cache.
    pub fn apply(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.in_dim() {
            return Err(Error::Shape {
                op: "linear_forward",
                left: input.shape(),
                right: self.weight.value.shape(),
            });
        }
        let mut out = input.matmul(&self.weight.value)?;
        out.add_row_broadcast(&self.bias.value)?;
        Ok(out)
    }

    pub fn forward(&mut self, input: &Matrix) -> Result<Matrix> {
        let out = self.apply(input)?;
        self.cached_input = Some(input.clone());
        Ok(out)
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. the input.
    pub fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let input = self
            .cached_input
            .as_ref()
            .ok_or_else(|| Error::State("linear backward called before forward".into()))?;
        if grad_out.rows() != input.rows() || grad_out.cols() != self.out_dim() {
            return Err(Error::Shape {
                op: "linear_backward",
                left: grad_out.shape(),
                right: (input.rows(), self.out_dim()),
            });
        }
        self.weight.grad.add_assign(&input.matmul_tn(grad_out)?)?;
        self.bias.grad.add_assign(&grad_out.column_sums())?;
        grad_out.matmul_nt(&self.weight.value)
    }

    pub fn clear_cache(&mut self) {
        self.cached_input = None;
    }
}

impl ParameterSet for LinearLayer {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn identity_weight_passes_input_through() {
        let layer = LinearLayer::from_values(Matrix::identity(2), Matrix::zeros(1, 2)).unwrap();
        let out = layer
            .apply(&Matrix::new(1, 2, vec![3.0, -1.0]).unwrap())
            .unwrap();
        assert_eq!(out.data(), &[3.0, -1.0]);
    }

    #[test]
    fn hand_product_with_bias() {
        let layer = LinearLayer::from_values(
            Matrix::new(2, 1, vec![1.0, 1.0]).unwrap(),
            Matrix::new(1, 1, vec![0.5]).unwrap(),
        )
        .unwrap();
        let out = layer
            .apply(&Matrix::new(1, 2, vec![2.0, 3.0]).unwrap())
            .unwrap();
        assert_eq!(out.data(), &[5.5]);
    }

    #[test]
    fn shapes_follow_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut layer = LinearLayer::new(3, 7, &mut rng);
        let x = Matrix::from_fn(4, 3, |r, c| (r + c) as f64);
        let y = layer.forward(&x).unwrap();
        assert_eq!(y.shape(), (4, 7));
        let gx = layer.backward(&Matrix::filled(4, 7, 1.0)).unwrap();
        assert_eq!(gx.shape(), x.shape());
        assert_eq!(layer.weight.grad.shape(), layer.weight.value.shape());
        assert_eq!(layer.bias.grad.shape(), layer.bias.value.shape());
    }

    #[test]
    fn scalar_chain_rule() {
        let mut layer =
            LinearLayer::from_values(Matrix::new(1, 1, vec![2.0]).unwrap(), Matrix::zeros(1, 1))
                .unwrap();
        layer
            .forward(&Matrix::new(1, 1, vec![3.0]).unwrap())
            .unwrap();
        let gx = layer
            .backward(&Matrix::new(1, 1, vec![1.0]).unwrap())
            .unwrap();
        assert_eq!(layer.weight.grad.data(), &[3.0]);
        assert_eq!(layer.bias.grad.data(), &[1.0]);
        assert_eq!(gx.data(), &[2.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut layer = LinearLayer::new(3, 2, &mut rng);
        layer.forward(&Matrix::filled(5, 3, 0.7)).unwrap();
        let gx = layer.backward(&Matrix::zeros(5, 2)).unwrap();
        assert!(gx.data().iter().all(|&v| v == 0.0));
        assert!(layer.weight.grad.data().iter().all(|&v| v == 0.0));
        assert!(layer.bias.grad.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut layer = LinearLayer::new(3, 2, &mut rng);
        assert!(matches!(
            layer.backward(&Matrix::zeros(1, 2)),
            Err(Error::State(_))
        ));
        let err = layer.forward(&Matrix::zeros(1, 4)).unwrap_err();
        assert!(err.to_string().contains("(1, 4)") && err.to_string().contains("(3, 2)"));
    }

    #[test]
    fn init_is_bounded_by_fan_in() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer = LinearLayer::new(16, 8, &mut rng);
        let bound = 0.25;
        assert!(layer.weight.value.data().iter().all(|v| v.abs() <= bound));
        assert!(layer.bias.value.data().iter().all(|v| v.abs() <= bound));
    }
}

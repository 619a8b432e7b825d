use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;

/// A trainable tensor with its gradient accumulator and Adam moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub value: Matrix,
    pub grad: Matrix,
    pub adam_m: Matrix,
    pub adam_v: Matrix,
    pub step_count: u64,
}

impl Parameter {
    pub fn new(value: Matrix) -> Self {
        let (r, c) = value.shape();
        Self {
            value,
            grad: Matrix::zeros(r, c),
            adam_m: Matrix::zeros(r, c),
            adam_v: Matrix::zeros(r, c),
            step_count: 0,
        }
    }

    /// Uniform init in `[-sqrt(1/fan_in), +sqrt(1/fan_in)]`.
    pub fn fan_in_uniform<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        fan_in: usize,
        rng: &mut R,
    ) -> Self {
        let bound = (1.0 / fan_in.max(1) as f64).sqrt();
        let value = Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound));
        Self::new(value)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Anything that owns parameters, visited in a fixed order.
///
/// The order is part of the checkpoint format, so implementations must not
/// depend on anything but the structure of `self`.
pub trait ParameterSet {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Parameter));

    fn zero_grads(&mut self) {
        self.visit_params(&mut |p| p.zero_grad());
    }

    fn num_parameters(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p| n += p.value.len());
        n
    }
}

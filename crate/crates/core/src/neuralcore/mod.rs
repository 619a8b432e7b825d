//! Minimal dense network kernel: matrices, linear layers, LeakyReLU,
//! softmax cross-entropy, Adam and finite-difference gradient checking.

mod activation;
mod adam;
mod cross_entropy;
pub mod gradcheck;
mod linear;
mod matrix;
mod param;

pub use activation::{
    leaky_relu, leaky_relu_backward, softmax, softmax_backward, validate_slope, DEFAULT_LEAKY_SLOPE,
};
pub use adam::{adam_step, adam_step_all, AdamConfig};
pub use cross_entropy::softmax_cross_entropy;
pub use gradcheck::{
    check_input_gradient, check_inputs_gradient, check_parameter_gradients, relative_error,
    GradCheckConfig, GradCheckEntry, GradCheckReport,
};
pub use linear::LinearLayer;
pub use matrix::Matrix;
pub use param::{Parameter, ParameterSet};

//! Minimal dense/convolutional layers with hand-written backward passes,
//! plus the optimizer. All parameter tensors are `Array2<f64>` (biases as
//! single-row matrices) so optimizer state can mirror them uniformly.

mod layers;
mod optim;

pub use layers::{
    dropout_backward, dropout_forward, relu_backward, relu_forward, Conv1d, Conv1dCache,
    ConvDirection, Dense,
};
pub use optim::{clip_global_norm, Adam};

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Uniform init in +-sqrt(1/fan_in), the usual default for small stacks.
pub fn init_uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize) -> Array2<f64> {
    let bound = (1.0 / fan_in as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

/// Standard-normal draws shaped (rows, cols).
pub fn standard_normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
    })
}

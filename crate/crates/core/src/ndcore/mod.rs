//! Dense numeric primitives: matrices, the crate-owned RNG, initializers and
//! activation functions. Everything else is built on top of this module.

pub mod activations;
mod matrix;
mod rng;
mod scalar;

pub use matrix::{debug_assert_finite, Matrix};
pub use rng::Rng;
pub use scalar::Scalar;

use crate::error::{Error, Result};

/// Uniform Glorot initialisation: entries drawn from `[-L, L]` with
/// `L = sqrt(6 / (fan_in + fan_out))`, shape `(fan_in, fan_out)`.
pub fn glorot_init<F: Scalar>(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<Matrix<F>> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::invalid(format!(
            "glorot_init requires positive fans, got ({fan_in}, {fan_out})"
        )));
    }
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut data = Vec::with_capacity(fan_in * fan_out);
    for _ in 0..fan_in * fan_out {
        data.push(F::from_f64(rng.uniform_in(-bound, bound)));
    }
    Matrix::from_vec(fan_in, fan_out, data)
}

/// Closed-form Glorot bound, exposed for tests and shape checks.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

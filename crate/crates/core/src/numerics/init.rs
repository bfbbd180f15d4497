use num_traits::Float;

use super::rng::SeededRng;
use super::Matrix;
use crate::error::{Error, Result};

/// Glorot-uniform matrix drawn from `[-b, b]`, `b = √(6 / (rows + cols))`,
/// using its own stream of `seed`.
pub fn glorot_init<T: Float>(rows: usize, cols: usize, seed: u64) -> Result<Matrix<T>> {
    let mut rng = SeededRng::new(seed, super::rng::Stream::OcnnInit);
    glorot_from(rows, cols, 1.0, &mut rng)
}

/// Glorot-uniform draw scaled by `gain`, consuming `rng`.
pub fn glorot_from<T: Float>(
    rows: usize,
    cols: usize,
    gain: f64,
    rng: &mut SeededRng,
) -> Result<Matrix<T>> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(
            "shape",
            format!("glorot_init needs positive dimensions, got {rows}x{cols}"),
        ));
    }
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(Error::invalid("gain", format!("must be positive, got {gain}")));
    }
    let bound = gain * (6.0 / (rows + cols) as f64).sqrt();
    let values = (0..rows * cols)
        .map(|_| T::from(rng.uniform(-bound, bound)).expect("float cast"))
        .collect();
    Matrix::new(rows, cols, values)
}

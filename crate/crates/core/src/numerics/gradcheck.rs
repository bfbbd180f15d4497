use num_traits::Float;

use crate::error::{Error, Result};

/// Central-difference gradient of `f` at `theta`.
pub fn finite_diff_grad<T, F>(f: F, theta: &[T], eps: T) -> Result<Vec<T>>
where
    T: Float,
    F: Fn(&[T]) -> T,
{
    if !(eps > T::zero() && eps.is_finite()) {
        return Err(Error::invalid("eps", "must be positive and finite"));
    }
    let two = T::one() + T::one();
    let mut point = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let orig = point[i];
        point[i] = orig + eps;
        let up = f(&point);
        point[i] = orig - eps;
        let down = f(&point);
        point[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!(
                "function value around coordinate {i}"
            )));
        }
        grad.push((up - down) / (two * eps));
    }
    Ok(grad)
}

/// `|a - b| / max(|a|, |b|, 1e-6)`. The floor keeps coordinates whose true
/// value is (numerically) zero from dividing by round-off.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

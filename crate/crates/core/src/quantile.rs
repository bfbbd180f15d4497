//! Closed-form solution of the bias subproblem.
//!
//! For fixed scores `ŷ`, the bias objective
//!
//! ```text
//! f(r) = (1 / (N ν)) Σ max(0, r − ŷₙ) − r
//! ```
//!
//! is convex and piecewise linear with breakpoints at the scores. Its slope
//! on an open segment is `|{ŷₙ < r}| / (N ν) − 1`, so it is minimized at the
//! nearest-rank ν-quantile `sorted[⌈νN⌉]` (1-indexed), the left end of the
//! optimal interval when `νN` is an integer.

use std::cmp::Ordering;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileSolution<T> {
    pub r: T,
    pub objective_value: T,
    /// `|{n : ŷₙ < r}| / N`
    pub fraction_below: T,
}

fn validate<T: Float>(scores: &[T], nu: T) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Empty("scores"));
    }
    if !(nu > T::zero() && nu < T::one()) {
        return Err(Error::invalid(
            "nu",
            format!("must lie in (0, 1), got {}", nu.to_f64().unwrap_or(f64::NAN)),
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("score".into()));
    }
    Ok(())
}

fn sorted<T: Float>(scores: &[T]) -> Vec<T> {
    let mut s = scores.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    s
}

/// 1-indexed nearest rank `⌈νN⌉`, clamped to `1..=N`. Products within a few
/// ulps above an integer are taken as that integer, so `ν = 0.07, N = 100`
/// selects rank 7 rather than 8.
pub fn nearest_rank<T: Float>(nu: T, n: usize) -> usize {
    let nf = T::from(n).expect("count fits");
    let t = nu * nf;
    let slack = T::epsilon() * t.max(T::one()) * T::from(8.0).expect("const");
    let k = (t - slack).ceil().to_usize().unwrap_or(1);
    k.clamp(1, n)
}

/// Exact bias objective `f(r)`. Hinge terms are summed smallest first with
/// Neumaier compensation.
pub fn r_objective<T: Float>(scores: &[T], nu: T, r: T) -> Result<T> {
    validate(scores, nu)?;
    Ok(r_objective_unchecked(scores, nu, r))
}

pub(crate) fn r_objective_unchecked<T: Float>(scores: &[T], nu: T, r: T) -> T {
    let mut hinges: Vec<T> = scores
        .iter()
        .map(|&y| (r - y).max(T::zero()))
        .filter(|&h| h > T::zero())
        .collect();
    hinges.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = T::from(scores.len()).expect("count fits");
    compensated_sum(&hinges) / (n * nu) - r
}

fn compensated_sum<T: Float>(values: &[T]) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp = comp + ((sum - t) + v);
        } else {
            comp = comp + ((v - t) + sum);
        }
        sum = t;
    }
    sum + comp
}

pub fn fraction_below<T: Float>(scores: &[T], r: T) -> T {
    let below = scores.iter().filter(|&&y| y < r).count();
    T::from(below).expect("count fits") / T::from(scores.len().max(1)).expect("count fits")
}

fn solution<T: Float>(scores: &[T], nu: T, r: T) -> QuantileSolution<T> {
    QuantileSolution {
        r,
        objective_value: r_objective_unchecked(scores, nu, r),
        fraction_below: fraction_below(scores, r),
    }
}

/// Minimizer of `f` via nearest-rank selection.
pub fn nu_quantile<T: Float>(scores: &[T], nu: T) -> Result<QuantileSolution<T>> {
    validate(scores, nu)?;
    let k = nearest_rank(nu, scores.len());
    let mut s = scores.to_vec();
    let (_, kth, _) = s.select_nth_unstable_by(k - 1, |a, b| {
        a.partial_cmp(b).unwrap_or(Ordering::Equal)
    });
    let r = *kth;
    Ok(solution(scores, nu, r))
}

/// Reference minimizer: evaluates `f` at every score, every midpoint between
/// consecutive distinct sorted scores, and one unit beyond each end, keeping
/// the smallest candidate attaining the minimum.
pub fn brute_force_r<T: Float>(scores: &[T], nu: T) -> Result<QuantileSolution<T>> {
    validate(scores, nu)?;
    let s = sorted(scores);
    let two = T::one() + T::one();
    let mut candidates = Vec::with_capacity(2 * s.len() + 2);
    candidates.push(s[0] - T::one());
    for (i, &v) in s.iter().enumerate() {
        candidates.push(v);
        if let Some(&next) = s.get(i + 1) {
            if next > v {
                candidates.push(v + (next - v) / two);
            }
        }
    }
    candidates.push(s[s.len() - 1] + T::one());

    let mut best = candidates[0];
    let mut best_val = r_objective_unchecked(scores, nu, best);
    for &c in &candidates[1..] {
        let val = r_objective_unchecked(scores, nu, c);
        if val < best_val {
            best = c;
            best_val = val;
        }
    }
    Ok(solution(scores, nu, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{SeededRng, Stream};
    use proptest::prelude::*;

    const ONE_TO_NINE: [f64; 9] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0];

    #[test]
    fn worked_example_quantile() {
        let sol = nu_quantile(&ONE_TO_NINE, 0.33).unwrap();
        assert_eq!(sol.r, 3.0);
        assert!((sol.objective_value - -1.99).abs() <= 0.01);
        assert_eq!(brute_force_r(&ONE_TO_NINE, 0.33).unwrap().r, 3.0);
    }

    #[test]
    fn worked_example_rows() {
        assert_eq!(r_objective(&ONE_TO_NINE, 0.33, 1.0).unwrap(), -1.0);
        assert!((r_objective(&ONE_TO_NINE, 0.33, 2.0).unwrap() - -1.67).abs() <= 0.01);
    }

    #[test]
    fn median_of_one_to_nine() {
        let sol = nu_quantile(&ONE_TO_NINE, 0.5).unwrap();
        assert_eq!(sol.r, 5.0);
        // hinge sum 4+3+2+1 = 10, so f(5) = 10 / 4.5 - 5
        assert!((sol.objective_value - -2.778).abs() <= 1e-3);
        let brute = brute_force_r(&ONE_TO_NINE, 0.5).unwrap();
        assert_eq!(brute.r, 5.0);
    }

    #[test]
    fn all_equal() {
        let sol = nu_quantile(&[5.0, 5.0, 5.0, 5.0], 0.5).unwrap();
        assert_eq!(sol.r, 5.0);
        assert_eq!(sol.fraction_below, 0.0);
    }

    #[test]
    fn single_score() {
        for nu in [0.05, 0.5, 0.95] {
            assert_eq!(brute_force_r(&[2.5], nu).unwrap().r, 2.5);
            assert_eq!(nu_quantile(&[2.5], nu).unwrap().r, 2.5);
        }
    }

    #[test]
    fn below_minimum_is_minus_r() {
        let s = [3.0, 4.5, 10.0];
        for r in [-7.0, 0.0, 3.0] {
            assert_eq!(r_objective(&s, 0.2, r).unwrap(), -r);
        }
    }

    #[test]
    fn integer_rank_takes_left_endpoint() {
        let s = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(nu_quantile(&s, 0.5).unwrap().r, 2.0);
        assert_eq!(nearest_rank(0.07, 100), 7);
        assert_eq!(nearest_rank(0.05, 190), 10);
    }

    #[test]
    fn errors() {
        assert!(nu_quantile::<f64>(&[], 0.5).is_err());
        assert!(nu_quantile(&[1.0], 0.0).is_err());
        assert!(nu_quantile(&[1.0], 1.0).is_err());
        assert!(brute_force_r(&[1.0], 1.5).is_err());
        assert!(r_objective::<f64>(&[], 0.5, 0.0).is_err());
    }

    #[test]
    fn single_precision_example() {
        let s: Vec<f32> = ONE_TO_NINE.iter().map(|&v| v as f32).collect();
        assert_eq!(nu_quantile(&s, 0.33f32).unwrap().r, 3.0f32);
    }

    #[test]
    fn randomized_against_brute_force() {
        let mut rng = SeededRng::new(42, Stream::Test);
        for _ in 0..300 {
            let n = 1 + rng.below(128);
            // coarse grid forces ties
            let scores: Vec<f64> = (0..n).map(|_| (rng.uniform(-10.0, 10.0) * 2.0).round() / 2.0).collect();
            let nu = 0.05 * (1 + rng.below(19)) as f64;
            let q = nu_quantile(&scores, nu).unwrap();
            let b = brute_force_r(&scores, nu).unwrap();
            assert!(q.objective_value <= b.objective_value + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn optimal_and_stationary(scores in prop::collection::vec(-10.0f64..10.0, 1..64), step in 1usize..20) {
            let nu = step as f64 * 0.05;
            let q = nu_quantile(&scores, nu).unwrap();
            let b = brute_force_r(&scores, nu).unwrap();
            prop_assert!(q.objective_value <= b.objective_value + 1e-9);
            let n = scores.len() as f64;
            let at_most = scores.iter().filter(|&&y| y <= q.r).count() as f64 / n;
            prop_assert!(q.fraction_below <= nu + 1e-12);
            prop_assert!(nu <= at_most + 1e-12);
        }

        #[test]
        fn translation_equivariant(scores in prop::collection::vec(-10.0f64..10.0, 1..64), c in -100.0f64..100.0) {
            let shifted: Vec<f64> = scores.iter().map(|s| s + c).collect();
            let a = nu_quantile(&scores, 0.3).unwrap();
            let b = nu_quantile(&shifted, 0.3).unwrap();
            // x -> fl(x + c) is monotone, so order statistics commute with it
            prop_assert_eq!(b.r, a.r + c);
        }

        #[test]
        fn permutation_invariant(mut scores in prop::collection::vec(-10.0f64..10.0, 1..64), seed in any::<u64>()) {
            let a = nu_quantile(&scores, 0.2).unwrap();
            SeededRng::new(seed, Stream::Test).shuffle(&mut scores);
            let b = nu_quantile(&scores, 0.2).unwrap();
            prop_assert_eq!(a.r, b.r);
            prop_assert_eq!(a.objective_value, b.objective_value);
        }
    }
}

use serde::{Deserialize, Serialize};

use super::{Dataset, ANOMALOUS, NORMAL};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng, Stream};

/// Isotropic Gaussian benchmark: a normal training cloud and a wider
/// anomalous test cloud, both centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_normal: usize,
    pub n_anomalous: usize,
    pub dim: usize,
    pub sigma_normal: f64,
    pub sigma_anomalous: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_normal: 190,
            n_anomalous: 10,
            dim: 512,
            sigma_normal: 2.0,
            sigma_anomalous: 10.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if self.n_normal == 0 || self.n_anomalous == 0 {
            return Err(Error::invalid("counts", "need at least one normal and one anomalous point"));
        }
        for (name, s) in [("sigma_normal", self.sigma_normal), ("sigma_anomalous", self.sigma_anomalous)] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

fn gaussian_rows(n: usize, dim: usize, std: f64, center: Option<&[f64]>, rng: &mut SeededRng) -> Matrix<f64> {
    let mut values = Vec::with_capacity(n * dim);
    for _ in 0..n {
        for j in 0..dim {
            let mean = center.map_or(0.0, |c| c[j]);
            values.push(rng.normal(mean, std));
        }
    }
    Matrix::new(n, dim, values).expect("gaussian draws are finite")
}

/// Returns `(train, test)`: `n_normal` draws from `N(0, σ_n² I)` labeled
/// normal, and `n_anomalous` draws from `N(0, σ_a² I)` labeled anomalous.
/// The two splits use separate streams of `seed`.
pub fn gen_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let mut train_rng = SeededRng::new(seed, Stream::SyntheticTrain);
    let mut test_rng = SeededRng::new(seed, Stream::SyntheticTest);
    let train = gaussian_rows(spec.n_normal, spec.dim, spec.sigma_normal, None, &mut train_rng);
    let test = gaussian_rows(spec.n_anomalous, spec.dim, spec.sigma_anomalous, None, &mut test_rng);
    Ok((
        Dataset::new(train, Some(vec![NORMAL; spec.n_normal]))?,
        Dataset::new(test, Some(vec![ANOMALOUS; spec.n_anomalous]))?,
    ))
}

/// Two equal-width Gaussian blobs. Anomalies are centered at
/// `offset_sigmas · σ · s` where `s` is a seeded vector of random signs, so
/// each coordinate is shifted by `offset_sigmas` standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub n_normal: usize,
    pub n_anomalous: usize,
    pub dim: usize,
    pub sigma: f64,
    pub offset_sigmas: f64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            n_normal: 500,
            n_anomalous: 50,
            dim: 64,
            sigma: 1.0,
            offset_sigmas: 4.0,
        }
    }
}

/// Returns `(normal, anomalous)` datasets, labeled.
pub fn gen_blobs(spec: &BlobSpec, seed: u64) -> Result<(Dataset, Dataset)> {
    if spec.dim == 0 || spec.n_normal == 0 || spec.n_anomalous == 0 {
        return Err(Error::invalid("blobs", "counts and dim must be positive"));
    }
    if !(spec.sigma > 0.0) || !spec.offset_sigmas.is_finite() {
        return Err(Error::invalid("blobs", "sigma must be positive and offset finite"));
    }
    let mut rng = SeededRng::new(seed, Stream::Blobs);
    let center: Vec<f64> = (0..spec.dim)
        .map(|_| {
            let sign = if rng.next_u64() & 1 == 0 { 1.0 } else { -1.0 };
            sign * spec.offset_sigmas * spec.sigma
        })
        .collect();
    let normal = gaussian_rows(spec.n_normal, spec.dim, spec.sigma, None, &mut rng);
    let anomalous = gaussian_rows(spec.n_anomalous, spec.dim, spec.sigma, Some(&center), &mut rng);
    Ok((
        Dataset::new(normal, Some(vec![NORMAL; spec.n_normal]))?,
        Dataset::new(anomalous, Some(vec![ANOMALOUS; spec.n_anomalous]))?,
    ))
}

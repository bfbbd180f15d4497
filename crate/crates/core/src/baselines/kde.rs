use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng, Stream};

/// Gaussian kernel density estimate over stored training points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeModel {
    pub points: Matrix<f64>,
    pub bandwidth: f64,
}

/// `2^0.5, 2^1, …, 2^5`
pub fn default_bandwidth_grid() -> Vec<f64> {
    (1..=10).map(|k| 2f64.powf(0.5 * k as f64)).collect()
}

pub const DEFAULT_FOLDS: usize = 5;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `log((1/N) Σ exp(−dₙ / (2h²))) − (d/2) log(2πh²)` for squared distances
/// `dₙ`, with the sum taken in log space.
fn log_density(sq: &[f64], dim: usize, h: f64) -> f64 {
    let scale = 2.0 * h * h;
    let max = sq.iter().map(|&d| -d / scale).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = sq.iter().map(|&d| (-d / scale - max).exp()).sum();
    max + sum.ln() - (sq.len() as f64).ln() - 0.5 * dim as f64 * (PI * scale).ln()
}

impl KdeModel {
    pub fn new(points: Matrix<f64>, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::invalid("bandwidth", format!("must be positive, got {bandwidth}")));
        }
        if points.rows() == 0 {
            return Err(Error::Empty("kde needs training points"));
        }
        Ok(Self { points, bandwidth })
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }
}

/// Picks the bandwidth with the best mean held-out log-likelihood. Folds are
/// contiguous blocks of a seeded shuffle; ties keep the earlier grid value.
pub fn kde_fit(data: &Dataset, grid: &[f64], folds: usize, seed: u64) -> Result<KdeModel> {
    if grid.is_empty() {
        return Err(Error::invalid("bandwidth_grid", "must not be empty"));
    }
    if let Some(&h) = grid.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
        return Err(Error::invalid("bandwidth_grid", format!("entries must be positive, got {h}")));
    }
    if folds < 2 {
        return Err(Error::invalid("folds", format!("must be at least 2, got {folds}")));
    }
    let n = data.n_rows();
    if n < folds {
        return Err(Error::invalid("folds", format!("{folds} folds need at least as many rows, got {n}")));
    }
    let x = data.x();
    if grid.len() == 1 {
        return KdeModel::new(x.clone(), grid[0]);
    }

    let mut order: Vec<usize> = (0..n).collect();
    SeededRng::new(seed, Stream::KdeFolds).shuffle(&mut order);
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos * folds / n;
    }

    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sq_dist(x.row(i), x.row(j));
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    let mut best = (grid[0], f64::NEG_INFINITY);
    let mut sq = Vec::with_capacity(n);
    for &h in grid {
        let mut total = 0.0;
        for f in 0..folds {
            let mut fold_sum = 0.0;
            let mut count = 0usize;
            for i in (0..n).filter(|&i| fold_of[i] == f) {
                sq.clear();
                sq.extend((0..n).filter(|&j| fold_of[j] != f).map(|j| dist[i * n + j]));
                fold_sum += log_density(&sq, x.cols(), h);
                count += 1;
            }
            total += fold_sum / count as f64;
        }
        let mean = total / folds as f64;
        if mean > best.1 {
            best = (h, mean);
        }
    }
    KdeModel::new(x.clone(), best.0)
}

/// Log-density at `query`; its negation is the anomaly score.
pub fn kde_score(model: &KdeModel, query: &[f64]) -> Result<f64> {
    if query.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            op: "kde query",
            left_rows: 1,
            left_cols: query.len(),
            right_rows: model.points.rows(),
            right_cols: model.dim(),
        });
    }
    let sq: Vec<f64> = model.points.iter_rows().map(|p| sq_dist(p, query)).collect();
    Ok(log_density(&sq, model.dim(), model.bandwidth))
}

pub fn kde_score_all(model: &KdeModel, data: &Dataset) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Ok(Vec::new());
    }
    data.x().iter_rows().map(|q| kde_score(model, q)).collect()
}

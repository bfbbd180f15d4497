use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Guard added to the L1 contrast of each row.
pub const DEFAULT_GCN_LAMBDA: f64 = 1e-8;

/// Per-feature ranges learned from training data.
///
/// Constant features map to 0. Held-out data is transformed with the stored
/// ranges and may land outside `[0, 1]`; it is not clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxRecord {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMaxRecord {
    pub fn fit(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("min-max scaling needs at least one row"));
        }
        let d = data.n_cols();
        let mut mins = vec![f64::INFINITY; d];
        let mut maxs = vec![f64::NEG_INFINITY; d];
        for row in data.x().iter_rows() {
            for (j, &v) in row.iter().enumerate() {
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        Ok(Self { mins, maxs })
    }

    /// Features whose training range is a single value.
    pub fn constant_features(&self) -> Vec<usize> {
        (0..self.mins.len()).filter(|&j| self.maxs[j] <= self.mins[j]).collect()
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.n_cols() != self.mins.len() && !data.is_empty() {
            return Err(Error::DimensionMismatch {
                op: "minmax apply",
                left_rows: 1,
                left_cols: self.mins.len(),
                right_rows: data.n_rows(),
                right_cols: data.n_cols(),
            });
        }
        let x = data.x();
        let mut values = Vec::with_capacity(x.rows() * x.cols());
        for row in x.iter_rows() {
            for (j, &v) in row.iter().enumerate() {
                let span = self.maxs[j] - self.mins[j];
                values.push(if span > 0.0 { (v - self.mins[j]) / span } else { 0.0 });
            }
        }
        Ok(data.with_x(Matrix::new(x.rows(), x.cols(), values)?))
    }
}

/// Maps every feature to `[0, 1]` over the training rows.
pub fn minmax_scale(data: &Dataset) -> Result<(Dataset, MinMaxRecord)> {
    let record = MinMaxRecord::fit(data)?;
    let scaled = record.apply(data)?;
    Ok((scaled, record))
}

/// Per-row contrast normalization with an L1 contrast:
/// `x' = (x − mean(x)) / (λ + mean(|x − mean(x)|))`.
pub fn l1_gcn(data: &Dataset, lambda: f64) -> Result<Dataset> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", format!("must be non-negative, got {lambda}")));
    }
    let x = data.x();
    let d = x.cols();
    let mut values = Vec::with_capacity(x.rows() * d);
    for row in x.iter_rows() {
        let mean = row.iter().sum::<f64>() / d as f64;
        let contrast = row.iter().map(|v| (v - mean).abs()).sum::<f64>() / d as f64;
        let denom = lambda + contrast;
        for &v in row {
            let centered = v - mean;
            // constant rows with λ = 0 have nothing to normalize
            values.push(if denom > 0.0 { centered / denom } else { 0.0 });
        }
    }
    Ok(data.with_x(Matrix::new(x.rows(), d, values)?))
}

/// Input preprocessing choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    None,
    /// Per-feature min-max over the training rows.
    MinMax,
    /// Per-row L1 contrast normalization followed by min-max.
    L1Gcn,
}

impl Scaling {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Scaling::None),
            "minmax" => Some(Scaling::MinMax),
            "l1gcn" => Some(Scaling::L1Gcn),
            _ => None,
        }
    }

    pub fn fit(self, train: &Dataset) -> Result<FittedScaler> {
        Ok(match self {
            Scaling::None => FittedScaler::None,
            Scaling::MinMax => FittedScaler::MinMax(MinMaxRecord::fit(train)?),
            Scaling::L1Gcn => {
                let gcn = l1_gcn(train, DEFAULT_GCN_LAMBDA)?;
                FittedScaler::L1Gcn {
                    lambda: DEFAULT_GCN_LAMBDA,
                    minmax: MinMaxRecord::fit(&gcn)?,
                }
            }
        })
    }
}

/// A preprocessing transform with its training statistics, persisted next
/// to models so scoring reapplies exactly the same map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedScaler {
    None,
    MinMax(MinMaxRecord),
    L1Gcn { lambda: f64, minmax: MinMaxRecord },
}

impl FittedScaler {
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        match self {
            FittedScaler::None => Ok(data.clone()),
            FittedScaler::MinMax(record) => record.apply(data),
            FittedScaler::L1Gcn { lambda, minmax } => minmax.apply(&l1_gcn(data, *lambda)?),
        }
    }
}

//! Datasets, synthetic benchmarks, delimited files and preprocessing.

mod delimited;
mod synthetic;
mod transform;

pub use delimited::{load_delimited, read_delimited, write_delimited};
pub use synthetic::{gen_blobs, gen_synthetic, BlobSpec, SyntheticSpec};
pub use transform::{l1_gcn, minmax_scale, FittedScaler, MinMaxRecord, Scaling, DEFAULT_GCN_LAMBDA};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Label value of normal instances.
pub const NORMAL: u8 = 0;
/// Label value of anomalous instances.
pub const ANOMALOUS: u8 = 1;

/// Instance matrix (one row per instance) with optional binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Matrix<f64>,
    labels: Option<Vec<u8>>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: Matrix<f64>, labels: Option<Vec<u8>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != x.rows() {
                return Err(Error::invalid(
                    "labels",
                    format!("{} labels for {} rows", l.len(), x.rows()),
                ));
            }
            if let Some(i) = l.iter().position(|&v| v > ANOMALOUS) {
                return Err(Error::invalid(
                    "labels",
                    format!("label at row {} is {}, expected 0 or 1", i + 1, l[i]),
                ));
            }
        }
        Ok(Self {
            x,
            labels,
            feature_names: None,
        })
    }

    pub fn unlabeled(x: Matrix<f64>) -> Self {
        Self {
            x,
            labels: None,
            feature_names: None,
        }
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.x.cols() {
            return Err(Error::invalid(
                "feature_names",
                format!("{} names for {} columns", names.len(), self.x.cols()),
            ));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn x(&self) -> &Matrix<f64> {
        &self.x
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn n_rows(&self) -> usize {
        self.x.rows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    /// Replaces the features, keeping labels and names.
    pub(crate) fn with_x(&self, x: Matrix<f64>) -> Self {
        debug_assert_eq!(x.rows(), self.x.rows());
        let names = (x.cols() == self.x.cols())
            .then(|| self.feature_names.clone())
            .flatten();
        Self {
            x,
            labels: self.labels.clone(),
            feature_names: names,
        }
    }

    /// Stacks `other` below `self`. Labels survive only if both carry them.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        let x = self.x.vstack(&other.x)?;
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Ok(Self {
            x,
            labels,
            feature_names: self.feature_names.clone(),
        })
    }
}

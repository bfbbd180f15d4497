//! One-class neural networks for anomaly detection.
//!
//! A network `ŷ(x) = ⟨w, g(V x)⟩` is trained against a bias `r` by
//! alternating subgradient steps on `(w, V)` with an exact quantile update
//! of `r`. Around it sit an autoencoder feature extractor, shallow
//! baselines (frozen random-feature OC-SVM, KDE, isolation forest), data
//! generation and preprocessing, and ranking metrics.
//!
//! Linear algebra, activations, initialization, the quantile solver and
//! AUC are generic over the float type; the learners run in `f64`.

pub mod autoencoder;
pub mod baselines;
pub mod data;
mod error;
pub mod eval;
pub mod layer;
pub mod numerics;
pub mod ocnn;
pub mod pipeline;
pub mod quantile;

pub use error::{Error, Result};

pub use autoencoder::{ae_train, encode, reconstruction_errors, AeArch, AeConfig, AutoencoderModel};
pub use data::{Dataset, ANOMALOUS, NORMAL};
pub use eval::{roc_auc, EvalReport};
pub use numerics::{Activation, Matrix, SeededRng, Stream};
pub use ocnn::{decide, train, HistoryRow, OcnnArch, OcnnModel, ScoreSet, TrainConfig};
pub use pipeline::{Method, ModelDocument, PipelineConfig};
pub use quantile::{nu_quantile, QuantileSolution};

pub type Scalar = f64;
pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Quantile64 = QuantileSolution<f64>;

//! One-class neural network: a bias-free hidden layer scored against a
//! bias `r` that is re-solved as a quantile after every round of weight
//! updates.

mod model;
mod train;

pub use model::{decide, forward_scores, ocnn_objective, wv_gradient, wv_objective, OcnnArch, OcnnModel, ScoreSet};
pub use train::{r_step, train, train_model, write_history, wv_step, HistoryRow, TrainConfig, TrainOutput};

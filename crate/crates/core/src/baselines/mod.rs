//! Shallow comparison detectors.

mod frozen;
mod iforest;
mod kde;

pub use frozen::{frozen_hidden_default, frozen_ocsvm_train, frozen_ocsvm_train_with, FROZEN_GAIN};
pub use iforest::{
    average_path_length, iforest_fit, iforest_score, iforest_score_all, IsolationForestModel, IsolationTree, Node,
    DEFAULT_SUBSAMPLE, DEFAULT_TREES,
};
pub use kde::{default_bandwidth_grid, kde_fit, kde_score, kde_score_all, KdeModel, DEFAULT_FOLDS};

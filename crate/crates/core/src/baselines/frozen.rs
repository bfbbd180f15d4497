use crate::data::Dataset;
use crate::error::Result;
use crate::numerics::Activation;
use crate::ocnn::{train, OcnnArch, TrainConfig, TrainOutput};

/// Glorot gain for the fixed projection. Wider weights push the sigmoid
/// features away from their linear region, which is what makes the random
/// features separate a compact class from a diffuse one.
pub const FROZEN_GAIN: f64 = 8.0;

/// Hidden width for the frozen baseline by input size.
pub fn frozen_hidden_default(dim: usize) -> usize {
    if dim >= 512 {
        128
    } else {
        32
    }
}

/// Linear one-class SVM on fixed random sigmoid features `g(V x)`: only `w`
/// and `r` are learned.
pub fn frozen_ocsvm_train(data: &Dataset, hidden_dim: usize, nu: f64, cfg: &TrainConfig) -> Result<TrainOutput> {
    let arch = OcnnArch {
        nu,
        hidden: hidden_dim,
        activation: Activation::Sigmoid,
        hidden_gain: FROZEN_GAIN,
        ..OcnnArch::default()
    };
    frozen_ocsvm_train_with(data, &arch, cfg)
}

/// As [`frozen_ocsvm_train`] with full control of the architecture; the
/// hidden weights are frozen whatever `arch.train_hidden` says.
pub fn frozen_ocsvm_train_with(data: &Dataset, arch: &OcnnArch, cfg: &TrainConfig) -> Result<TrainOutput> {
    let arch = OcnnArch {
        train_hidden: false,
        extra_layer: None,
        ..arch.clone()
    };
    train(data, &arch, cfg)
}

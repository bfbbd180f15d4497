//! Dense linear algebra, activations, initialization and gradient checking.

mod activation;
mod gradcheck;
mod init;
mod matrix;
pub mod rng;

pub use activation::{apply_activation, Activation};
pub use gradcheck::{finite_diff_grad, relative_error};
pub use init::{glorot_from, glorot_init};
pub use matrix::{dot, Matrix};
pub use rng::{SeededRng, Stream};

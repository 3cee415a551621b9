//! Minimal dense neural-network engine: logits, gradients, losses and SGD.

mod loss;
mod matrix;
mod model;
mod network;
mod optim;

pub use loss::{
    cross_entropy_loss, kl_distill_loss, l2_proximity, softmax, squared_proximity, PROXIMITY_EPS,
};
pub(crate) use loss::softmax_in_place;
pub use matrix::{argmax, Matrix};
pub use model::{Activation, GradientVector, ModelArch, ModelParams};
pub use network::{backward, forward};
pub use optim::{sgd_step, OptimizerState, SgdConfig};

#[cfg(test)]
mod tests;

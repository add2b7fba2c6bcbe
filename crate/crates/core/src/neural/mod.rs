//! The approximator, its losses and the training loop.

pub mod loss;
pub mod mlp;
pub mod optim;
pub mod pipeline;
pub mod train;

pub use loss::{loss_mse, loss_penalty, LossOutput};
pub use mlp::{MlpGradients, MlpModel, MlpTape, OutputActivation, DEFAULT_HIDDEN};
pub use optim::{Optimizer, OptimizerKind};
pub use pipeline::{Method, Pipeline, Sample, SampleTrace};
pub use train::{train, train_observed, LossTrace, TrainConfig};

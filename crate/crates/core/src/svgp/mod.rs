//! Sparse variational GP classification on pair embeddings.

mod elbo;
mod kernel;
mod model;
mod predict;
mod train;

pub use elbo::{elbo, elbo_with_grad, kl_gaussians, ElboGrad, ElboValue};
pub use kernel::{kernel_matrix, KernelParams};
pub use model::{Checkpoint, ModelGrad, ModelParams, TrainConfig, VariationalState, CHECKPOINT_VERSION};
pub use predict::{class_probability, predict, predict_embeddings, Covariance, CovarianceKind, PredictiveDistribution};
pub use train::{
    anchor_ids, embed, fit, full_elbo, init_model, objective_with_grad, train, train_embeddings, write_trace, Inputs, TrainTrace,
};

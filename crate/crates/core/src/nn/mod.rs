//! Function approximators for the forward model and the controller.

mod adam;
mod checkpoint;
mod controller;
mod ensemble;
mod gaussian;
mod mlp;
mod normalize;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, CheckpointBody, MemberRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use controller::ControllerModel;
pub use ensemble::EnsembleForwardModel;
pub use gaussian::{gaussian_nll, gaussian_nll_sum, GaussianPrediction};
pub use mlp::{init_mlp, mlp_forward, Activation, LayerSpec, Mlp, MlpOutput, OutputHead, LOG_VAR_MAX, LOG_VAR_MIN};
pub use normalize::Normalizer;

use crate::diffcore::DiffError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("non-positive variance {0}")]
    NonPositiveVariance(f64),
    #[error("non-finite gradient at parameter {index}")]
    NonFiniteGradient { index: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
}

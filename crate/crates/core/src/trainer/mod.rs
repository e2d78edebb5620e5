//! The coupled learning loop: motor babbling, closed-loop rollouts, dataset
//! aggregation and alternating forward-model / controller training.

mod check;
mod collect;
mod config;
mod data;
mod fit;
mod run;

pub use check::{gradient_checks, GradCheckEntry, CHECK_STEP, CHECK_TOLERANCE};
pub use collect::{motor_babble, rollout, BabbleSettings, Rollout};
pub use config::{
    ExperimentConfig, LoopConfig, NetworkConfig, OptimizerConfig, PlantConfig, PlantName, PlantTable, TaskConfig,
    TARGETS_PER_PLANT,
};
pub use data::{Dataset, Provenance, Source, Transition};
pub use fit::{fit_normalizers, train_controller, train_forward_model, TrainOutcome, TrainSettings};
pub use run::{
    build_models, data_swap_experiment, evaluate, run_learning_loop, run_learning_loop_with, DataSwapGrid, RunOutput,
};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::losses::LossError;
use crate::metrics::MetricsError;
use crate::nn::NnError;
use crate::plants::PlantError;
use crate::tasks::TaskError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("io: {0}")]
    Io(String),
    #[error("corrupt dataset {0}")]
    CorruptDataset(String),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Independent random streams derived from the experiment seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Babble = 1,
    ForwardInit = 2,
    ControllerInit = 3,
    Pretrain = 4,
    Iteration = 5,
}

/// Seed for `stream`, optionally distinguished further by `index`.
pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 32) | index);
    rng.next_u64()
}

//! Command-line driver: config files, run directories, sweeps, data-swap
//! grids, checkpoint re-scoring and gradient checks.
//!
//! Exit codes: 0 success, 1 usage or config error (and failed gradient
//! checks), 2 IO error, 3 sweep with failing cells.

mod cli;
mod commands;
mod config;
mod output;

pub use cli::{run_cli, Cli, Command};
pub use commands::{
    checkpoint_paths, cmd_dataswap, cmd_eval, cmd_gradcheck, cmd_run, cmd_sweep, RunSummary, SweepCell, SweepSummary,
    CHECKPOINTS, CONFIG_SNAPSHOT, DATASET, MANIFEST, METRICS, REPORTS,
};
pub use config::{effective_toml, parse_config, parse_config_str};
pub use output::{fmt_f64, run_id, write_aggregate_csv, write_grid_csv, write_metrics_csv, RunLabels, RunManifest, METRICS_HEADER};

/// Environment variables `COUPLED_LAB__SECTION__KEY=value` override config
/// keys; values are read as TOML literals, falling back to plain strings.
pub const ENV_PREFIX: &str = "COUPLED_LAB";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("{0}")]
    Run(String),
    #[error("{failed} of {total} sweep cells failed")]
    PartialSweep { failed: usize, total: usize },
    #[error("{0} gradient check(s) failed")]
    GradCheck(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 2,
            CliError::PartialSweep { .. } => 3,
            _ => 1,
        }
    }
}

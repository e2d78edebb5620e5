use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::losses::LossKind;
use crate::trainer::ExperimentConfig;

use super::commands::{cmd_dataswap, cmd_eval, cmd_gradcheck, cmd_run, cmd_sweep, MANIFEST};
use super::config::parse_config;
use super::output::{write_metrics_csv, RunLabels, RunManifest};
use super::CliError;

/// Coupled forward-model / controller learning experiments.
#[derive(Debug, Parser)]
#[command(name = "coupled-lab", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One learning run into its own directory.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        loss: Option<LossKind>,
        /// Rerun even if the directory holds this exact finished run.
        #[arg(long)]
        force: bool,
    },
    /// Every combination of losses, seeds and targets.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated; all four objectives by default.
        #[arg(long, value_delimiter = ',')]
        loss: Vec<LossKind>,
        /// Comma-separated; the config seed by default.
        #[arg(long, value_delimiter = ',')]
        seed: Vec<u64>,
        /// Comma-separated target indices; the config target by default.
        #[arg(long, value_delimiter = ',')]
        targets: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long)]
        force: bool,
    },
    /// Retrain both objectives from scratch on two runs' datasets.
    Dataswap {
        run_a: PathBuf,
        run_b: PathBuf,
        /// Defaults to the config recorded in `run_a`.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-score a run's checkpoints with a fresh rollout.
    Eval {
        run_dir: PathBuf,
        /// Defaults to the final iteration.
        #[arg(long)]
        iteration: Option<usize>,
        /// Also write the row as a metrics file here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference checks of every objective.
    Gradcheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Babbling transitions in the check batch.
        #[arg(long, default_value_t = 16)]
        rows: usize,
    },
}

fn load(config: Option<&Path>) -> Result<ExperimentConfig, CliError> {
    match config {
        Some(p) => parse_config(p),
        // defaults, still subject to environment overrides
        None => super::config::parse_config_str("", std::env::vars()),
    }
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { config, out, seed, loss, force } => {
            let mut cfg = load(config.as_deref())?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.loss = loss.unwrap_or(cfg.loss);
            let s = cmd_run(&cfg, &out, force)?;
            if let Some(last) = s.reports.last() {
                println!(
                    "{} {} tracking_mse={:.6e} fwd_pred_mse={:.6e}{}",
                    s.run_id,
                    if s.skipped { "skipped" } else { "done" },
                    last.tracking_mse,
                    last.fwd_pred_mse,
                    last.force_track_mse.map(|f| format!(" force_track_mse={f:.6e}")).unwrap_or_default()
                );
            }
            Ok(())
        }
        Command::Sweep { config, out, loss, seed, targets, parallel, force } => {
            let cfg = load(config.as_deref())?;
            let losses = if loss.is_empty() { LossKind::ALL.to_vec() } else { loss };
            let seeds = if seed.is_empty() { vec![cfg.seed] } else { seed };
            let targets = if targets.is_empty() { vec![cfg.task.target] } else { targets };
            let s = cmd_sweep(&cfg, &losses, &seeds, &targets, &out, parallel, force)?;
            println!("{} cells, {} failed", s.cells.len(), s.failed());
            match s.failed() {
                0 => Ok(()),
                n => Err(CliError::PartialSweep { failed: n, total: s.cells.len() }),
            }
        }
        Command::Dataswap { run_a, run_b, config, out, seed } => {
            let mut cfg = match config {
                Some(p) => parse_config(&p)?,
                None => RunManifest::load(&run_a.join(MANIFEST))?.config,
            };
            cfg.seed = seed.unwrap_or(cfg.seed);
            let grid = cmd_dataswap(&run_a, &run_b, &cfg, &out)?;
            println!("objective          data_a        data_b");
            for (k, row) in grid.losses.iter().zip(grid.tracking_mse) {
                println!("{:<18} {:.6e}  {:.6e}", k.as_str(), row[0], row[1]);
            }
            Ok(())
        }
        Command::Eval { run_dir, iteration, out } => {
            let report = cmd_eval(&run_dir, iteration)?;
            let manifest = RunManifest::load(&run_dir.join(MANIFEST))?;
            let labels = RunLabels::new(&manifest.run_id, &manifest.config);
            let path = out.unwrap_or_else(|| run_dir.join("eval.csv"));
            write_metrics_csv(std::slice::from_ref(&report), &labels, &path)?;
            print!("{}", std::fs::read_to_string(&path).map_err(|e| super::output::io_err(&path, e))?);
            Ok(())
        }
        Command::Gradcheck { config, seed, rows } => {
            let mut cfg = load(config.as_deref())?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            let entries = cmd_gradcheck(&cfg, rows)?;
            for e in &entries {
                println!("{:<20} params={:<6} max_rel_error={:.3e} {}", e.name, e.params, e.max_rel_error, if e.passed { "ok" } else { "FAIL" });
            }
            match entries.iter().filter(|e| !e.passed).count() {
                0 => Ok(()),
                n => Err(CliError::GradCheck(n)),
            }
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are printed to stderr.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

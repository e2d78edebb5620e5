use std::fs;
use std::path::{Path, PathBuf};

use crate::losses::LossKind;
use crate::metrics::{aggregate_stats, IterationReport};
use crate::nn::{Checkpoint, ControllerModel, EnsembleForwardModel};
use crate::trainer::{data_swap_experiment, evaluate, gradient_checks, run_learning_loop_with, Dataset, ExperimentConfig, GradCheckEntry, TrainError};

use super::config::effective_toml;
use super::output::{
    io_err, read_reports_json, write_aggregate_csv, write_file, write_grid_csv, write_metrics_csv, write_reports_json,
    RunLabels, RunManifest,
};
use super::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_SNAPSHOT: &str = "config.toml";
pub const METRICS: &str = "metrics.csv";
pub const REPORTS: &str = "reports.json";
pub const DATASET: &str = "dataset.csv";
pub const CHECKPOINTS: &str = "checkpoints";

fn train_err(e: TrainError) -> CliError {
    match e {
        TrainError::Io(m) | TrainError::CorruptDataset(m) => CliError::Io(m),
        TrainError::Config(m) => CliError::Config(m),
        other => CliError::Run(other.to_string()),
    }
}

pub fn checkpoint_paths(run_dir: &Path, iteration: usize) -> (PathBuf, PathBuf) {
    let dir = run_dir.join(CHECKPOINTS);
    (dir.join(format!("iter{iteration:03}_forward.json")), dir.join(format!("iter{iteration:03}_controller.json")))
}

/// What [`cmd_run`] did.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub run_id: String,
    pub reports: Vec<IterationReport>,
    /// An identical finished run was already in the directory.
    pub skipped: bool,
}

fn finished_run(out: &Path, run_id: &str) -> Option<Vec<IterationReport>> {
    let manifest = RunManifest::load(&out.join(MANIFEST)).ok()?;
    if manifest.run_id != run_id || !out.join(METRICS).is_file() {
        return None;
    }
    read_reports_json(&out.join(REPORTS)).ok()
}

/// Runs the learning loop and writes the run directory: manifest, effective
/// config, `metrics.csv`, `reports.json`, per-iteration checkpoints and the
/// final dataset. A directory already holding the finished run with the same
/// id is left alone unless `force` is set.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path, force: bool) -> Result<RunSummary, CliError> {
    cfg.validate().map_err(train_err)?;
    let manifest = RunManifest::new(cfg)?;
    if !force {
        if let Some(reports) = finished_run(out, &manifest.run_id) {
            log::info!("{}: run {} already complete, skipping", out.display(), manifest.run_id);
            return Ok(RunSummary { run_id: manifest.run_id, reports, skipped: true });
        }
    }
    let ck_dir = out.join(CHECKPOINTS);
    fs::create_dir_all(&ck_dir).map_err(|e| io_err(&ck_dir, e))?;
    // stale results must not survive a failed rerun
    for name in [METRICS, REPORTS] {
        let p = out.join(name);
        if p.exists() {
            fs::remove_file(&p).map_err(|e| io_err(&p, e))?;
        }
    }
    manifest.save(&out.join(MANIFEST))?;
    write_file(&out.join(CONFIG_SNAPSHOT), &effective_toml(cfg)?)?;

    let mut io_failure = None;
    let result = run_learning_loop_with(cfg, &mut |r, f, g| {
        let (fp, gp) = checkpoint_paths(out, r.iteration);
        let saved = f.to_checkpoint().save(&fp).and_then(|_| g.to_checkpoint().save(&gp));
        if let Err(e) = saved {
            io_failure = Some(e.to_string());
            return Err(TrainError::Io(e.to_string()));
        }
        log::info!(
            "{} iteration {}: tracking {:.3e}, forward {:.3e}{}",
            r.loss_kind,
            r.iteration,
            r.tracking_mse,
            r.fwd_pred_mse,
            if r.diverged { " (diverged)" } else { "" }
        );
        Ok(())
    });
    if let Some(m) = io_failure {
        return Err(CliError::Io(m));
    }
    let output = result.map_err(train_err)?;
    output.dataset.write_csv(&out.join(DATASET)).map_err(train_err)?;
    let labels = RunLabels::new(&manifest.run_id, cfg);
    write_reports_json(&output.reports, &out.join(REPORTS))?;
    write_metrics_csv(&output.reports, &labels, &out.join(METRICS))?;
    Ok(RunSummary { run_id: manifest.run_id, reports: output.reports, skipped: false })
}

/// One cell of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub loss: LossKind,
    pub seed: u64,
    pub target: usize,
}

impl SweepCell {
    pub fn dir_name(&self) -> String {
        format!("{}_s{}_t{}", self.loss.as_str(), self.seed, self.target)
    }
}

/// Outcome of [`cmd_sweep`]; per-cell results are in cell order.
#[derive(Debug)]
pub struct SweepSummary {
    pub cells: Vec<SweepCell>,
    pub results: Vec<Result<RunSummary, CliError>>,
}

impl SweepSummary {
    pub fn failed(&self) -> usize {
        self.results.iter().filter(|r| r.is_err()).count()
    }
}

/// Every (loss, seed, target) combination as an independent run in its own
/// subdirectory of `out`, on `parallel` worker threads, followed by
/// `aggregate.csv` over the successful cells. Failing cells are logged and
/// listed in `failures.txt`; the sweep carries on.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    losses: &[LossKind],
    seeds: &[u64],
    targets: &[usize],
    out: &Path,
    parallel: usize,
    force: bool,
) -> Result<SweepSummary, CliError> {
    for (name, empty) in [("losses", losses.is_empty()), ("seeds", seeds.is_empty()), ("targets", targets.is_empty())] {
        if empty {
            return Err(CliError::Usage(format!("sweep needs at least one entry in {name}")));
        }
    }
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let cells: Vec<SweepCell> = losses
        .iter()
        .flat_map(|&loss| seeds.iter().flat_map(move |&seed| targets.iter().map(move |&target| SweepCell { loss, seed, target })))
        .collect();
    let run_cell = |cell: &SweepCell| {
        let mut c = cfg.clone();
        c.loss = cell.loss;
        c.seed = cell.seed;
        c.task.target = cell.target;
        let r = cmd_run(&c, &out.join(cell.dir_name()), force);
        if let Err(e) = &r {
            log::error!("sweep cell {}: {e}", cell.dir_name());
        }
        r
    };
    let results: Vec<Result<RunSummary, CliError>> = if parallel <= 1 {
        cells.iter().map(run_cell).collect()
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
        pool.install(|| cells.par_iter().map(run_cell).collect())
    };

    let runs: Vec<Vec<IterationReport>> =
        results.iter().filter_map(|r| r.as_ref().ok()).map(|s| s.reports.clone()).filter(|r| !r.is_empty()).collect();
    if !runs.is_empty() {
        let rows = aggregate_stats(&runs).map_err(|e| CliError::Run(e.to_string()))?;
        write_aggregate_csv(&rows, &out.join("aggregate.csv"))?;
    }
    let failures: Vec<String> = cells
        .iter()
        .zip(&results)
        .filter_map(|(c, r)| r.as_ref().err().map(|e| format!("{}: {e}", c.dir_name())))
        .collect();
    let fail_path = out.join("failures.txt");
    if failures.is_empty() {
        if fail_path.exists() {
            fs::remove_file(&fail_path).map_err(|e| io_err(&fail_path, e))?;
        }
    } else {
        write_file(&fail_path, &(failures.join("\n") + "\n"))?;
    }
    Ok(SweepSummary { cells, results })
}

fn load_dataset(run_dir: &Path) -> Result<Dataset, CliError> {
    let path = run_dir.join(DATASET);
    if !path.is_file() {
        return Err(CliError::Io(format!("{}: no dataset dump", path.display())));
    }
    Dataset::read_csv(&path).map_err(train_err)
}

/// Retrains both objectives on the datasets dumped in two run directories and
/// writes `grid.csv` to `out`.
pub fn cmd_dataswap(run_a: &Path, run_b: &Path, cfg: &ExperimentConfig, out: &Path) -> Result<crate::trainer::DataSwapGrid, CliError> {
    let a = load_dataset(run_a)?;
    let b = load_dataset(run_b)?;
    let grid = data_swap_experiment(&a, &b, cfg).map_err(train_err)?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    write_grid_csv(&grid, &out.join("grid.csv"))?;
    let sources = serde_json::json!({ "a": run_a, "b": run_b, "grid": &grid });
    write_file(&out.join("dataswap.json"), &serde_json::to_string_pretty(&sources).map_err(|e| io_err(out, e))?)?;
    Ok(grid)
}

/// Re-scores the checkpoints of one iteration of a finished run (the last one
/// by default) with a fresh evaluation rollout.
pub fn cmd_eval(run_dir: &Path, iteration: Option<usize>) -> Result<IterationReport, CliError> {
    let manifest = RunManifest::load(&run_dir.join(MANIFEST))?;
    let cfg = manifest.config;
    let it = iteration.unwrap_or(cfg.schedule.iterations);
    let (fp, gp) = checkpoint_paths(run_dir, it);
    let load = |p: &Path| Checkpoint::load(p).map_err(|e| CliError::Io(e.to_string()));
    let f = EnsembleForwardModel::from_checkpoint(&load(&fp)?).map_err(|e| io_err(&fp, e))?;
    let g = ControllerModel::from_checkpoint(&load(&gp)?).map_err(|e| io_err(&gp, e))?;
    let task = cfg.build_task().map_err(train_err)?;
    let (_, report) =
        evaluate(&f, &g, &task, cfg.horizon(&task), cfg.schedule.divergence_bound, cfg.loss, it).map_err(train_err)?;
    Ok(report)
}

/// Finite-difference checks of every objective under `cfg`.
pub fn cmd_gradcheck(cfg: &ExperimentConfig, rows: usize) -> Result<Vec<GradCheckEntry>, CliError> {
    gradient_checks(cfg, rows).map_err(train_err)
}

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::metrics::{AggregateRow, IterationReport};
use crate::trainer::{DataSwapGrid, ExperimentConfig};

use super::CliError;

pub const METRICS_HEADER: &str = "run_id,iteration,loss_kind,plant,task_id,seed,tracking_mse,fwd_pred_mse,pred_task_err,force_track_mse,ctrl_loss_final,fwd_loss_final,diverged,wall_time_s";

pub(crate) fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Identity of a run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub tool_version: String,
    /// Seconds since the Unix epoch; not part of the run identity.
    pub started_at: u64,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let config = cfg.effective().map_err(|e| CliError::Config(e.to_string()))?;
        let started_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Ok(Self { run_id: run_id(&config)?, tool_version: env!("CARGO_PKG_VERSION").to_string(), started_at, config })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| io_err(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| io_err(path, e))?;
        write_file(path, &text)
    }
}

/// First 16 hex digits of the SHA-256 of the effective config (seed
/// included) serialized as JSON.
pub fn run_id(effective: &ExperimentConfig) -> Result<String, CliError> {
    let json = serde_json::to_vec(effective).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(hex::encode(&Sha256::digest(&json)[..8]))
}

/// Row labels shared by every line of a run's metrics file.
#[derive(Clone, Debug, PartialEq)]
pub struct RunLabels {
    pub run_id: String,
    pub plant: String,
    pub task_id: String,
    pub seed: u64,
}

impl RunLabels {
    pub fn new(run_id: &str, cfg: &ExperimentConfig) -> Self {
        let task_id = if cfg.task.goal.is_some() { "custom".to_string() } else { cfg.task.target.to_string() };
        Self { run_id: run_id.to_string(), plant: cfg.plant.name().as_str().to_string(), task_id, seed: cfg.seed }
    }
}

/// 17 significant digits, enough to read back the identical `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per report under [`METRICS_HEADER`]; the force column is empty
/// for plants without contact.
pub fn write_metrics_csv(reports: &[IterationReport], labels: &RunLabels, path: &Path) -> Result<(), CliError> {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in reports {
        let force = r.force_track_mse.map(fmt_f64).unwrap_or_default();
        let fields = [
            labels.run_id.clone(),
            r.iteration.to_string(),
            r.loss_kind.as_str().to_string(),
            labels.plant.clone(),
            labels.task_id.clone(),
            labels.seed.to_string(),
            fmt_f64(r.tracking_mse),
            fmt_f64(r.fwd_pred_mse),
            fmt_f64(r.pred_task_err),
            force,
            fmt_f64(r.ctrl_loss_final),
            fmt_f64(r.fwd_loss_final),
            r.diverged.to_string(),
            fmt_f64(r.wall_time_s),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn write_reports_json(reports: &[IterationReport], path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string(reports).map_err(|e| io_err(path, e))?;
    write_file(path, &text)
}

pub fn read_reports_json(path: &Path) -> Result<Vec<IterationReport>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

pub fn write_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["loss_kind", "iteration", "metric", "runs", "mean", "std"]).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record([
            r.loss_kind.as_str().to_string(),
            r.iteration.to_string(),
            r.metric.as_str().to_string(),
            r.runs.to_string(),
            fmt_f64(r.mean),
            fmt_f64(r.std),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Rows are the retrained objectives, columns the two datasets.
pub fn write_grid_csv(grid: &DataSwapGrid, path: &Path) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut text = String::from("loss_kind,tracking_mse_a,tracking_mse_b,diverged_a,diverged_b\n");
    for (kind, (mse, div)) in grid.losses.iter().zip(grid.tracking_mse.iter().zip(&grid.diverged)) {
        text.push_str(&format!("{},{},{},{},{}\n", kind.as_str(), fmt_f64(mse[0]), fmt_f64(mse[1]), div[0], div[1]));
    }
    f.write_all(text.as_bytes()).map_err(|e| io_err(path, e))
}

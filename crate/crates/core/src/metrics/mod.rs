//! Diagnostics reported per learning iteration, all in raw physical units.

use serde::{Deserialize, Serialize};

use crate::diffcore::Matrix;
use crate::losses::LossKind;
use crate::nn::{ControllerModel, EnsembleForwardModel, NnError};
use crate::tasks::Task;
use crate::trainer::Transition;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("{0}: no samples")]
    Empty(&'static str),
    #[error("{what}: {left} samples against {right}")]
    LengthMismatch { what: &'static str, left: usize, right: usize },
    #[error("force tracking needs a contact plant")]
    NotContact,
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Metrics of one learning iteration, measured on a fresh evaluation rollout
/// with the models frozen. Row 0 is the evaluation after pretraining on
/// babbling data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub loss_kind: LossKind,
    /// Position-only tracking error.
    pub tracking_mse: f64,
    /// Tracking error over positions and velocities.
    pub tracking_mse_full: f64,
    pub fwd_pred_mse: f64,
    pub pred_task_err: f64,
    /// Contact plants only.
    pub force_track_mse: Option<f64>,
    pub ctrl_loss_final: f64,
    pub fwd_loss_final: f64,
    pub diverged: bool,
    /// Training hit a non-finite value or failed; the row's models are the
    /// last good ones.
    pub training_failed: bool,
    pub wall_time_s: f64,
}

/// Mean over samples and compared dimensions of the squared difference.
pub fn tracking_mse<A: AsRef<[f64]>, B: AsRef<[f64]>>(realized: &[A], reference: &[B]) -> Result<f64, MetricsError> {
    if realized.len() != reference.len() {
        return Err(MetricsError::LengthMismatch { what: "tracking", left: realized.len(), right: reference.len() });
    }
    if realized.is_empty() {
        return Err(MetricsError::Empty("tracking"));
    }
    let (mut total, mut count) = (0.0, 0usize);
    for (a, b) in realized.iter().zip(reference) {
        let (a, b) = (a.as_ref(), b.as_ref());
        if a.len() != b.len() {
            return Err(MetricsError::LengthMismatch { what: "tracking dimension", left: a.len(), right: b.len() });
        }
        total += a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        count += a.len();
    }
    Ok(total / count as f64)
}

/// Realized and reference values a rollout is scored on: each logged next
/// state against the reference at the following control step. With
/// `with_velocity` the velocities are appended to the positions.
pub fn tracking_pairs(task: &Task, rollout: &[Transition], with_velocity: bool) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    rollout
        .iter()
        .map(|t| {
            let r = task.reference(t.t_index + 1);
            let mut real = task.positions(&t.s_next).to_vec();
            let mut want = r.pos;
            if with_velocity {
                real.extend_from_slice(task.velocities(&t.s_next));
                want.extend(r.vel);
            }
            (real, want)
        })
        .unzip()
}

/// Position-only tracking error of a rollout against the task reference.
pub fn rollout_tracking_mse(task: &Task, rollout: &[Transition], with_velocity: bool) -> Result<f64, MetricsError> {
    let (real, want) = tracking_pairs(task, rollout, with_velocity);
    tracking_mse(&real, &want)
}

fn stack(rows: &[Transition], pick: fn(&Transition) -> &[f64]) -> Matrix {
    let cols = rows.first().map(|t| pick(t).len()).unwrap_or(0);
    Matrix::from_rows(&rows.iter().map(pick).collect::<Vec<_>>(), cols)
}

fn mean_sq_norm(a: &Matrix, b: &Matrix) -> f64 {
    let total: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum();
    total / a.rows() as f64
}

/// Mean over transitions of `‖f(s, τ_run) − s_next‖²` with the logged actions.
pub fn forward_pred_mse(f: &EnsembleForwardModel, rows: &[Transition]) -> Result<f64, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::Empty("forward prediction"));
    }
    let p = f.predict_batch(&stack(rows, |t| &t.s), &stack(rows, |t| &t.tau_run))?;
    Ok(mean_sq_norm(&p, &stack(rows, |t| &t.s_next)))
}

/// Mean over transitions of `‖f(s, g(s, s*))[target] − s*‖²`, the error the
/// models believe the controller achieves. The action is the unclamped
/// controller output, as inside the controller objectives.
pub fn predicted_task_error(f: &EnsembleForwardModel, g: &ControllerModel, rows: &[Transition]) -> Result<f64, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::Empty("predicted task error"));
    }
    let s = stack(rows, |t| &t.s);
    let sd = stack(rows, |t| &t.s_desired);
    let mut graph = crate::diffcore::Graph::new();
    let tau = g.forward(&mut graph, &s, &sd)?;
    let p = f.predict(&mut graph, &s, tau)?;
    let p = graph.select_cols(p, &g.target_dims);
    Ok(mean_sq_norm(graph.data(p), &sd))
}

/// Mean squared difference between the measured contact force after each
/// step and the force reference at that time.
pub fn force_tracking_mse(task: &Task, rollout: &[Transition]) -> Result<f64, MetricsError> {
    let idx = task.force_index().ok_or(MetricsError::NotContact)?;
    let measured: Vec<[f64; 1]> = rollout.iter().map(|t| [t.s_next[idx]]).collect();
    let wanted: Vec<[f64; 1]> =
        rollout.iter().map(|t| [task.reference(t.t_index + 1).f_ref.unwrap_or(0.0)]).collect();
    tracking_mse(&measured, &wanted)
}

/// Numeric report columns that can be aggregated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    TrackingMse,
    TrackingMseFull,
    FwdPredMse,
    PredTaskErr,
    ForceTrackMse,
    CtrlLossFinal,
    FwdLossFinal,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::TrackingMse,
        Metric::TrackingMseFull,
        Metric::FwdPredMse,
        Metric::PredTaskErr,
        Metric::ForceTrackMse,
        Metric::CtrlLossFinal,
        Metric::FwdLossFinal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::TrackingMse => "tracking_mse",
            Metric::TrackingMseFull => "tracking_mse_full",
            Metric::FwdPredMse => "fwd_pred_mse",
            Metric::PredTaskErr => "pred_task_err",
            Metric::ForceTrackMse => "force_track_mse",
            Metric::CtrlLossFinal => "ctrl_loss_final",
            Metric::FwdLossFinal => "fwd_loss_final",
        }
    }

    pub fn of(self, r: &IterationReport) -> Option<f64> {
        match self {
            Metric::TrackingMse => Some(r.tracking_mse),
            Metric::TrackingMseFull => Some(r.tracking_mse_full),
            Metric::FwdPredMse => Some(r.fwd_pred_mse),
            Metric::PredTaskErr => Some(r.pred_task_err),
            Metric::ForceTrackMse => r.force_track_mse,
            Metric::CtrlLossFinal => Some(r.ctrl_loss_final),
            Metric::FwdLossFinal => Some(r.fwd_loss_final),
        }
    }
}

/// One point of an aggregated learning curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub loss_kind: LossKind,
    pub iteration: usize,
    pub metric: Metric,
    pub runs: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

/// Mean and sample standard deviation across runs, per loss, iteration and
/// metric. Runs of one loss with different lengths are cut to the shortest.
/// Output is ordered by first appearance of the loss, then iteration, then
/// metric.
pub fn aggregate_stats(runs: &[Vec<IterationReport>]) -> Result<Vec<AggregateRow>, MetricsError> {
    if runs.is_empty() {
        return Err(MetricsError::Empty("aggregate"));
    }
    let mut losses: Vec<LossKind> = Vec::new();
    for r in runs {
        let k = r.first().map(|x| x.loss_kind).ok_or(MetricsError::Empty("aggregate run"))?;
        if !losses.contains(&k) {
            losses.push(k);
        }
    }
    let mut out = Vec::new();
    for kind in losses {
        let group: Vec<&Vec<IterationReport>> = runs.iter().filter(|r| r[0].loss_kind == kind).collect();
        let shortest = group.iter().map(|r| r.len()).min().unwrap_or(0);
        if group.iter().any(|r| r.len() != shortest) {
            log::warn!("{kind}: runs have different lengths; truncating to {shortest} iterations");
        }
        for it in 0..shortest {
            for metric in Metric::ALL {
                let vals: Vec<f64> = group.iter().filter_map(|r| metric.of(&r[it])).collect();
                if vals.is_empty() {
                    continue;
                }
                let (mean, std) = mean_std(&vals);
                out.push(AggregateRow { loss_kind: kind, iteration: group[0][it].iteration, metric, runs: vals.len(), mean, std });
            }
        }
    }
    Ok(out)
}

/// Mean and sample (n − 1) standard deviation; the deviation of a single
/// value is 0.
pub fn mean_std(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

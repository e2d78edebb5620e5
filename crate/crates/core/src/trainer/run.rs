use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::losses::{LossKind, LossSpace};
use crate::metrics::{forward_pred_mse, force_tracking_mse, predicted_task_error, rollout_tracking_mse, IterationReport};
use crate::nn::{ControllerModel, EnsembleForwardModel};
use crate::tasks::Task;

use super::fit::controller_rows;
use super::{
    derive_seed, fit_normalizers, motor_babble, rollout, train_controller, train_forward_model, BabbleSettings, Dataset,
    ExperimentConfig, Provenance, Rollout, Source, Stream, TrainError, TrainOutcome, TrainSettings,
};

/// Everything a finished learning run leaves behind.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub reports: Vec<IterationReport>,
    pub dataset: Dataset,
    pub forward: EnsembleForwardModel,
    pub controller: ControllerModel,
    pub task: Task,
}

/// Freshly initialized forward model and controller for `task`.
pub fn build_models(cfg: &ExperimentConfig, task: &Task) -> Result<(EnsembleForwardModel, ControllerModel), TrainError> {
    let n = &cfg.networks;
    let f = EnsembleForwardModel::new(
        task.state_dim(),
        task.action_dim(),
        &n.forward_hidden,
        n.forward_activation,
        n.ensemble_size,
        derive_seed(cfg.seed, Stream::ForwardInit, 0),
    )?;
    let g = ControllerModel::new(
        task.state_dim(),
        task.target_dims(),
        task.action_dim(),
        &n.controller_hidden,
        n.controller_activation,
        task.plant.torque_limit.clone(),
        derive_seed(cfg.seed, Stream::ControllerInit, 0),
    )?;
    Ok((f, g))
}

fn metric_or_nan<E: std::fmt::Display>(r: Result<f64, E>, what: &str) -> f64 {
    r.unwrap_or_else(|e| {
        log::warn!("{what}: {e}");
        f64::NAN
    })
}

/// One closed-loop rollout with frozen models, scored. The training-loss
/// fields of the report are left NaN for the caller to fill in.
pub fn evaluate(
    f: &EnsembleForwardModel,
    g: &ControllerModel,
    task: &Task,
    horizon: usize,
    divergence_bound: f64,
    kind: LossKind,
    iteration: usize,
) -> Result<(Rollout, IterationReport), TrainError> {
    let start = Instant::now();
    let ro = rollout(g, task, horizon, divergence_bound)?;
    let rows = &ro.transitions;
    let report = IterationReport {
        iteration,
        loss_kind: kind,
        tracking_mse: metric_or_nan(rollout_tracking_mse(task, rows, false), "tracking"),
        tracking_mse_full: metric_or_nan(rollout_tracking_mse(task, rows, true), "tracking"),
        fwd_pred_mse: metric_or_nan(forward_pred_mse(f, rows), "forward prediction"),
        pred_task_err: metric_or_nan(predicted_task_error(f, g, rows), "predicted task error"),
        force_track_mse: task.force_index().map(|_| metric_or_nan(force_tracking_mse(task, rows), "force tracking")),
        ctrl_loss_final: f64::NAN,
        fwd_loss_final: f64::NAN,
        diverged: ro.diverged,
        training_failed: false,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((ro, report))
}

fn settings(cfg: &ExperimentConfig, epochs: usize, adam: crate::nn::AdamConfig, seed: u64) -> TrainSettings {
    TrainSettings { epochs, batch_size: cfg.optimizer.batch_size, adam, seed }
}

/// Outcome of a training call, with failures logged and folded into the flag.
fn settle(r: Result<TrainOutcome, TrainError>, what: &str, failed: &mut bool) -> f64 {
    match r {
        Ok(o) => {
            if o.non_finite {
                log::warn!("{what}: non-finite value, epoch rolled back");
                *failed = true;
            }
            o.loss
        }
        Err(e) => {
            log::warn!("{what}: {e}");
            *failed = true;
            f64::NAN
        }
    }
}

/// Fits normalizers on `pretrain_rows`, then trains the forward model on them
/// and the controller on them with the inverse supervised objective.
fn pretrain(
    cfg: &ExperimentConfig,
    f: &mut EnsembleForwardModel,
    g: &mut ControllerModel,
    data: &Dataset,
    pretrain_rows: &[usize],
) -> (f64, f64, bool) {
    fit_normalizers(f, g, data, pretrain_rows);
    let o = &cfg.optimizer;
    let mut failed = false;
    let fs = settings(cfg, o.pretrain_epochs, o.forward_adam(), derive_seed(cfg.seed, Stream::Pretrain, 0));
    let fwd = settle(train_forward_model(f, data, pretrain_rows, &fs), "forward pretraining", &mut failed);
    let gs = settings(cfg, o.pretrain_epochs, o.controller_adam(), derive_seed(cfg.seed, Stream::Pretrain, 1));
    let space = LossSpace::from_models(f, g);
    let r = train_controller(g, f, LossKind::InverseSupervised, data, pretrain_rows, &space, &gs);
    let ctrl = settle(r, "controller pretraining", &mut failed);
    (fwd, ctrl, failed)
}

/// One alternating round: forward model on all of `data`, then the controller
/// with `kind` on its eligible rows.
fn train_round(
    cfg: &ExperimentConfig,
    kind: LossKind,
    f: &mut EnsembleForwardModel,
    g: &mut ControllerModel,
    data: &Dataset,
    iteration: usize,
) -> (f64, f64, bool) {
    let o = &cfg.optimizer;
    let mut failed = false;
    let all: Vec<usize> = (0..data.len()).collect();
    let fs = settings(cfg, o.forward_epochs, o.forward_adam(), derive_seed(cfg.seed, Stream::Iteration, 2 * iteration as u64));
    let fwd = settle(train_forward_model(f, data, &all, &fs), "forward training", &mut failed);
    let rows = controller_rows(data, kind, iteration, cfg.schedule.controller_window);
    let gs =
        settings(cfg, o.controller_epochs, o.controller_adam(), derive_seed(cfg.seed, Stream::Iteration, 2 * iteration as u64 + 1));
    let space = LossSpace::from_models(f, g);
    let ctrl = settle(train_controller(g, f, kind, data, &rows, &space, &gs), "controller training", &mut failed);
    (fwd, ctrl, failed)
}

pub fn run_learning_loop(cfg: &ExperimentConfig) -> Result<RunOutput, TrainError> {
    run_learning_loop_with(cfg, &mut |_, _, _| Ok(()))
}

/// The coupled learning loop:
///
/// 1. babble, fit the normalizers and pretrain both models on the babbling data;
/// 2. evaluate (report row 0);
/// 3. for each iteration: append the latest evaluation rollout to the dataset,
///    train the forward model, train the controller with the configured
///    objective, evaluate.
///
/// The evaluation rollout of one iteration is exactly what the next
/// iteration's collection rollout would record (models and plant are
/// deterministic), so it is reused as the new data. Training failures are
/// flagged in the report and the loop carries on. `on_iteration` sees every
/// report with the models that produced it.
pub fn run_learning_loop_with(
    cfg: &ExperimentConfig,
    on_iteration: &mut dyn FnMut(&IterationReport, &EnsembleForwardModel, &ControllerModel) -> Result<(), TrainError>,
) -> Result<RunOutput, TrainError> {
    cfg.validate()?;
    let task = cfg.build_task()?;
    let horizon = cfg.horizon(&task);
    let bound = cfg.schedule.divergence_bound;
    let kind = cfg.loss;
    let started = Instant::now();

    let babble = BabbleSettings {
        steps: cfg.schedule.babble_steps,
        smoothing: cfg.schedule.babble_smoothing,
        amplitude: cfg.schedule.babble_amplitude,
        episode: task.horizon().max(1),
        divergence_bound: bound,
        seed: derive_seed(cfg.seed, Stream::Babble, 0),
    };
    let mut data = motor_babble(&task, &babble)?;
    if data.is_empty() {
        return Err(TrainError::EmptyDataset("babbling produced no transitions".into()));
    }
    let (mut f, mut g) = build_models(cfg, &task)?;
    let all: Vec<usize> = (0..data.len()).collect();
    let (fwd, ctrl, failed) = pretrain(cfg, &mut f, &mut g, &data, &all);

    let mut reports = Vec::with_capacity(cfg.schedule.iterations + 1);
    let (mut last, mut report) = evaluate(&f, &g, &task, horizon, bound, kind, 0)?;
    report.fwd_loss_final = fwd;
    report.ctrl_loss_final = ctrl;
    report.training_failed = failed;
    report.wall_time_s = started.elapsed().as_secs_f64();
    on_iteration(&report, &f, &g)?;
    reports.push(report);

    for i in 1..=cfg.schedule.iterations {
        let t0 = Instant::now();
        data.extend(&last.into_dataset(Provenance { iteration: i, source: Source::Rollout(kind) }));
        let (fwd, ctrl, failed) = train_round(cfg, kind, &mut f, &mut g, &data, i);
        let (ro, mut report) = evaluate(&f, &g, &task, horizon, bound, kind, i)?;
        report.fwd_loss_final = fwd;
        report.ctrl_loss_final = ctrl;
        report.training_failed = failed;
        report.wall_time_s = t0.elapsed().as_secs_f64();
        if report.diverged {
            log::warn!("iteration {i}: evaluation rollout diverged");
        }
        on_iteration(&report, &f, &g)?;
        reports.push(report);
        last = ro;
    }
    Ok(RunOutput { reports, dataset: data, forward: f, controller: g, task })
}

/// Position tracking MSE of controllers retrained from scratch on fixed data.
/// Rows are the objectives (joint, task); columns the datasets (A, B).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSwapGrid {
    pub losses: [LossKind; 2],
    pub tracking_mse: [[f64; 2]; 2],
    pub diverged: [[bool; 2]; 2],
}

/// Retrains fresh models for every (objective, dataset) pair without
/// collecting new data: normalizers and pretraining on the dataset's babbling
/// rows (all rows if it has none), then `dataswap_rounds` alternating rounds
/// on the whole dataset, then one evaluation rollout.
pub fn data_swap_experiment(a: &Dataset, b: &Dataset, cfg: &ExperimentConfig) -> Result<DataSwapGrid, TrainError> {
    cfg.validate()?;
    for (name, d) in [("A", a), ("B", b)] {
        if d.is_empty() {
            return Err(TrainError::EmptyDataset(format!("dataset {name}")));
        }
    }
    let task = cfg.build_task()?;
    let horizon = cfg.horizon(&task);
    let losses = [LossKind::Joint, LossKind::Task];
    let mut grid = DataSwapGrid { losses, tracking_mse: [[f64::NAN; 2]; 2], diverged: [[false; 2]; 2] };
    for (r, &kind) in losses.iter().enumerate() {
        for (c, data) in [a, b].into_iter().enumerate() {
            let (mut f, mut g) = build_models(cfg, &task)?;
            let babble = data.select(|p| p.source == Source::Babble);
            let pre = if babble.is_empty() { (0..data.len()).collect() } else { babble };
            pretrain(cfg, &mut f, &mut g, data, &pre);
            let last_iteration = data.provenance().iter().map(|p| p.iteration).max().unwrap_or(0);
            for round in 1..=cfg.schedule.dataswap_rounds {
                train_round(cfg, kind, &mut f, &mut g, data, last_iteration.max(round));
            }
            let (_, report) = evaluate(&f, &g, &task, horizon, cfg.schedule.divergence_bound, kind, 0)?;
            grid.tracking_mse[r][c] = report.tracking_mse;
            grid.diverged[r][c] = report.diverged;
        }
    }
    Ok(grid)
}

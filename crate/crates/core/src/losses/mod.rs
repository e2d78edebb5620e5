//! Training objectives for the forward model and the controller.
//!
//! Controller objectives evaluate `s_p = f(s, g(s, s*))` with the forward
//! model frozen, so gradients reach only the controller through `f`:
//!
//! | kind                 | per-sample loss                         |
//! |----------------------|-----------------------------------------|
//! | `task`               | `‖s_p − s*‖²`                           |
//! | `joint`              | `‖s_p − s*‖² + ‖s_p − s_next‖²`         |
//! | `distal_teacher`     | `‖s_p − s*‖² − ‖s_p − s_next‖²`         |
//! | `inverse_supervised` | `‖g(s, s_next) − τ_run‖²`               |
//!
//! `s_next` is the logged observation that followed `τ_run`, while `τ` inside
//! `s_p` is recomputed with the current controller. Errors are measured in a
//! [`LossSpace`]: each state dimension is divided by a scale (the forward
//! model's delta spread by default) so that positions, velocities and forces
//! weigh in comparably. With unit scales the formulas above hold verbatim.
//!
//! The desired state covers only the task's target dimensions; the
//! observed-state term of the joint loss covers the whole state, while the
//! distal-teacher terms both use the target dimensions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diffcore::{DiffError, Graph, Matrix, Value};
use crate::nn::{gaussian_nll_sum, ControllerModel, EnsembleForwardModel, NnError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("forward-model parameters must be frozen for controller losses")]
    ThetaNotFrozen,
    #[error("{what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Diff(#[from] DiffError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Joint,
    Task,
    InverseSupervised,
    DistalTeacher,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::Joint, LossKind::Task, LossKind::InverseSupervised, LossKind::DistalTeacher];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Joint => "joint",
            LossKind::Task => "task",
            LossKind::InverseSupervised => "inverse_supervised",
            LossKind::DistalTeacher => "distal_teacher",
        }
    }

    /// Whether the objective differentiates through the forward model.
    pub fn uses_forward_model(self) -> bool {
        self != LossKind::InverseSupervised
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown loss `{s}` (expected joint, task, inverse_supervised or distal_teacher)"))
    }
}

/// Aligned rows of logged transitions.
#[derive(Clone, Debug, PartialEq)]
pub struct LossBatch {
    /// `s_t`, one row per sample.
    pub s: Matrix,
    /// `s*_{t+1}` over the target dimensions.
    pub s_desired: Matrix,
    /// `s_{t+1}` as observed.
    pub s_observed: Matrix,
    /// `τ_t^run` as executed.
    pub tau_run: Matrix,
}

impl LossBatch {
    pub fn new(s: Matrix, s_desired: Matrix, s_observed: Matrix, tau_run: Matrix) -> Result<Self, LossError> {
        let n = s.rows();
        for (what, m) in [("desired rows", &s_desired), ("observed rows", &s_observed), ("action rows", &tau_run)] {
            if m.rows() != n {
                return Err(LossError::Dimension { what, expected: n, got: m.rows() });
            }
        }
        if s_observed.cols() != s.cols() {
            return Err(LossError::Dimension { what: "observed state width", expected: s.cols(), got: s_observed.cols() });
        }
        Ok(Self { s, s_desired, s_observed, tau_run })
    }

    pub fn len(&self) -> usize {
        self.s.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-dimension error scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpace {
    pub target_dims: Vec<usize>,
    /// One entry per state dimension.
    pub state_scale: Vec<f64>,
    /// One entry per action dimension.
    pub action_scale: Vec<f64>,
}

impl LossSpace {
    pub fn unit(state_dim: usize, target_dims: Vec<usize>, action_dim: usize) -> Self {
        Self { target_dims, state_scale: vec![1.0; state_dim], action_scale: vec![1.0; action_dim] }
    }

    /// Scales taken from the models' fitted normalizers.
    pub fn from_models(f: &EnsembleForwardModel, g: &ControllerModel) -> Self {
        Self {
            target_dims: g.target_dims.clone(),
            state_scale: f.delta_norm.std.clone(),
            action_scale: g.action_norm.std.clone(),
        }
    }

    pub fn target_scale(&self) -> Vec<f64> {
        self.target_dims.iter().map(|&d| self.state_scale[d]).collect()
    }
}

/// `mean_rows Σ_cols ((a − b) / scale)²`
fn scaled_sq_mean(g: &mut Graph, a: Value, b: Value, scale: &[f64]) -> Value {
    let n = g.data(a).rows() as f64;
    let diff = g.sub(a, b);
    let inv: Vec<f64> = scale.iter().map(|s| 1.0 / s).collect();
    let inv = g.constant(Matrix::row(&inv));
    let z = g.mul(diff, inv);
    let sq = g.square(z);
    let total = g.sum(sq);
    g.scale(total, 1.0 / n)
}

fn check_nonempty(batch: &LossBatch) -> Result<(), LossError> {
    if batch.is_empty() {
        Err(LossError::EmptyBatch)
    } else {
        Ok(())
    }
}

fn check_frozen(f: &EnsembleForwardModel) -> Result<(), LossError> {
    if f.store.all_frozen() {
        Ok(())
    } else {
        Err(LossError::ThetaNotFrozen)
    }
}

/// Mean gaussian negative log-likelihood of ensemble member `k` on the
/// normalized state deltas of the batch, with `τ_run` entering as data.
pub fn forward_sup_loss(g: &mut Graph, f: &EnsembleForwardModel, k: usize, batch: &LossBatch) -> Result<Value, LossError> {
    check_nonempty(batch)?;
    let tau = g.constant(batch.tau_run.clone());
    let input = f.network_input(g, &batch.s, tau)?;
    let out = f.member_forward(g, k, input)?;
    let target = f.delta_targets(&batch.s, &batch.s_observed);
    let lv = out.log_var.expect("forward members have a gaussian head");
    let total = gaussian_nll_sum(g, out.mean, lv, &target);
    Ok(g.scale(total, 1.0 / batch.len() as f64))
}

/// `s_p = f(s, g(s, s*))` with gradients flowing into the controller.
fn predicted_next(g: &mut Graph, f: &EnsembleForwardModel, ctrl: &ControllerModel, batch: &LossBatch) -> Result<Value, LossError> {
    let tau = ctrl.forward(g, &batch.s, &batch.s_desired)?;
    Ok(f.predict(g, &batch.s, tau)?)
}

pub fn task_loss(
    g: &mut Graph,
    f: &EnsembleForwardModel,
    ctrl: &ControllerModel,
    batch: &LossBatch,
    space: &LossSpace,
) -> Result<Value, LossError> {
    check_nonempty(batch)?;
    check_frozen(f)?;
    let sp = predicted_next(g, f, ctrl, batch)?;
    let sp_t = g.select_cols(sp, &space.target_dims);
    let sd = g.constant(batch.s_desired.clone());
    Ok(scaled_sq_mean(g, sp_t, sd, &space.target_scale()))
}

/// Ignores `s_desired`: the controller is asked for the action that produced
/// each logged observation.
pub fn inverse_sup_loss(g: &mut Graph, ctrl: &ControllerModel, batch: &LossBatch, space: &LossSpace) -> Result<Value, LossError> {
    check_nonempty(batch)?;
    let mut reached = Matrix::zeros(batch.len(), space.target_dims.len());
    for r in 0..batch.len() {
        for (j, &d) in space.target_dims.iter().enumerate() {
            reached.set(r, j, batch.s_observed.get(r, d));
        }
    }
    let tau = ctrl.forward(g, &batch.s, &reached)?;
    let run = g.constant(batch.tau_run.clone());
    Ok(scaled_sq_mean(g, tau, run, &space.action_scale))
}

pub fn joint_loss(
    g: &mut Graph,
    f: &EnsembleForwardModel,
    ctrl: &ControllerModel,
    batch: &LossBatch,
    space: &LossSpace,
) -> Result<Value, LossError> {
    check_nonempty(batch)?;
    check_frozen(f)?;
    let sp = predicted_next(g, f, ctrl, batch)?;
    let sp_t = g.select_cols(sp, &space.target_dims);
    let sd = g.constant(batch.s_desired.clone());
    let sa = g.constant(batch.s_observed.clone());
    let task = scaled_sq_mean(g, sp_t, sd, &space.target_scale());
    let model = scaled_sq_mean(g, sp, sa, &space.state_scale);
    Ok(g.add(task, model))
}

/// Literal squared form; its controller gradient is
/// `2 (∂f/∂τ)(∂τ/∂β)(s_a − s_d)` on the target dimensions.
pub fn distal_teacher_loss(
    g: &mut Graph,
    f: &EnsembleForwardModel,
    ctrl: &ControllerModel,
    batch: &LossBatch,
    space: &LossSpace,
) -> Result<Value, LossError> {
    check_nonempty(batch)?;
    check_frozen(f)?;
    let sp = predicted_next(g, f, ctrl, batch)?;
    let sp_t = g.select_cols(sp, &space.target_dims);
    let sd = g.constant(batch.s_desired.clone());
    let mut obs_t = Matrix::zeros(batch.len(), space.target_dims.len());
    for r in 0..batch.len() {
        for (j, &d) in space.target_dims.iter().enumerate() {
            obs_t.set(r, j, batch.s_observed.get(r, d));
        }
    }
    let sa = g.constant(obs_t);
    let scale = space.target_scale();
    let to_desired = scaled_sq_mean(g, sp_t, sd, &scale);
    let to_observed = scaled_sq_mean(g, sp_t, sa, &scale);
    Ok(g.sub(to_desired, to_observed))
}

/// Graph for the selected controller objective.
pub fn controller_loss(
    g: &mut Graph,
    kind: LossKind,
    f: &EnsembleForwardModel,
    ctrl: &ControllerModel,
    batch: &LossBatch,
    space: &LossSpace,
) -> Result<Value, LossError> {
    match kind {
        LossKind::Joint => joint_loss(g, f, ctrl, batch, space),
        LossKind::Task => task_loss(g, f, ctrl, batch, space),
        LossKind::InverseSupervised => inverse_sup_loss(g, ctrl, batch, space),
        LossKind::DistalTeacher => distal_teacher_loss(g, f, ctrl, batch, space),
    }
}

/// Loss value and gradient over the controller parameters. The forward model
/// is frozen for the call and its previous flags restored afterwards.
pub fn controller_grad(
    kind: LossKind,
    f: &mut EnsembleForwardModel,
    ctrl: &ControllerModel,
    batch: &LossBatch,
    space: &LossSpace,
) -> Result<(f64, Vec<f64>), LossError> {
    check_nonempty(batch)?;
    let flags = f.store.frozen_flags();
    f.store.freeze_all();
    let result = (|| {
        let mut g = Graph::new();
        let root = controller_loss(&mut g, kind, f, ctrl, batch, space)?;
        let grads = g.backward(root, &ctrl.store)?;
        Ok((g.scalar_value(root), grads))
    })();
    f.store.restore_frozen_flags(&flags);
    result
}

#[cfg(test)]
mod tests;

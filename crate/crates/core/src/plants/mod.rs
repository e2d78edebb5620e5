//! Ground-truth simulators.
//!
//! All plants integrate with semi-implicit Euler (velocity first, then
//! position with the new velocity) at `dt`; a control step holds the action
//! for `substeps` integration steps. Observation layouts:
//!
//! | plant    | observation          |
//! |----------|----------------------|
//! | pendulum | `[θ, θ̇]`             |
//! | arm(n)   | `[q_1..q_n, q̇_1..q̇_n]` |
//! | hopper   | `[x, f_c, ẋ]`        |
//!
//! The pendulum angle is measured from the hanging equilibrium. Arm angles are
//! relative joint angles with `q = 0` pointing along +x and gravity along −y.

mod arm;
mod hopper;
mod pendulum;

pub use arm::{arm_accel, arm_mass_matrix, arm_step, fk_ee, gravity_torque, EndEffector};
pub use hopper::{contact_force, hopper_step};
pub use pendulum::pendulum_step;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlantError {
    #[error("non-finite plant input")]
    NonFinite,
    #[error("{op} called on a {kind} plant")]
    WrongKind { op: &'static str, kind: &'static str },
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("mass matrix is not positive definite")]
    SingularMass,
    #[error("invalid plant spec: {0}")]
    InvalidSpec(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantKind {
    Pendulum { mass: f64, length: f64 },
    /// Planar serial chain of point masses at the link tips.
    Arm { masses: Vec<f64>, lengths: Vec<f64> },
    /// Point mass over a penalty-contact ground at `x = 0`.
    Hopper { mass: f64, stiffness: f64, damping: f64 },
}

/// Physical parameters plus integration settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub kind: PlantKind,
    pub gravity: f64,
    /// Viscous joint friction (pendulum and arm).
    pub friction: f64,
    /// Integration step in seconds.
    pub dt: f64,
    /// Integration steps per control period (zero-order hold).
    pub substeps: usize,
    /// Symmetric actuator bound per action dimension (N·m, or N for the hopper).
    pub torque_limit: Vec<f64>,
}

/// Simulator state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    /// Measured ground-reaction force; empty for non-contact plants.
    pub contact_force: Vec<f64>,
}

impl PlantSpec {
    pub fn pendulum() -> Self {
        Self {
            kind: PlantKind::Pendulum { mass: 1.0, length: 1.0 },
            gravity: 9.81,
            friction: 0.1,
            dt: 1e-3,
            substeps: 10,
            torque_limit: vec![20.0],
        }
    }

    pub fn arm(n: usize) -> Self {
        Self {
            kind: PlantKind::Arm { masses: vec![1.0; n], lengths: vec![1.0 / n as f64; n] },
            gravity: 9.81,
            friction: 0.5,
            dt: 1e-3,
            substeps: 10,
            torque_limit: vec![30.0; n],
        }
    }

    pub fn hopper() -> Self {
        Self {
            kind: PlantKind::Hopper { mass: 1.0, stiffness: 1000.0, damping: 10.0 },
            gravity: 9.81,
            friction: 0.0,
            dt: 1e-3,
            substeps: 10,
            torque_limit: vec![40.0],
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            PlantKind::Pendulum { .. } => "pendulum",
            PlantKind::Arm { .. } => "arm",
            PlantKind::Hopper { .. } => "hopper",
        }
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let bad = |m: &str| Err(PlantError::InvalidSpec(m.to_string()));
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if self.substeps == 0 {
            return bad("substeps must be at least 1");
        }
        if self.friction < 0.0 || self.gravity < 0.0 {
            return bad("friction and gravity must be non-negative");
        }
        if self.torque_limit.len() != self.action_dim() || self.torque_limit.iter().any(|&t| !(t >= 0.0)) {
            return bad("torque_limit needs one non-negative entry per action dimension");
        }
        match &self.kind {
            PlantKind::Pendulum { mass, length } => {
                if !(*mass > 0.0 && *length > 0.0) {
                    return bad("pendulum mass and length must be positive");
                }
            }
            PlantKind::Arm { masses, lengths } => {
                if masses.is_empty() || masses.len() != lengths.len() {
                    return bad("arm needs matching non-empty masses and lengths");
                }
                if masses.iter().chain(lengths).any(|&v| !(v > 0.0)) {
                    return bad("arm masses and lengths must be positive");
                }
            }
            PlantKind::Hopper { mass, stiffness, damping } => {
                if !(*mass > 0.0) || *stiffness < 0.0 || *damping < 0.0 {
                    return bad("hopper needs positive mass and non-negative stiffness/damping");
                }
            }
        }
        Ok(())
    }

    /// Generalized coordinates.
    pub fn dof(&self) -> usize {
        match &self.kind {
            PlantKind::Pendulum { .. } | PlantKind::Hopper { .. } => 1,
            PlantKind::Arm { masses, .. } => masses.len(),
        }
    }

    pub fn action_dim(&self) -> usize {
        self.dof()
    }

    pub fn observation_dim(&self) -> usize {
        match self.kind {
            PlantKind::Hopper { .. } => 3,
            _ => 2 * self.dof(),
        }
    }

    pub fn is_contact(&self) -> bool {
        matches!(self.kind, PlantKind::Hopper { .. })
    }

    pub fn control_period(&self) -> f64 {
        self.dt * self.substeps as f64
    }

    /// State at rest at `q`, with its contact force evaluated.
    pub fn rest_state(&self, q: &[f64]) -> PlantState {
        let qdot = vec![0.0; q.len()];
        let contact_force = match &self.kind {
            PlantKind::Hopper { .. } => vec![contact_force(q[0], 0.0, self)],
            _ => Vec::new(),
        };
        PlantState { q: q.to_vec(), qdot, contact_force }
    }

    pub fn clamp_action(&self, tau: &[f64]) -> Vec<f64> {
        tau.iter().zip(&self.torque_limit).map(|(t, l)| t.clamp(-l, *l)).collect()
    }

    /// One integration step.
    pub fn step(&self, state: &PlantState, tau: &[f64]) -> Result<PlantState, PlantError> {
        match self.kind {
            PlantKind::Pendulum { .. } => {
                check_len("pendulum torque", 1, tau.len())?;
                pendulum_step(state, tau[0], self)
            }
            PlantKind::Arm { .. } => arm_step(state, tau, self),
            PlantKind::Hopper { .. } => {
                check_len("hopper force", 1, tau.len())?;
                hopper_step(state, tau[0], self)
            }
        }
    }

    /// One control period: `substeps` integration steps under a held action.
    pub fn control_step(&self, state: &PlantState, tau: &[f64]) -> Result<PlantState, PlantError> {
        let mut s = state.clone();
        for _ in 0..self.substeps {
            s = self.step(&s, tau)?;
        }
        Ok(s)
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), PlantError> {
    if expected != got {
        return Err(PlantError::Dimension { what, expected, got });
    }
    Ok(())
}

pub(crate) fn check_finite(state: &PlantState, tau: &[f64]) -> Result<(), PlantError> {
    if state.q.iter().chain(&state.qdot).chain(tau).all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(PlantError::NonFinite)
    }
}

/// Observation vector in the fixed per-plant layout.
pub fn observe(state: &PlantState, spec: &PlantSpec) -> Vec<f64> {
    match spec.kind {
        PlantKind::Hopper { .. } => {
            let f = state.contact_force.first().copied().unwrap_or(0.0);
            vec![state.q[0], f, state.qdot[0]]
        }
        _ => state.q.iter().chain(&state.qdot).copied().collect(),
    }
}

/// Inverse of [`observe`].
pub fn state_from_observation(obs: &[f64], spec: &PlantSpec) -> PlantState {
    match spec.kind {
        PlantKind::Hopper { .. } => PlantState { q: vec![obs[0]], qdot: vec![obs[2]], contact_force: vec![obs[1]] },
        _ => {
            let n = spec.dof();
            PlantState { q: obs[..n].to_vec(), qdot: obs[n..2 * n].to_vec(), contact_force: Vec::new() }
        }
    }
}

//! Reference trajectories and desired next states.
//!
//! A [`Task`] binds a plant to a reference and defines the vector `y` the
//! learned models operate on, the subset of `y` that a desired next state
//! specifies, and how that desired state is built from the reference.

mod hopper;
mod task;

pub use hopper::{hopper_profile, HopperProfile};
pub use task::{evaluation_targets, Task};

use serde::{Deserialize, Serialize};

use crate::plants::PlantError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TaskError {
    #[error("trajectory duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("time {t} outside [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("goal {goal:?} outside the reachable workspace (radius {reach})")]
    OutOfWorkspace { goal: Vec<f64>, reach: f64 },
    #[error("infeasible profile: {0}")]
    Infeasible(String),
    #[error("{space:?} trajectories are not defined for a {plant} plant")]
    Incompatible { space: TaskSpace, plant: &'static str },
    #[error(transparent)]
    Plant(#[from] PlantError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskSpace {
    Joint,
    EndEffector,
    HopperProfile,
}

/// A reference to track.
///
/// * `Joint`: `start`/`goal` are joint configurations.
/// * `EndEffector`: `start` is the initial joint configuration, `goal` a 2-D
///   end-effector point.
/// * `HopperProfile`: `goal = [apex height]`; `start` is unused (the hop
///   starts from static stance).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub space: TaskSpace,
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    /// Seconds.
    pub duration: f64,
    /// Seconds between controller decisions.
    pub control_period: f64,
}

/// Reference sample at time `t`. For end-effector tasks the kinematic fields
/// are end-effector coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub t: f64,
    pub pos: Vec<f64>,
    pub vel: Vec<f64>,
    pub acc: Vec<f64>,
    /// Desired ground reaction (hopper only).
    pub f_ref: Option<f64>,
}

/// PD gains applied identically to every tracked dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub kp: f64,
    pub kd: f64,
}

impl Gains {
    /// Critically damped pair for a given stiffness.
    pub fn critical(kp: f64) -> Self {
        Self { kp, kd: 2.0 * kp.sqrt() }
    }

    pub fn zero() -> Self {
        Self { kp: 0.0, kd: 0.0 }
    }
}

impl Default for Gains {
    fn default() -> Self {
        Self::critical(10.0)
    }
}

/// Fifth-order rest-to-rest interpolation.
pub fn min_jerk(start: &[f64], goal: &[f64], duration: f64, t: f64) -> Result<ReferencePoint, TaskError> {
    if !(duration > 0.0) {
        return Err(TaskError::NonPositiveDuration(duration));
    }
    if start.len() != goal.len() {
        return Err(TaskError::Dimension { what: "min_jerk goal", expected: start.len(), got: goal.len() });
    }
    if !(0.0..=duration).contains(&t) {
        return Err(TaskError::TimeOutOfRange { t, duration });
    }
    let u = t / duration;
    let (u2, u3) = (u * u, u * u * u);
    let s = 10.0 * u3 - 15.0 * u3 * u + 6.0 * u3 * u2;
    let ds = (30.0 * u2 - 60.0 * u3 + 30.0 * u2 * u2) / duration;
    let dds = (60.0 * u - 180.0 * u2 + 120.0 * u3) / (duration * duration);
    let delta: Vec<f64> = start.iter().zip(goal).map(|(a, b)| b - a).collect();
    Ok(ReferencePoint {
        t,
        pos: start.iter().zip(&delta).map(|(a, d)| a + d * s).collect(),
        vel: delta.iter().map(|d| d * ds).collect(),
        acc: delta.iter().map(|d| d * dds).collect(),
        f_ref: None,
    })
}

/// Quintic matching position, velocity and acceleration at both ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quintic {
    c: [f64; 6],
    pub duration: f64,
}

impl Quintic {
    pub fn new(p0: f64, v0: f64, a0: f64, p1: f64, v1: f64, a1: f64, d: f64) -> Self {
        let (d2, d3) = (d * d, d * d * d);
        let dp = p1 - p0;
        let c3 = (20.0 * dp - (8.0 * v1 + 12.0 * v0) * d - (3.0 * a0 - a1) * d2) / (2.0 * d3);
        let c4 = (-30.0 * dp + (14.0 * v1 + 16.0 * v0) * d + (3.0 * a0 - 2.0 * a1) * d2) / (2.0 * d3 * d);
        let c5 = (12.0 * dp - 6.0 * (v1 + v0) * d - (a0 - a1) * d2) / (2.0 * d3 * d2);
        Self { c: [p0, v0, a0 / 2.0, c3, c4, c5], duration: d }
    }

    /// Position, velocity, acceleration at local time `s`.
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        let c = &self.c;
        let p = c[0] + s * (c[1] + s * (c[2] + s * (c[3] + s * (c[4] + s * c[5]))));
        let v = c[1] + s * (2.0 * c[2] + s * (3.0 * c[3] + s * (4.0 * c[4] + s * 5.0 * c[5])));
        let a = 2.0 * c[2] + s * (6.0 * c[3] + s * (12.0 * c[4] + s * 20.0 * c[5]));
        (p, v, a)
    }
}

/// PD-corrected desired acceleration `q̈_ref + K_p(q_ref − q) + K_d(q̇_ref − q̇)`.
pub fn desired_accel(pos: &[f64], vel: &[f64], r: &ReferencePoint, gains: Gains) -> Result<Vec<f64>, TaskError> {
    for (what, got) in [("desired_accel position", pos.len()), ("desired_accel velocity", vel.len())] {
        if got != r.pos.len() {
            return Err(TaskError::Dimension { what, expected: r.pos.len(), got });
        }
    }
    Ok((0..pos.len())
        .map(|i| r.acc[i] + gains.kp * (r.pos[i] - pos[i]) + gains.kd * (r.vel[i] - vel[i]))
        .collect())
}

/// Desired acceleration with the force reference appended for contact tasks.
pub fn desired_next(pos: &[f64], vel: &[f64], r: &ReferencePoint, gains: Gains) -> Result<Vec<f64>, TaskError> {
    let mut out = desired_accel(pos, vel, r, gains)?;
    out.extend(r.f_ref);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_jerk_boundaries_and_midpoint() {
        let r = min_jerk(&[1.0, -2.0], &[3.0, 2.0], 2.0, 0.0).unwrap();
        assert_eq!((r.pos, r.vel, r.acc), (vec![1.0, -2.0], vec![0.0, 0.0], vec![0.0, 0.0]));
        let r = min_jerk(&[1.0, -2.0], &[3.0, 2.0], 2.0, 2.0).unwrap();
        assert_eq!(r.pos, vec![3.0, 2.0]);
        assert!(r.vel.iter().chain(&r.acc).all(|v| v.abs() < 1e-12));
        let r = min_jerk(&[0.0], &[1.0], 2.0, 1.0).unwrap();
        assert!((r.pos[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn min_jerk_errors() {
        assert!(matches!(min_jerk(&[0.0], &[1.0], 0.0, 0.0), Err(TaskError::NonPositiveDuration(_))));
        assert!(min_jerk(&[0.0], &[1.0], 1.0, 1.5).is_err());
        assert!(min_jerk(&[0.0], &[1.0, 2.0], 1.0, 0.5).is_err());
    }

    #[test]
    fn min_jerk_derivatives_match_finite_differences() {
        let (t, h) = (0.37, 1e-6);
        let at = |t| min_jerk(&[0.2], &[1.7], 1.3, t).unwrap();
        let (p, m, c) = (at(t + h), at(t - h), at(t));
        assert!(((p.pos[0] - m.pos[0]) / (2.0 * h) - c.vel[0]).abs() < 1e-6);
        assert!(((p.vel[0] - m.vel[0]) / (2.0 * h) - c.acc[0]).abs() < 1e-6);
    }

    #[test]
    fn quintic_hits_boundary_conditions() {
        let q = Quintic::new(0.3, -1.0, 2.0, -0.4, 1.5, -9.81, 0.7);
        let (p, v, a) = q.eval(0.0);
        assert_eq!((p, v, a), (0.3, -1.0, 2.0));
        let (p, v, a) = q.eval(0.7);
        assert!((p + 0.4).abs() < 1e-12 && (v - 1.5).abs() < 1e-12 && (a + 9.81).abs() < 1e-10);
    }

    #[test]
    fn desired_accel_examples() {
        let r = ReferencePoint { t: 0.0, pos: vec![0.2], vel: vec![0.0], acc: vec![0.0], f_ref: None };
        let a = desired_accel(&[0.0], &[0.0], &r, Gains { kp: 1.0, kd: 0.0 }).unwrap();
        assert!((a[0] - 0.2).abs() < 1e-15);
        let r = ReferencePoint { t: 0.0, pos: vec![0.5], vel: vec![0.1], acc: vec![3.0], f_ref: Some(7.0) };
        assert_eq!(desired_next(&[0.5], &[0.1], &r, Gains::default()).unwrap(), vec![3.0, 7.0]);
        assert_eq!(desired_accel(&[9.0], &[9.0], &r, Gains::zero()).unwrap(), vec![3.0]);
        let g = Gains::default();
        assert!((g.kd - 2.0 * 10f64.sqrt()).abs() < 1e-15);
    }
}

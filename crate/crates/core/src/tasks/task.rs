use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::plants::{fk_ee, PlantKind, PlantSpec, PlantState};

use super::{desired_accel, min_jerk, Gains, HopperProfile, ReferencePoint, TaskError, TaskSpace, TrajectorySpec};

/// Fraction of the arm's reach kept free at the workspace boundary.
const WORKSPACE_MARGIN: f64 = 0.1;

/// A plant paired with a reference trajectory.
///
/// The model state `y` is the plant observation, extended for end-effector
/// tasks with the end-effector position and velocity:
///
/// | space        | `y`                              | target dims      |
/// |--------------|----------------------------------|------------------|
/// | joint        | `[q, q̇]`                         | all              |
/// | end-effector | `[q, q̇, x_ee, y_ee, ẋ_ee, ẏ_ee]` | the last four    |
/// | hopper       | `[x, f_c, ẋ]`                    | all              |
///
/// The desired next state is the state reached from `y` in one control period
/// under the PD-corrected desired acceleration held constant, integrated the
/// same way the plant integrates; for the hopper the force entry is the force
/// reference at the next control step.
#[derive(Clone, Debug)]
pub struct Task {
    pub plant: PlantSpec,
    pub traj: TrajectorySpec,
    pub gains: Gains,
    hopper: Option<HopperProfile>,
    ee_start: Vec<f64>,
}

impl Task {
    pub fn new(plant: PlantSpec, traj: TrajectorySpec, gains: Gains) -> Result<Self, TaskError> {
        plant.validate()?;
        if !(traj.duration > 0.0) {
            return Err(TaskError::NonPositiveDuration(traj.duration));
        }
        if (traj.control_period - plant.control_period()).abs() > 1e-12 {
            return Err(TaskError::Infeasible(format!(
                "control period {} does not match the plant's {}",
                traj.control_period,
                plant.control_period()
            )));
        }
        let incompatible = || TaskError::Incompatible { space: traj.space, plant: plant.kind_name() };
        let n = plant.dof();
        let dim = |what, expected, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(TaskError::Dimension { what, expected, got })
            }
        };
        let mut hopper = None;
        let mut ee_start = Vec::new();
        match (traj.space, &plant.kind) {
            (TaskSpace::Joint, PlantKind::Pendulum { .. } | PlantKind::Arm { .. }) => {
                dim("trajectory start", n, traj.start.len())?;
                dim("trajectory goal", n, traj.goal.len())?;
            }
            (TaskSpace::EndEffector, PlantKind::Arm { lengths, .. }) => {
                dim("trajectory start", n, traj.start.len())?;
                dim("end-effector goal", 2, traj.goal.len())?;
                let reach: f64 = lengths.iter().sum();
                if traj.goal[0].hypot(traj.goal[1]) > reach * (1.0 - WORKSPACE_MARGIN) {
                    return Err(TaskError::OutOfWorkspace { goal: traj.goal.clone(), reach });
                }
                let z = vec![0.0; n];
                ee_start = fk_ee(&traj.start, &z, &z, &plant)?.pos.to_vec();
            }
            (TaskSpace::HopperProfile, PlantKind::Hopper { .. }) => {
                dim("hop height", 1, traj.goal.len())?;
                hopper = Some(HopperProfile::new(traj.goal[0], traj.duration, &plant)?);
            }
            _ => return Err(incompatible()),
        }
        Ok(Self { plant, traj, gains, hopper, ee_start })
    }

    pub fn space(&self) -> TaskSpace {
        self.traj.space
    }

    pub fn control_period(&self) -> f64 {
        self.plant.control_period()
    }

    /// Control steps covering the reference.
    pub fn horizon(&self) -> usize {
        (self.traj.duration / self.control_period()).round() as usize
    }

    pub fn action_dim(&self) -> usize {
        self.plant.action_dim()
    }

    pub fn state_dim(&self) -> usize {
        match self.traj.space {
            TaskSpace::EndEffector => 2 * self.plant.dof() + 4,
            _ => self.plant.observation_dim(),
        }
    }

    pub fn target_dims(&self) -> Vec<usize> {
        match self.traj.space {
            TaskSpace::EndEffector => {
                let n = self.plant.dof();
                (2 * n..2 * n + 4).collect()
            }
            _ => (0..self.state_dim()).collect(),
        }
    }

    /// Index of the contact-force entry in `y`, if any.
    pub fn force_index(&self) -> Option<usize> {
        self.hopper.as_ref().map(|_| 1)
    }

    pub fn initial_state(&self) -> PlantState {
        match &self.hopper {
            Some(p) => self.plant.rest_state(&[p.stance_height]),
            None => self.plant.rest_state(&self.traj.start),
        }
    }

    pub fn model_state(&self, obs: &[f64]) -> Vec<f64> {
        let mut y = obs.to_vec();
        if self.traj.space == TaskSpace::EndEffector {
            let n = self.plant.dof();
            let ee = fk_ee(&obs[..n], &obs[n..2 * n], &vec![0.0; n], &self.plant)
                .expect("observation matches the arm dimension");
            y.extend(ee.pos);
            y.extend(ee.vel);
        }
        y
    }

    /// Reference at control step `k`; held at the final sample past the end.
    pub fn reference(&self, k: usize) -> ReferencePoint {
        let t = (k as f64 * self.control_period()).min(self.traj.duration);
        match (&self.hopper, self.traj.space) {
            (Some(p), _) => p.eval(t),
            (None, TaskSpace::EndEffector) => {
                min_jerk(&self.ee_start, &self.traj.goal, self.traj.duration, t).expect("validated trajectory")
            }
            _ => min_jerk(&self.traj.start, &self.traj.goal, self.traj.duration, t).expect("validated trajectory"),
        }
    }

    /// Tracked positions within `y`: joint angles, end-effector point, or height.
    pub fn positions<'a>(&self, y: &'a [f64]) -> &'a [f64] {
        let n = self.plant.dof();
        match self.traj.space {
            TaskSpace::Joint => &y[..n],
            TaskSpace::EndEffector => &y[2 * n..2 * n + 2],
            TaskSpace::HopperProfile => &y[..1],
        }
    }

    pub fn velocities<'a>(&self, y: &'a [f64]) -> &'a [f64] {
        let n = self.plant.dof();
        match self.traj.space {
            TaskSpace::Joint => &y[n..2 * n],
            TaskSpace::EndEffector => &y[2 * n + 2..2 * n + 4],
            TaskSpace::HopperProfile => &y[2..3],
        }
    }

    /// Desired values of the target dims of `y` at step `k + 1`.
    pub fn desired(&self, y: &[f64], k: usize) -> Vec<f64> {
        let r = self.reference(k + 1);
        let (p, v) = (self.positions(y), self.velocities(y));
        let a = desired_accel(p, v, &r, self.gains).expect("reference matches the task dimension");
        let h = self.control_period();
        let n = self.plant.substeps as f64;
        // position gain of a held acceleration under n semi-implicit substeps
        let c = h * h * (n + 1.0) / (2.0 * n);
        let pos: Vec<f64> = (0..p.len()).map(|i| p[i] + h * v[i] + c * a[i]).collect();
        let vel: Vec<f64> = (0..p.len()).map(|i| v[i] + h * a[i]).collect();
        match r.f_ref {
            Some(f) => vec![pos[0], f, vel[0]],
            None => pos.into_iter().chain(vel).collect(),
        }
    }
}

/// Deterministic set of `count` evaluation trajectories for a plant and space.
pub fn evaluation_targets(plant: &PlantSpec, space: TaskSpace, duration: f64, seed: u64, count: usize) -> Vec<TrajectorySpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let period = plant.control_period();
    let n = plant.dof();
    let mk = |start: Vec<f64>, goal: Vec<f64>| TrajectorySpec { space, start, goal, duration, control_period: period };
    (0..count)
        .map(|_| match (space, &plant.kind) {
            (TaskSpace::HopperProfile, _) => mk(vec![], vec![rng.gen_range(0.03..0.07)]),
            (TaskSpace::EndEffector, PlantKind::Arm { lengths, .. }) => {
                let start = arm_home(n);
                let z = vec![0.0; n];
                let p0 = fk_ee(&start, &z, &z, plant).map(|e| e.pos).unwrap_or([0.0, 0.0]);
                let reach: f64 = lengths.iter().sum();
                loop {
                    let r = reach * rng.gen_range(0.15..0.35);
                    let ang: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    let goal = vec![p0[0] + r * ang.cos(), p0[1] + r * ang.sin()];
                    let d = goal[0].hypot(goal[1]);
                    if d <= reach * (1.0 - WORKSPACE_MARGIN) && d >= 0.2 * reach {
                        break mk(start, goal);
                    }
                }
            }
            (_, PlantKind::Pendulum { .. }) => {
                let mag: f64 = rng.gen_range(0.4..1.2);
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                mk(vec![0.0], vec![sign * mag])
            }
            _ => {
                let start = arm_home(n);
                let goal = start.iter().map(|s| s + rng.gen_range(-0.6..0.6)).collect();
                mk(start, goal)
            }
        })
        .collect()
}

/// Bent, non-singular starting posture hanging below the shoulder.
fn arm_home(n: usize) -> Vec<f64> {
    let mut q = vec![0.6; n];
    q[0] = -1.2;
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pendulum_task(goal: f64) -> Task {
        let plant = PlantSpec::pendulum();
        let traj = TrajectorySpec {
            space: TaskSpace::Joint,
            start: vec![0.0],
            goal: vec![goal],
            duration: 1.0,
            control_period: plant.control_period(),
        };
        Task::new(plant, traj, Gains::default()).unwrap()
    }

    #[test]
    fn desired_state_on_reference_is_reference_consistent() {
        let task = pendulum_task(0.0);
        let y = task.model_state(&[0.0, 0.0]);
        assert_eq!(task.desired(&y, 3), vec![0.0, 0.0]);
        assert_eq!(task.horizon(), 100);
    }

    #[test]
    fn desired_state_matches_plant_integration_under_held_acceleration() {
        // free mass: constant acceleration a held for a control period
        let task = pendulum_task(1.0);
        let y = [0.3, -0.2];
        let d = task.desired(&y, 10);
        let r = task.reference(11);
        let a = r.acc[0] + 10.0 * (r.pos[0] - 0.3) + 2.0 * 10f64.sqrt() * (r.vel[0] + 0.2);
        let (mut q, mut v) = (0.3, -0.2);
        for _ in 0..10 {
            v += 1e-3 * a;
            q += 1e-3 * v;
        }
        assert!((d[0] - q).abs() < 1e-14 && (d[1] - v).abs() < 1e-14);
    }

    #[test]
    fn end_effector_task_layout() {
        let plant = PlantSpec::arm(3);
        let traj = evaluation_targets(&plant, TaskSpace::EndEffector, 2.0, 0, 5);
        assert_eq!(traj.len(), 5);
        let task = Task::new(plant, traj[0].clone(), Gains::default()).unwrap();
        assert_eq!(task.state_dim(), 10);
        assert_eq!(task.target_dims(), vec![6, 7, 8, 9]);
        let s = task.initial_state();
        let y = task.model_state(&crate::plants::observe(&s, &task.plant));
        assert_eq!(task.positions(&y), &task.reference(0).pos[..]);
        assert_eq!(task.desired(&y, 0).len(), 4);
    }

    #[test]
    fn hopper_task_layout() {
        let plant = PlantSpec::hopper();
        let traj = evaluation_targets(&plant, TaskSpace::HopperProfile, 1.2, 0, 5);
        let task = Task::new(plant, traj[0].clone(), Gains::default()).unwrap();
        assert_eq!(task.force_index(), Some(1));
        let s = task.initial_state();
        assert!((s.contact_force[0] - 9.81).abs() < 1e-12);
        let y = crate::plants::observe(&s, &task.plant);
        let d = task.desired(&y, 0);
        assert!((d[1] - 9.81).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_tasks() {
        let plant = PlantSpec::arm(3);
        let far = TrajectorySpec {
            space: TaskSpace::EndEffector,
            start: vec![0.0; 3],
            goal: vec![5.0, 0.0],
            duration: 1.0,
            control_period: 0.01,
        };
        assert!(matches!(Task::new(plant.clone(), far, Gains::default()), Err(TaskError::OutOfWorkspace { .. })));
        let wrong = TrajectorySpec {
            space: TaskSpace::HopperProfile,
            start: vec![],
            goal: vec![0.05],
            duration: 1.0,
            control_period: 0.01,
        };
        assert!(matches!(Task::new(plant, wrong, Gains::default()), Err(TaskError::Incompatible { .. })));
    }

    #[test]
    fn targets_are_seeded() {
        let p = PlantSpec::pendulum();
        let a = evaluation_targets(&p, TaskSpace::Joint, 2.0, 7, 5);
        assert_eq!(a, evaluation_targets(&p, TaskSpace::Joint, 2.0, 7, 5));
        assert_ne!(a, evaluation_targets(&p, TaskSpace::Joint, 2.0, 8, 5));
    }
}

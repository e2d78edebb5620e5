use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::nn::ControllerModel;
use crate::plants::{observe, PlantState};
use crate::tasks::Task;

use super::{Dataset, Provenance, Source, TrainError, Transition};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BabbleSettings {
    pub steps: usize,
    /// Low-pass coefficient `a` in `u ← a·u + (1 − a)·noise`.
    pub smoothing: f64,
    /// Noise range as a fraction of the torque limit.
    pub amplitude: f64,
    /// Episode length in control steps; the plant is reset to the task's
    /// initial state at every episode start.
    pub episode: usize,
    pub divergence_bound: f64,
    pub seed: u64,
}

fn out_of_bounds(y: &[f64], bound: f64) -> bool {
    y.iter().any(|x| !x.is_finite() || x.abs() > bound)
}

/// Random exploration data. Each row's `s_desired` is the task's desired next
/// state for the row's state and in-episode step; rows are flagged as babble
/// so that objectives comparing against `s*` skip them.
///
/// If the plant leaves `divergence_bound`, collection stops and the rows so
/// far are kept.
pub fn motor_babble(task: &Task, settings: &BabbleSettings) -> Result<Dataset, TrainError> {
    if settings.steps == 0 {
        return Err(TrainError::ZeroCount("babble steps"));
    }
    let plant = &task.plant;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let limits: Vec<f64> = plant.torque_limit.iter().map(|l| l * settings.amplitude).collect();
    let episode = settings.episode.max(1);
    let a = settings.smoothing;
    let mut out = Dataset::new();
    let mut u = vec![0.0; plant.action_dim()];
    let mut state = task.initial_state();
    for step in 0..settings.steps {
        let k = step % episode;
        if k == 0 {
            state = task.initial_state();
            u.iter_mut().for_each(|x| *x = 0.0);
        }
        for (x, l) in u.iter_mut().zip(&limits) {
            let noise = if *l > 0.0 { rng.gen_range(-l..=*l) } else { 0.0 };
            *x = a * *x + (1.0 - a) * noise;
        }
        let tau = plant.clamp_action(&u);
        let y = task.model_state(&observe(&state, plant));
        let next = match plant.control_step(&state, &tau) {
            Ok(n) => n,
            Err(e) => {
                log::warn!("babbling stopped after {step} steps: {e}");
                break;
            }
        };
        let obs = observe(&next, plant);
        if out_of_bounds(&obs, settings.divergence_bound) {
            log::warn!("babbling stopped after {step} steps: state left the divergence bound");
            break;
        }
        let t = Transition { s_desired: task.desired(&y, k), s: y, tau_run: tau, s_next: task.model_state(&obs), t_index: k };
        out.push(t, Provenance { iteration: 0, source: Source::Babble });
        state = next;
    }
    Ok(out)
}

/// A closed-loop run of a controller on a task.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub transitions: Vec<Transition>,
    /// The plant left the divergence bound or produced a non-finite state;
    /// `transitions` holds the prefix before that.
    pub diverged: bool,
}

impl Rollout {
    pub fn into_dataset(self, provenance: Provenance) -> Dataset {
        let mut d = Dataset::new();
        for t in self.transitions {
            d.push(t, provenance);
        }
        d
    }
}

/// Runs `g` for `horizon` control steps from the task's initial state. At each
/// step `s*` comes from the task, the clamped controller action is held for
/// one control period, and the transition is logged.
pub fn rollout(g: &ControllerModel, task: &Task, horizon: usize, divergence_bound: f64) -> Result<Rollout, TrainError> {
    let plant = &task.plant;
    let mut state: PlantState = task.initial_state();
    let mut transitions = Vec::with_capacity(horizon);
    let mut diverged = false;
    for k in 0..horizon {
        let y = task.model_state(&observe(&state, plant));
        let s_desired = task.desired(&y, k);
        let tau = g.act(&y, &s_desired)?;
        if tau.iter().any(|x| !x.is_finite()) {
            diverged = true;
            break;
        }
        let next = match plant.control_step(&state, &tau) {
            Ok(n) => n,
            Err(_) => {
                diverged = true;
                break;
            }
        };
        let obs = observe(&next, plant);
        if out_of_bounds(&obs, divergence_bound) {
            diverged = true;
            break;
        }
        transitions.push(Transition { s: y, tau_run: tau, s_next: task.model_state(&obs), s_desired, t_index: k });
        state = next;
    }
    Ok(Rollout { transitions, diverged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use crate::plants::PlantSpec;
    use crate::tasks::{Gains, TaskSpace, TrajectorySpec};

    fn pendulum_task(plant: PlantSpec, start: f64, goal: f64) -> Task {
        let traj = TrajectorySpec {
            space: TaskSpace::Joint,
            start: vec![start],
            goal: vec![goal],
            duration: 1.0,
            control_period: plant.control_period(),
        };
        Task::new(plant, traj, Gains::default()).unwrap()
    }

    fn settings(steps: usize) -> BabbleSettings {
        BabbleSettings { steps, smoothing: 0.7, amplitude: 1.0, episode: 50, divergence_bound: 1e3, seed: 9 }
    }

    #[test]
    fn babble_needs_steps() {
        let task = pendulum_task(PlantSpec::pendulum(), 0.0, 0.5);
        assert_eq!(motor_babble(&task, &settings(0)), Err(TrainError::ZeroCount("babble steps")));
    }

    #[test]
    fn babble_is_deterministic_and_within_limits() {
        let task = pendulum_task(PlantSpec::pendulum(), 0.0, 0.5);
        let a = motor_babble(&task, &settings(120)).unwrap();
        let b = motor_babble(&task, &settings(120)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 120);
        assert!(a.transitions().iter().all(|t| t.tau_run[0].abs() <= 20.0));
        assert!(a.provenance().iter().all(|p| !p.desired_valid()));
        assert_eq!(a.transitions()[50].t_index, 0);
        assert_eq!(a.transitions()[50].s, vec![0.0, 0.0]);
        let c = motor_babble(&task, &BabbleSettings { seed: 10, ..settings(120) }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn babble_without_torque_stays_at_rest() {
        let mut plant = PlantSpec::pendulum();
        plant.torque_limit = vec![0.0];
        let task = pendulum_task(plant, 0.0, 0.5);
        let d = motor_babble(&task, &settings(80)).unwrap();
        for t in d.transitions() {
            assert_eq!(t.tau_run, vec![0.0]);
            assert_eq!(t.s, vec![0.0, 0.0]);
            assert_eq!(t.s_next, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn babble_truncates_on_divergence() {
        let task = pendulum_task(PlantSpec::pendulum(), 0.0, 0.5);
        let d = motor_babble(&task, &BabbleSettings { divergence_bound: 0.05, ..settings(200) }).unwrap();
        assert!(d.len() < 200);
        assert!(d.transitions().iter().all(|t| t.s_next.iter().all(|x| x.abs() <= 0.05)));
    }

    fn zero_controller(task: &Task) -> ControllerModel {
        let mut g = ControllerModel::new(2, task.target_dims(), 1, &[4], Activation::Tanh, vec![20.0], 3).unwrap();
        g.store.values_mut().iter_mut().for_each(|w| *w = 0.0);
        g
    }

    #[test]
    fn empty_horizon_gives_empty_rollout() {
        let task = pendulum_task(PlantSpec::pendulum(), 0.0, 0.5);
        let r = rollout(&zero_controller(&task), &task, 0, 1e3).unwrap();
        assert!(r.transitions.is_empty());
        assert!(!r.diverged);
    }

    #[test]
    fn resting_pendulum_under_zero_controller_stays_put() {
        let task = pendulum_task(PlantSpec::pendulum(), 0.0, 0.0);
        let r = rollout(&zero_controller(&task), &task, 30, 1e3).unwrap();
        assert_eq!(r.transitions.len(), 30);
        for (k, t) in r.transitions.iter().enumerate() {
            assert_eq!(t.t_index, k);
            assert_eq!(t.s_next, vec![0.0, 0.0]);
            assert_eq!(t.s_desired, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn logged_actions_respect_the_clamp() {
        let task = pendulum_task(PlantSpec::pendulum(), 0.0, 1.0);
        let mut g = zero_controller(&task);
        let n = g.store.len();
        // huge output bias
        g.store.values_mut()[n - 1] = 1e6;
        let r = rollout(&g, &task, 40, 1e6).unwrap();
        assert!(r.transitions.iter().all(|t| t.tau_run[0] == 20.0));
    }

    #[test]
    fn rollout_flags_divergence() {
        let task = pendulum_task(PlantSpec::pendulum(), 0.0, 1.0);
        let mut g = zero_controller(&task);
        let n = g.store.len();
        g.store.values_mut()[n - 1] = 1e6;
        let r = rollout(&g, &task, 100, 0.5).unwrap();
        assert!(r.diverged);
        assert!(r.transitions.len() < 100);
    }
}

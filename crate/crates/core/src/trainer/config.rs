use serde::{Deserialize, Serialize};

use crate::losses::LossKind;
use crate::nn::{Activation, AdamConfig};
use crate::plants::{PlantKind, PlantSpec};
use crate::tasks::{evaluation_targets, Gains, Task, TaskSpace, TrajectorySpec};

use super::TrainError;

/// Everything one learning run depends on. Every field has a default, so a
/// config file only needs to name what it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub loss: LossKind,
    pub plant: PlantConfig,
    pub task: TaskConfig,
    pub networks: NetworkConfig,
    pub optimizer: OptimizerConfig,
    #[serde(rename = "loop")]
    pub schedule: LoopConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            loss: LossKind::Joint,
            plant: PlantConfig::default(),
            task: TaskConfig::default(),
            networks: NetworkConfig::default(),
            optimizer: OptimizerConfig::default(),
            schedule: LoopConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantName {
    Pendulum,
    Arm,
    Hopper,
}

impl PlantName {
    pub fn as_str(self) -> &'static str {
        match self {
            PlantName::Pendulum => "pendulum",
            PlantName::Arm => "arm",
            PlantName::Hopper => "hopper",
        }
    }
}

/// `plant = "pendulum"` or a `[plant]` table with a `kind` and any overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlantConfig {
    Name(PlantName),
    Table(PlantTable),
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig::Name(PlantName::Pendulum)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantTable {
    pub kind: PlantName,
    /// Arm link count (default 3).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub links: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stiffness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gravity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub friction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub substeps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub torque_limit: Option<Vec<f64>>,
}

impl PlantConfig {
    pub fn name(&self) -> PlantName {
        match self {
            PlantConfig::Name(n) => *n,
            PlantConfig::Table(t) => t.kind,
        }
    }

    pub fn spec(&self) -> Result<PlantSpec, TrainError> {
        let t = match self {
            PlantConfig::Name(n) => PlantTable::bare(*n),
            PlantConfig::Table(t) => t.clone(),
        };
        let mut spec = match t.kind {
            PlantName::Pendulum => PlantSpec::pendulum(),
            PlantName::Arm => PlantSpec::arm(t.links.unwrap_or(3)),
            PlantName::Hopper => PlantSpec::hopper(),
        };
        let misplaced = |key: &str| TrainError::Config(format!("plant.{key} does not apply to a {} plant", t.kind.as_str()));
        match &mut spec.kind {
            PlantKind::Pendulum { mass, length } => {
                for (key, v) in [("links", t.links.is_some()), ("masses", t.masses.is_some()), ("lengths", t.lengths.is_some()), ("stiffness", t.stiffness.is_some()), ("damping", t.damping.is_some())] {
                    if v {
                        return Err(misplaced(key));
                    }
                }
                *mass = t.mass.unwrap_or(*mass);
                *length = t.length.unwrap_or(*length);
            }
            PlantKind::Arm { masses, lengths } => {
                for (key, v) in [("mass", t.mass.is_some()), ("length", t.length.is_some()), ("stiffness", t.stiffness.is_some()), ("damping", t.damping.is_some())] {
                    if v {
                        return Err(misplaced(key));
                    }
                }
                if let Some(m) = &t.masses {
                    *masses = m.clone();
                }
                if let Some(l) = &t.lengths {
                    *lengths = l.clone();
                }
            }
            PlantKind::Hopper { mass, stiffness, damping } => {
                for (key, v) in [("links", t.links.is_some()), ("masses", t.masses.is_some()), ("lengths", t.lengths.is_some()), ("length", t.length.is_some())] {
                    if v {
                        return Err(misplaced(key));
                    }
                }
                *mass = t.mass.unwrap_or(*mass);
                *stiffness = t.stiffness.unwrap_or(*stiffness);
                *damping = t.damping.unwrap_or(*damping);
            }
        }
        spec.gravity = t.gravity.unwrap_or(spec.gravity);
        spec.friction = t.friction.unwrap_or(spec.friction);
        spec.dt = t.dt.unwrap_or(spec.dt);
        spec.substeps = t.substeps.unwrap_or(spec.substeps);
        if let Some(l) = t.torque_limit {
            spec.torque_limit = if l.len() == 1 { vec![l[0]; spec.action_dim()] } else { l };
        }
        spec.validate().map_err(|e| TrainError::Config(format!("plant: {e}")))?;
        Ok(spec)
    }

    /// Table form with every parameter spelled out.
    pub fn resolved(&self) -> Result<PlantConfig, TrainError> {
        let spec = self.spec()?;
        let mut t = PlantTable::bare(self.name());
        match &spec.kind {
            PlantKind::Pendulum { mass, length } => {
                t.mass = Some(*mass);
                t.length = Some(*length);
            }
            PlantKind::Arm { masses, lengths } => {
                t.links = Some(masses.len());
                t.masses = Some(masses.clone());
                t.lengths = Some(lengths.clone());
            }
            PlantKind::Hopper { mass, stiffness, damping } => {
                t.mass = Some(*mass);
                t.stiffness = Some(*stiffness);
                t.damping = Some(*damping);
            }
        }
        t.gravity = Some(spec.gravity);
        t.friction = Some(spec.friction);
        t.dt = Some(spec.dt);
        t.substeps = Some(spec.substeps);
        t.torque_limit = Some(spec.torque_limit);
        Ok(PlantConfig::Table(t))
    }
}

impl PlantTable {
    fn bare(kind: PlantName) -> Self {
        Self {
            kind,
            links: None,
            mass: None,
            length: None,
            masses: None,
            lengths: None,
            stiffness: None,
            damping: None,
            gravity: None,
            friction: None,
            dt: None,
            substeps: None,
            torque_limit: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    /// Defaults by plant: joint (pendulum), end_effector (arm), hopper_profile (hopper).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space: Option<TaskSpace>,
    /// Index into the seeded evaluation targets.
    pub target: usize,
    pub target_seed: u64,
    /// Seconds; defaults to 2.0, or 1.2 for the hopper.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    pub kp: f64,
    /// Defaults to `2·√kp`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kd: Option<f64>,
    /// Explicit start and goal replace the seeded target.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub goal: Option<Vec<f64>>,
}

pub const TARGETS_PER_PLANT: usize = 5;

impl Default for TaskConfig {
    fn default() -> Self {
        Self { space: None, target: 0, target_seed: 0, duration: None, kp: 10.0, kd: None, start: None, goal: None }
    }
}

impl TaskConfig {
    pub fn space_for(&self, plant: PlantName) -> TaskSpace {
        self.space.unwrap_or(match plant {
            PlantName::Pendulum => TaskSpace::Joint,
            PlantName::Arm => TaskSpace::EndEffector,
            PlantName::Hopper => TaskSpace::HopperProfile,
        })
    }

    pub fn duration_for(&self, plant: PlantName) -> f64 {
        self.duration.unwrap_or(if plant == PlantName::Hopper { 1.2 } else { 2.0 })
    }

    pub fn gains(&self) -> Gains {
        Gains { kp: self.kp, kd: self.kd.unwrap_or(2.0 * self.kp.max(0.0).sqrt()) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub forward_hidden: Vec<usize>,
    pub controller_hidden: Vec<usize>,
    pub forward_activation: Activation,
    pub controller_activation: Activation,
    pub ensemble_size: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            forward_hidden: vec![32, 32],
            controller_hidden: vec![32, 32],
            forward_activation: Activation::Tanh,
            controller_activation: Activation::Tanh,
            ensemble_size: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub lr: f64,
    /// Controller learning rate; defaults to `lr`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controller_lr: Option<f64>,
    pub forward_epochs: usize,
    pub controller_epochs: usize,
    /// Epochs for the pretraining pass on babbling data.
    pub pretrain_epochs: usize,
    pub batch_size: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { lr: 1e-3, controller_lr: None, forward_epochs: 20, controller_epochs: 20, pretrain_epochs: 60, batch_size: 64 }
    }
}

impl OptimizerConfig {
    pub fn forward_adam(&self) -> AdamConfig {
        AdamConfig::with_lr(self.lr)
    }

    pub fn controller_adam(&self) -> AdamConfig {
        AdamConfig::with_lr(self.controller_lr.unwrap_or(self.lr))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    pub iterations: usize,
    pub babble_steps: usize,
    /// Low-pass coefficient of the babbling torque filter, in `[0, 1)`.
    pub babble_smoothing: f64,
    /// Babbling torque range as a fraction of the torque limit, in `(0, 1]`.
    pub babble_amplitude: f64,
    /// Rollout length in control steps; defaults to the reference duration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// Train the controller only on the most recent this many iterations of
    /// rollout data; 0 uses all of D.
    pub controller_window: usize,
    /// A rollout stops as diverged once any state entry exceeds this.
    pub divergence_bound: f64,
    /// Alternating train-f / train-g rounds per data-swap cell.
    pub dataswap_rounds: usize,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            iterations: 20,
            babble_steps: 1000,
            babble_smoothing: 0.7,
            babble_amplitude: 1.0,
            horizon: None,
            controller_window: 0,
            divergence_bound: 1e3,
            dataswap_rounds: 5,
        }
    }
}

impl ExperimentConfig {
    /// Rejects out-of-range values, naming the offending key.
    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |k: &str, m: &str| Err(TrainError::Config(format!("{k}: {m}")));
        self.plant.spec()?;
        let o = &self.optimizer;
        if !(o.lr > 0.0) || o.controller_lr.is_some_and(|l| !(l > 0.0)) {
            return err("optimizer.lr", "learning rates must be positive");
        }
        if o.batch_size == 0 {
            return err("optimizer.batch_size", "must be at least 1");
        }
        let n = &self.networks;
        if n.ensemble_size == 0 {
            return err("networks.ensemble_size", "must be at least 1");
        }
        if n.forward_hidden.iter().chain(&n.controller_hidden).any(|&w| w == 0) {
            return err("networks", "hidden widths must be positive");
        }
        let l = &self.schedule;
        if l.babble_steps == 0 {
            return err("loop.babble_steps", "must be at least 1");
        }
        if !(0.0..1.0).contains(&l.babble_smoothing) {
            return err("loop.babble_smoothing", "must lie in [0, 1)");
        }
        if !(l.babble_amplitude > 0.0 && l.babble_amplitude <= 1.0) {
            return err("loop.babble_amplitude", "must lie in (0, 1]");
        }
        if !(l.divergence_bound > 0.0) {
            return err("loop.divergence_bound", "must be positive");
        }
        if self.task.target >= TARGETS_PER_PLANT && self.task.goal.is_none() {
            return err("task.target", &format!("must be below {TARGETS_PER_PLANT}"));
        }
        if let Some(d) = self.task.duration {
            if !(d > 0.0) {
                return err("task.duration", "must be positive");
            }
        }
        if self.task.kp < 0.0 || self.task.kd.is_some_and(|k| k < 0.0) {
            return err("task", "gains must be non-negative");
        }
        self.build_task()?;
        Ok(())
    }

    pub fn build_task(&self) -> Result<Task, TrainError> {
        let plant = self.plant.spec()?;
        let name = self.plant.name();
        let space = self.task.space_for(name);
        let duration = self.task.duration_for(name);
        let traj = match (&self.task.start, &self.task.goal) {
            (start, Some(goal)) => {
                let start = start.clone().unwrap_or_else(|| match space {
                    TaskSpace::HopperProfile => vec![],
                    _ => evaluation_targets(&plant, space, duration, self.task.target_seed, 1)[0].start.clone(),
                });
                TrajectorySpec { space, start, goal: goal.clone(), duration, control_period: plant.control_period() }
            }
            (Some(_), None) => return Err(TrainError::Config("task.start given without task.goal".into())),
            (None, None) => {
                evaluation_targets(&plant, space, duration, self.task.target_seed, TARGETS_PER_PLANT)[self.task.target]
                    .clone()
            }
        };
        Task::new(plant, traj, self.task.gains()).map_err(|e| TrainError::Config(format!("task: {e}")))
    }

    /// Copy with every defaulted value written out.
    pub fn effective(&self) -> Result<Self, TrainError> {
        let mut c = self.clone();
        c.plant = self.plant.resolved()?;
        let name = self.plant.name();
        c.task.space = Some(self.task.space_for(name));
        c.task.duration = Some(self.task.duration_for(name));
        c.task.kd = Some(self.task.gains().kd);
        c.optimizer.controller_lr = Some(self.optimizer.controller_adam().lr);
        if c.schedule.horizon.is_none() {
            c.schedule.horizon = Some(self.build_task()?.horizon());
        }
        Ok(c)
    }

    pub fn horizon(&self, task: &Task) -> usize {
        self.schedule.horizon.unwrap_or_else(|| task.horizon())
    }
}

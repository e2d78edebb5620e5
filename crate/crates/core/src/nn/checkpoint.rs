//! Model checkpoint files.
//!
//! A checkpoint is a JSON document:
//!
//! ```text
//! {
//!   "format": "coupled-lab-checkpoint",
//!   "version": 1,
//!   "model": "forward" | "controller",
//!   ...model fields (dims, layer specs, seeds, normalization stats)...,
//!   "params": [flat parameter array in segment order]
//! }
//! ```
//!
//! Floats are written in shortest round-trip form and read back exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffcore::{ParamStore, Segment};

use super::controller::ControllerModel;
use super::ensemble::EnsembleForwardModel;
use super::mlp::{LayerSpec, Mlp};
use super::normalize::Normalizer;
use super::NnError;

pub const CHECKPOINT_FORMAT: &str = "coupled-lab-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub spec: LayerSpec,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum CheckpointBody {
    Forward {
        state_dim: usize,
        action_dim: usize,
        members: Vec<MemberRecord>,
        input_norm: Normalizer,
        delta_norm: Normalizer,
        params: Vec<f64>,
    },
    Controller {
        state_dim: usize,
        target_dims: Vec<usize>,
        action_dim: usize,
        torque_limit: Vec<f64>,
        net: MemberRecord,
        state_norm: Normalizer,
        target_norm: Normalizer,
        action_norm: Normalizer,
        params: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    #[serde(flatten)]
    pub body: CheckpointBody,
}

impl Checkpoint {
    fn new(body: CheckpointBody) -> Self {
        Self { format: CHECKPOINT_FORMAT.to_string(), version: CHECKPOINT_VERSION, body }
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let text = serde_json::to_string(self).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        fs::write(path, text).map_err(|e| NnError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let text = fs::read_to_string(path).map_err(|e| NnError::Io(format!("{}: {e}", path.display())))?;
        let ck: Checkpoint =
            serde_json::from_str(&text).map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!(
                "{}: unsupported format {} v{}",
                path.display(),
                ck.format,
                ck.version
            )));
        }
        Ok(ck)
    }
}

fn rebuild_store(params: Vec<f64>, records: &[(String, &LayerSpec)]) -> Result<ParamStore, NnError> {
    let mut segments = Vec::new();
    let mut off = 0;
    for (name, spec) in records {
        let n = spec.param_count();
        segments.push(Segment { name: name.clone(), range: off..off + n, frozen: false });
        off += n;
    }
    if off != params.len() {
        return Err(NnError::Checkpoint(format!("expected {off} parameters, found {}", params.len())));
    }
    Ok(ParamStore::from_parts(params, segments))
}

impl EnsembleForwardModel {
    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::new(CheckpointBody::Forward {
            state_dim: self.state_dim,
            action_dim: self.action_dim,
            members: self.members.iter().map(|m| MemberRecord { spec: m.spec.clone(), seed: m.seed }).collect(),
            input_norm: self.input_norm.clone(),
            delta_norm: self.delta_norm.clone(),
            params: self.store.values().to_vec(),
        })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, NnError> {
        let CheckpointBody::Forward { state_dim, action_dim, members, input_norm, delta_norm, params } = &ck.body else {
            return Err(NnError::Checkpoint("not a forward-model checkpoint".into()));
        };
        let records: Vec<_> =
            members.iter().enumerate().map(|(k, m)| (format!("forward.member{k}"), &m.spec)).collect();
        let store = rebuild_store(params.clone(), &records)?;
        let members = members
            .iter()
            .enumerate()
            .map(|(k, m)| Mlp::attach(&store, k, &m.spec, m.seed))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            store,
            members,
            state_dim: *state_dim,
            action_dim: *action_dim,
            input_norm: input_norm.clone(),
            delta_norm: delta_norm.clone(),
        })
    }
}

impl ControllerModel {
    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::new(CheckpointBody::Controller {
            state_dim: self.state_dim,
            target_dims: self.target_dims.clone(),
            action_dim: self.action_dim,
            torque_limit: self.torque_limit.clone(),
            net: MemberRecord { spec: self.net.spec.clone(), seed: self.net.seed },
            state_norm: self.state_norm.clone(),
            target_norm: self.target_norm.clone(),
            action_norm: self.action_norm.clone(),
            params: self.store.values().to_vec(),
        })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, NnError> {
        let CheckpointBody::Controller {
            state_dim,
            target_dims,
            action_dim,
            torque_limit,
            net,
            state_norm,
            target_norm,
            action_norm,
            params,
        } = &ck.body
        else {
            return Err(NnError::Checkpoint("not a controller checkpoint".into()));
        };
        let store = rebuild_store(params.clone(), &[("controller".to_string(), &net.spec)])?;
        let mlp = Mlp::attach(&store, 0, &net.spec, net.seed)?;
        Ok(Self {
            store,
            net: mlp,
            state_dim: *state_dim,
            target_dims: target_dims.clone(),
            action_dim: *action_dim,
            torque_limit: torque_limit.clone(),
            state_norm: state_norm.clone(),
            target_norm: target_norm.clone(),
            action_norm: action_norm.clone(),
        })
    }
}

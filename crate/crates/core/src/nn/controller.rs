use crate::diffcore::{Graph, Matrix, ParamStore, Value};

use super::mlp::{init_mlp, Activation, LayerSpec, Mlp, OutputHead};
use super::normalize::Normalizer;
use super::NnError;

/// Deterministic controller `τ = g(y, y*)`.
///
/// The desired next state enters the network as the desired change
/// `y* − y[target_dims]`, normalized; the network output is de-normalized
/// into action units. The torque clamp is applied only by [`act`](Self::act),
/// never inside loss graphs.
#[derive(Clone, Debug)]
pub struct ControllerModel {
    pub store: ParamStore,
    pub net: Mlp,
    pub state_dim: usize,
    pub target_dims: Vec<usize>,
    pub action_dim: usize,
    pub torque_limit: Vec<f64>,
    pub state_norm: Normalizer,
    pub target_norm: Normalizer,
    pub action_norm: Normalizer,
}

impl ControllerModel {
    pub fn new(
        state_dim: usize,
        target_dims: Vec<usize>,
        action_dim: usize,
        hidden: &[usize],
        activation: Activation,
        torque_limit: Vec<f64>,
        seed: u64,
    ) -> Result<Self, NnError> {
        if torque_limit.len() != action_dim {
            return Err(NnError::Dimension { what: "torque limit", expected: action_dim, got: torque_limit.len() });
        }
        if let Some(&d) = target_dims.iter().find(|&&d| d >= state_dim) {
            return Err(NnError::InvalidSpec(format!("target dimension {d} outside state of size {state_dim}")));
        }
        let mut sizes = vec![state_dim + target_dims.len()];
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        let spec = LayerSpec::new(sizes, activation, OutputHead::Linear)?;
        let mut store = ParamStore::new();
        let net = init_mlp(&mut store, "controller", &spec, seed)?;
        let nt = target_dims.len();
        Ok(Self {
            store,
            net,
            state_dim,
            target_dims,
            action_dim,
            torque_limit,
            state_norm: Normalizer::identity(state_dim),
            target_norm: Normalizer::identity(nt),
            action_norm: Normalizer::identity(action_dim),
        })
    }

    pub fn target_dim(&self) -> usize {
        self.target_dims.len()
    }

    /// Normalized network input rows `[norm(y), norm(y* − y_sel)]`.
    pub fn network_input(&self, y: &Matrix, target: &Matrix) -> Result<Matrix, NnError> {
        if y.cols() != self.state_dim {
            return Err(NnError::Dimension { what: "controller state", expected: self.state_dim, got: y.cols() });
        }
        if target.cols() != self.target_dim() || target.rows() != y.rows() {
            return Err(NnError::Dimension { what: "controller target", expected: self.target_dim(), got: target.cols() });
        }
        let ys = self.state_norm.apply(y);
        let mut rel = target.clone();
        let nt = self.target_dim();
        for r in 0..y.rows() {
            for (j, &d) in self.target_dims.iter().enumerate() {
                let v = rel.get(r, j) - y.get(r, d);
                rel.set(r, j, v);
            }
        }
        let rel = self.target_norm.apply(&rel);
        let cols = self.state_dim + nt;
        let mut out = Matrix::zeros(y.rows(), cols);
        for r in 0..y.rows() {
            for c in 0..self.state_dim {
                out.set(r, c, ys.get(r, c));
            }
            for c in 0..nt {
                out.set(r, self.state_dim + c, rel.get(r, c));
            }
        }
        Ok(out)
    }

    /// Unclamped actions for a batch, differentiable with respect to the
    /// controller parameters.
    pub fn forward(&self, g: &mut Graph, y: &Matrix, target: &Matrix) -> Result<Value, NnError> {
        let input = g.constant(self.network_input(y, target)?);
        let out = self.net.forward(g, &self.store, input)?;
        let sigma = g.constant(Matrix::row(&self.action_norm.std));
        let mu = g.constant(Matrix::row(&self.action_norm.mean));
        let scaled = g.mul(out.mean, sigma);
        Ok(g.add(scaled, mu))
    }

    /// Unclamped action for one state.
    pub fn raw_action(&self, y: &[f64], target: &[f64]) -> Result<Vec<f64>, NnError> {
        let mut g = Graph::new();
        let a = self.forward(&mut g, &Matrix::row(y), &Matrix::row(target))?;
        Ok(g.data(a).as_slice().to_vec())
    }

    /// Action sent to the plant: the network output clamped to ±torque limit.
    pub fn act(&self, y: &[f64], target: &[f64]) -> Result<Vec<f64>, NnError> {
        Ok(self.clamp(&self.raw_action(y, target)?))
    }

    pub fn clamp(&self, tau: &[f64]) -> Vec<f64> {
        tau.iter().zip(&self.torque_limit).map(|(t, l)| t.clamp(-l, *l)).collect()
    }
}

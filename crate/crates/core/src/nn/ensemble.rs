use crate::diffcore::{Graph, Matrix, ParamStore, Value};

use super::gaussian::GaussianPrediction;
use super::mlp::{init_mlp, Activation, LayerSpec, Mlp, MlpOutput, OutputHead};
use super::normalize::Normalizer;
use super::NnError;

/// Ensemble of probabilistic networks predicting the next model state.
///
/// Every member sees the normalized `[state, action]` and outputs a gaussian
/// over the normalized state delta. The point prediction used by the
/// controller losses is `state + denormalized mean of the member means`.
/// All members live in one [`ParamStore`], one segment each, so freezing the
/// store freezes every member.
#[derive(Clone, Debug)]
pub struct EnsembleForwardModel {
    pub store: ParamStore,
    pub members: Vec<Mlp>,
    pub state_dim: usize,
    pub action_dim: usize,
    pub input_norm: Normalizer,
    pub delta_norm: Normalizer,
}

impl EnsembleForwardModel {
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        activation: Activation,
        ensemble_size: usize,
        seed: u64,
    ) -> Result<Self, NnError> {
        if ensemble_size == 0 {
            return Err(NnError::InvalidSpec("ensemble size must be at least 1".into()));
        }
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(state_dim);
        let spec = LayerSpec::new(sizes, activation, OutputHead::Gaussian)?;
        let mut store = ParamStore::new();
        let members = (0..ensemble_size)
            .map(|k| init_mlp(&mut store, &format!("forward.member{k}"), &spec, seed + k as u64))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            store,
            members,
            state_dim,
            action_dim,
            input_norm: Normalizer::identity(state_dim + action_dim),
            delta_norm: Normalizer::identity(state_dim),
        })
    }

    pub fn ensemble_size(&self) -> usize {
        self.members.len()
    }

    fn check_batch(&self, y: &Matrix, tau_cols: usize) -> Result<(), NnError> {
        if y.cols() != self.state_dim {
            return Err(NnError::Dimension { what: "forward-model state", expected: self.state_dim, got: y.cols() });
        }
        if tau_cols != self.action_dim {
            return Err(NnError::Dimension { what: "forward-model action", expected: self.action_dim, got: tau_cols });
        }
        Ok(())
    }

    /// Normalized network input for a batch; gradient flows through `tau`.
    pub fn network_input(&self, g: &mut Graph, y: &Matrix, tau: Value) -> Result<Value, NnError> {
        self.check_batch(y, g.data(tau).cols())?;
        let ds = self.state_dim;
        let state_norm = Normalizer {
            mean: self.input_norm.mean[..ds].to_vec(),
            std: self.input_norm.std[..ds].to_vec(),
        };
        let ys = g.constant(state_norm.apply(y));
        let mu = g.constant(Matrix::row(&self.input_norm.mean[ds..]));
        let inv: Vec<f64> = self.input_norm.std[ds..].iter().map(|s| 1.0 / s).collect();
        let inv = g.constant(Matrix::row(&inv));
        let centered = g.sub(tau, mu);
        let tn = g.mul(centered, inv);
        Ok(g.concat_cols(&[ys, tn]))
    }

    /// Output of member `k` in normalized delta space.
    pub fn member_forward(&self, g: &mut Graph, k: usize, input: Value) -> Result<MlpOutput, NnError> {
        self.members[k].forward(g, &self.store, input)
    }

    /// Next-state point prediction `y + Δ` with Δ the ensemble-mean delta.
    pub fn predict(&self, g: &mut Graph, y: &Matrix, tau: Value) -> Result<Value, NnError> {
        let input = self.network_input(g, y, tau)?;
        let mut acc: Option<Value> = None;
        for k in 0..self.members.len() {
            let out = self.member_forward(g, k, input)?;
            acc = Some(match acc {
                None => out.mean,
                Some(a) => g.add(a, out.mean),
            });
        }
        let mean = g.scale(acc.expect("ensemble has members"), 1.0 / self.members.len() as f64);
        let sigma = g.constant(Matrix::row(&self.delta_norm.std));
        let delta = g.mul(mean, sigma);
        let mut base = y.clone();
        let cols = base.cols();
        for (i, x) in base.as_mut_slice().iter_mut().enumerate() {
            *x += self.delta_norm.mean[i % cols];
        }
        let base = g.constant(base);
        Ok(g.add(base, delta))
    }

    /// Point prediction and mixture variance for a single transition.
    pub fn predict_one(&self, y: &[f64], tau: &[f64]) -> Result<GaussianPrediction, NnError> {
        let mut g = Graph::new();
        let ym = Matrix::row(y);
        let t = g.constant(Matrix::row(tau));
        let input = self.network_input(&mut g, &ym, t)?;
        let k = self.members.len() as f64;
        let d = self.state_dim;
        let mut means = Vec::new();
        let mut vars = Vec::new();
        for m in 0..self.members.len() {
            let out = self.member_forward(&mut g, m, input)?;
            means.push(g.data(out.mean).as_slice().to_vec());
            vars.push(g.data(out.log_var.expect("gaussian head")).as_slice().iter().map(|l| l.exp()).collect::<Vec<_>>());
        }
        let mut mean = vec![0.0; d];
        let mut variance = vec![0.0; d];
        for i in 0..d {
            let mu: f64 = means.iter().map(|m| m[i]).sum::<f64>() / k;
            let second: f64 = means.iter().zip(&vars).map(|(m, v)| v[i] + m[i] * m[i]).sum::<f64>() / k;
            let s = self.delta_norm.std[i];
            mean[i] = y[i] + self.delta_norm.mean[i] + s * mu;
            variance[i] = s * s * (second - mu * mu).max(0.0);
        }
        Ok(GaussianPrediction { mean, variance })
    }

    /// Point predictions for a batch of logged `(y, tau)` pairs, without gradients.
    pub fn predict_batch(&self, y: &Matrix, tau: &Matrix) -> Result<Matrix, NnError> {
        let mut g = Graph::new();
        let t = g.constant(tau.clone());
        let p = self.predict(&mut g, y, t)?;
        Ok(g.data(p).clone())
    }

    /// Normalized delta targets for supervised training.
    pub fn delta_targets(&self, y: &Matrix, y_next: &Matrix) -> Matrix {
        let mut d = y_next.clone();
        for (x, y0) in d.as_mut_slice().iter_mut().zip(y.as_slice()) {
            *x -= y0;
        }
        self.delta_norm.apply(&d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1-D state, 1-D action, linear members with identity normalization.
    fn linear_ensemble(slopes: &[f64], biases: &[f64]) -> EnsembleForwardModel {
        let mut f = EnsembleForwardModel::new(1, 1, &[], Activation::Relu, slopes.len(), 0).unwrap();
        for (k, (a, b)) in slopes.iter().zip(biases).enumerate() {
            let r = f.store.segment(f.members[k].segment).range.clone();
            // mean head [w_s, w_tau, b], log-var head [0, 0, 0]
            f.store.values_mut()[r].copy_from_slice(&[0.0, *a, *b, 0.0, 0.0, 0.0]);
        }
        f
    }

    #[test]
    fn prediction_is_mean_of_member_deltas() {
        let f = linear_ensemble(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]);
        let mut g = Graph::new();
        let tau = g.constant(Matrix::row(&[0.7]));
        let p = f.predict(&mut g, &Matrix::row(&[0.0]), tau).unwrap();
        assert_eq!(g.data(p).as_slice(), &[2.0]);
    }

    #[test]
    fn zero_member_predicts_no_change() {
        let mut f = EnsembleForwardModel::new(2, 1, &[8], Activation::Tanh, 1, 3).unwrap();
        f.store.values_mut().iter_mut().for_each(|v| *v = 0.0);
        let p = f.predict_one(&[0.4, -1.1], &[2.0]).unwrap();
        assert_eq!(p.mean, vec![0.4, -1.1]);
    }

    #[test]
    fn gradient_wrt_action_is_mean_slope() {
        let f = linear_ensemble(&[1.0, 2.0, 6.0], &[0.0; 3]);
        let mut beta = ParamStore::new();
        beta.push_segment("tau", &[0.5]);
        let mut g = Graph::new();
        let tau = g.param(&beta, 0, 1, 1);
        let p = f.predict(&mut g, &Matrix::row(&[0.0]), tau).unwrap();
        let s = g.sum(p);
        let grad = g.backward(s, &beta).unwrap();
        assert!((grad[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn identical_members_match_single_member() {
        let mut single = EnsembleForwardModel::new(2, 1, &[6], Activation::Tanh, 1, 9).unwrap();
        single.input_norm = Normalizer { mean: vec![0.1, -0.2, 0.3], std: vec![2.0, 0.5, 1.5] };
        single.delta_norm = Normalizer { mean: vec![0.01, 0.02], std: vec![0.3, 0.7] };
        let w = single.store.values().to_vec();
        for k in [2usize, 4] {
            let mut ens = EnsembleForwardModel::new(2, 1, &[6], Activation::Tanh, k, 9).unwrap();
            ens.input_norm = single.input_norm.clone();
            ens.delta_norm = single.delta_norm.clone();
            for m in 0..k {
                let r = ens.store.segment(ens.members[m].segment).range.clone();
                ens.store.values_mut()[r].copy_from_slice(&w);
            }
            let y = Matrix::from_vec(2, 2, vec![0.3, -0.5, 1.0, 2.0]);
            let tau = Matrix::from_vec(2, 1, vec![0.2, -1.4]);
            assert_eq!(ens.predict_batch(&y, &tau).unwrap(), single.predict_batch(&y, &tau).unwrap());
        }
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let f = EnsembleForwardModel::new(2, 1, &[4], Activation::Relu, 1, 0).unwrap();
        assert!(matches!(f.predict_one(&[0.0], &[0.0]), Err(NnError::Dimension { .. })));
        assert!(matches!(f.predict_one(&[0.0, 0.0], &[0.0, 1.0]), Err(NnError::Dimension { .. })));
    }
}

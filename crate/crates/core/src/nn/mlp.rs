use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::{Graph, Matrix, ParamStore, Value};

use super::NnError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputHead {
    Linear,
    /// Mean and clamped log-variance per output dimension.
    Gaussian,
}

/// Layer widths from input to output, hidden activation and output head.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub sizes: Vec<usize>,
    pub activation: Activation,
    pub output: OutputHead,
}

pub const LOG_VAR_MIN: f64 = -10.0;
pub const LOG_VAR_MAX: f64 = 5.0;

impl LayerSpec {
    pub fn new(sizes: Vec<usize>, activation: Activation, output: OutputHead) -> Result<Self, NnError> {
        let spec = Self { sizes, activation, output };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.sizes.len() < 2 || self.sizes.iter().any(|&w| w == 0) {
            return Err(NnError::InvalidSpec(format!("layer sizes {:?}", self.sizes)));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// Σ (n_in + 1) · n_out, with the final layer doubled for a gaussian head.
    pub fn param_count(&self) -> usize {
        let n = self.sizes.len();
        self.sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let heads = if i == n - 2 && self.output == OutputHead::Gaussian { 2 } else { 1 };
                (w[0] + 1) * w[1] * heads
            })
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Dense {
    w: usize,
    b: usize,
    n_in: usize,
    n_out: usize,
}

/// A perceptron whose weights occupy one segment of a [`ParamStore`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub spec: LayerSpec,
    pub seed: u64,
    pub segment: usize,
    hidden: Vec<Dense>,
    mean_head: Dense,
    log_var_head: Option<Dense>,
}

/// Differentiable network outputs for a batch.
#[derive(Clone, Copy, Debug)]
pub struct MlpOutput {
    pub mean: Value,
    pub log_var: Option<Value>,
}

fn layout(spec: &LayerSpec, start: usize) -> (Vec<Dense>, Dense, Option<Dense>) {
    let mut off = start;
    let mut dense = |n_in: usize, n_out: usize| {
        let d = Dense { w: off, b: off + n_in * n_out, n_in, n_out };
        off += (n_in + 1) * n_out;
        d
    };
    let n = spec.sizes.len();
    let hidden: Vec<Dense> = spec.sizes[..n - 1].windows(2).map(|w| dense(w[0], w[1])).collect();
    let mean_head = dense(spec.sizes[n - 2], spec.sizes[n - 1]);
    let log_var_head = (spec.output == OutputHead::Gaussian).then(|| dense(spec.sizes[n - 2], spec.sizes[n - 1]));
    (hidden, mean_head, log_var_head)
}

/// Appends a freshly initialized network to `store` as a new segment.
///
/// Weights are uniform in ±1/√n_in, biases are zero; the same seed always
/// produces the same values.
pub fn init_mlp(store: &mut ParamStore, name: &str, spec: &LayerSpec, seed: u64) -> Result<Mlp, NnError> {
    spec.validate()?;
    let start = store.len();
    let (hidden, mean_head, log_var_head) = layout(spec, start);
    let mut values = vec![0.0; spec.param_count()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for d in hidden.iter().chain(std::iter::once(&mean_head)).chain(log_var_head.iter()) {
        let bound = 1.0 / (d.n_in as f64).sqrt();
        for v in &mut values[d.w - start..d.w - start + d.n_in * d.n_out] {
            *v = rng.gen_range(-bound..bound);
        }
    }
    let segment = store.push_segment(name, &values);
    Ok(Mlp { spec: spec.clone(), seed, segment, hidden, mean_head, log_var_head })
}

impl Mlp {
    /// Rebinds a network to an existing segment (used when loading checkpoints).
    pub fn attach(store: &ParamStore, segment: usize, spec: &LayerSpec, seed: u64) -> Result<Mlp, NnError> {
        spec.validate()?;
        let range = store.segment(segment).range.clone();
        if range.len() != spec.param_count() {
            return Err(NnError::InvalidSpec(format!(
                "segment holds {} values, spec needs {}",
                range.len(),
                spec.param_count()
            )));
        }
        let (hidden, mean_head, log_var_head) = layout(spec, range.start);
        Ok(Mlp { spec: spec.clone(), seed, segment, hidden, mean_head, log_var_head })
    }

    fn dense(&self, g: &mut Graph, store: &ParamStore, d: &Dense, x: Value) -> Value {
        let w = g.param(store, d.w, d.n_in, d.n_out);
        let b = g.param(store, d.b, 1, d.n_out);
        let h = g.matmul(x, w);
        g.add(h, b)
    }

    /// Batched forward pass; `x` is `B x input_dim`.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Value) -> Result<MlpOutput, NnError> {
        let got = g.data(x).cols();
        if got != self.spec.input_dim() {
            return Err(NnError::Dimension { what: "network input", expected: self.spec.input_dim(), got });
        }
        let mut h = x;
        for d in &self.hidden {
            h = self.dense(g, store, d, h);
            h = match self.spec.activation {
                Activation::Relu => g.relu(h),
                Activation::Tanh => g.tanh(h),
            };
        }
        let mean = self.dense(g, store, &self.mean_head, h);
        let log_var = self.log_var_head.as_ref().map(|d| {
            let raw = self.dense(g, store, d, h);
            g.clamp(raw, LOG_VAR_MIN, LOG_VAR_MAX)
        });
        Ok(MlpOutput { mean, log_var })
    }
}

/// Forward pass on a single input row without keeping the graph.
pub fn mlp_forward(net: &Mlp, store: &ParamStore, input: &[f64]) -> Result<(Vec<f64>, Option<Vec<f64>>), NnError> {
    let mut g = Graph::new();
    let x = g.constant(Matrix::row(input));
    let out = net.forward(&mut g, store, x)?;
    let mean = g.data(out.mean).as_slice().to_vec();
    let lv = out.log_var.map(|v| g.data(v).as_slice().to_vec());
    Ok((mean, lv))
}

use serde::{Deserialize, Serialize};

use crate::diffcore::ParamStore;

use super::NnError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

/// Bias-corrected adaptive-moment update. Frozen segments and their moments
/// are left untouched; a non-finite gradient aborts before anything changes.
pub fn adam_step(params: &mut ParamStore, grads: &[f64], state: &mut AdamState, cfg: &AdamConfig) -> Result<(), NnError> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(NnError::Dimension { what: "adam gradient", expected: params.len(), got: grads.len() });
    }
    if !(cfg.lr > 0.0) {
        return Err(NnError::InvalidSpec(format!("learning rate must be positive, got {}", cfg.lr)));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(NnError::NonFiniteGradient { index: i });
    }
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    let ranges: Vec<_> = params.segments().iter().filter(|s| !s.frozen).map(|s| s.range.clone()).collect();
    let values = params.values_mut();
    for r in ranges {
        for i in r {
            let g = grads[i];
            state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
            state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
            let mh = state.m[i] / bc1;
            let vh = state.v[i] / bc2;
            values[i] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore {
        let mut p = ParamStore::new();
        p.push_segment("theta", &[1.0, -2.0]);
        p.push_segment("beta", &[0.5]);
        p
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut p = store();
        let mut s = AdamState::new(3);
        let cfg = AdamConfig::default();
        adam_step(&mut p, &[0.0; 3], &mut s, &cfg).unwrap();
        assert_eq!(p.values(), &[1.0, -2.0, 0.5]);
        s.m = vec![1.0; 3];
        s.v = vec![1.0; 3];
        adam_step(&mut p, &[0.0; 3], &mut s, &cfg).unwrap();
        assert_eq!(s.m, vec![0.9; 3]);
        assert_eq!(s.v, vec![0.999; 3]);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient() {
        let mut p = store();
        let mut s = AdamState::new(3);
        let cfg = AdamConfig::with_lr(0.01);
        adam_step(&mut p, &[3.0, -0.2, 100.0], &mut s, &cfg).unwrap();
        let d: Vec<f64> = p.values().iter().zip([1.0, -2.0, 0.5]).map(|(a, b)| a - b).collect();
        assert!((d[0] + 0.01).abs() < 1e-8);
        assert!((d[1] - 0.01).abs() < 1e-7);
        assert!((d[2] + 0.01).abs() < 1e-8);
    }

    #[test]
    fn frozen_segment_is_bit_identical() {
        let mut p = store();
        p.set_frozen(0, true);
        let mut s = AdamState::new(3);
        for _ in 0..5 {
            adam_step(&mut p, &[1.0, 1.0, 1.0], &mut s, &AdamConfig::default()).unwrap();
        }
        assert_eq!(&p.values()[..2], &[1.0, -2.0]);
        assert_ne!(p.values()[2], 0.5);
        assert_eq!(&s.m[..2], &[0.0, 0.0]);
    }

    #[test]
    fn nonfinite_gradient_is_error() {
        let mut p = store();
        let mut s = AdamState::new(3);
        let e = adam_step(&mut p, &[0.0, f64::NAN, 0.0], &mut s, &AdamConfig::default()).unwrap_err();
        assert!(matches!(e, NnError::NonFiniteGradient { index: 1 }));
        assert_eq!(p.values(), &[1.0, -2.0, 0.5]);
        assert_eq!(s.t, 0);
    }
}

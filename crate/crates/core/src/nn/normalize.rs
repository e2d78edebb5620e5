use serde::{Deserialize, Serialize};

use crate::diffcore::Matrix;

/// Per-dimension affine standardization `(x - mean) / std`.
///
/// Fitted once on babbling data and then kept fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Dimensions whose spread is below this are left unscaled.
const MIN_STD: f64 = 1e-8;

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    /// Population mean and standard deviation of `rows`.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R], dim: usize) -> Self {
        if rows.is_empty() {
            return Self::identity(dim);
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r.as_ref()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var.iter().map(|v| (v / n).sqrt()).map(|s| if s < MIN_STD { 1.0 } else { s }).collect();
        Self { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, m: &Matrix) -> Matrix {
        assert_eq!(m.cols(), self.dim(), "normalizer dimension mismatch");
        let mut out = m.clone();
        let cols = m.cols();
        for (i, x) in out.as_mut_slice().iter_mut().enumerate() {
            let c = i % cols;
            *x = (*x - self.mean[c]) / self.std[c];
        }
        out
    }

    pub fn inverse_std(&self) -> Vec<f64> {
        self.std.iter().map(|s| 1.0 / s).collect()
    }

    /// Restriction to the listed dimensions.
    pub fn select(&self, dims: &[usize]) -> Self {
        Self { mean: dims.iter().map(|&d| self.mean[d]).collect(), std: dims.iter().map(|&d| self.std[d]).collect() }
    }
}

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::diffcore::{Graph, Matrix, Value};

use super::NnError;

/// Diagonal gaussian over a vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// `½ Σ_d [log(2π v_d) + (target_d − mean_d)² / v_d]`.
pub fn gaussian_nll(pred: &GaussianPrediction, target: &[f64]) -> Result<f64, NnError> {
    if pred.mean.len() != target.len() || pred.variance.len() != target.len() {
        return Err(NnError::Dimension { what: "gaussian target", expected: pred.mean.len(), got: target.len() });
    }
    let mut nll = 0.0;
    for ((m, v), t) in pred.mean.iter().zip(&pred.variance).zip(target) {
        if !(*v > 0.0) {
            return Err(NnError::NonPositiveVariance(*v));
        }
        nll += (2.0 * PI * v).ln() + (t - m) * (t - m) / v;
    }
    Ok(0.5 * nll)
}

/// Graph version summed over every row of the batch: returns
/// `½ Σ_rows Σ_d [log 2π + log_var + (target − mean)² e^{−log_var}]`.
pub fn gaussian_nll_sum(g: &mut Graph, mean: Value, log_var: Value, target: &Matrix) -> Value {
    let n = target.len() as f64;
    let t = g.constant(target.clone());
    let diff = g.sub(t, mean);
    let sq = g.square(diff);
    let neg_lv = g.neg(log_var);
    let prec = g.exp(neg_lv);
    let weighted = g.mul(sq, prec);
    let inner = g.add(weighted, log_var);
    let s = g.sum(inner);
    let c = g.scalar(n * (2.0 * PI).ln());
    let total = g.add(s, c);
    g.scale(total, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nll_values() {
        let half_log_2pi = 0.5 * (2.0 * PI).ln();
        let p = GaussianPrediction { mean: vec![0.0], variance: vec![1.0] };
        assert!((gaussian_nll(&p, &[0.0]).unwrap() - 0.9189385332046727).abs() < 1e-12);
        assert!((gaussian_nll(&p, &[1.0]).unwrap() - (half_log_2pi + 0.5)).abs() < 1e-12);
        assert!((gaussian_nll(&p, &[1.0]).unwrap() - 1.4189385332046727).abs() < 1e-12);
    }

    #[test]
    fn unit_variance_is_half_squared_error_plus_constant() {
        let mean = vec![0.3, -1.0, 2.5];
        let target = vec![1.0, 0.5, 2.0];
        let p = GaussianPrediction { mean: mean.clone(), variance: vec![1.0; 3] };
        let sq: f64 = mean.iter().zip(&target).map(|(m, t)| (m - t) * (m - t)).sum();
        let c = 1.5 * (2.0 * PI).ln();
        assert!((gaussian_nll(&p, &target).unwrap() - c - 0.5 * sq).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_variance() {
        let p = GaussianPrediction { mean: vec![0.0], variance: vec![0.0] };
        assert!(matches!(gaussian_nll(&p, &[0.0]), Err(NnError::NonPositiveVariance(_))));
    }

    #[test]
    fn graph_matches_plain() {
        let mut g = Graph::new();
        let m = g.constant(Matrix::from_vec(2, 2, vec![0.1, 0.2, -0.3, 0.4]));
        let lv = g.constant(Matrix::from_vec(2, 2, vec![0.0, -1.0, 0.5, 1.0]));
        let t = Matrix::from_vec(2, 2, vec![0.0, 1.0, 1.0, -1.0]);
        let v = gaussian_nll_sum(&mut g, m, lv, &t);
        let mut expect = 0.0;
        for r in 0..2 {
            let p = GaussianPrediction {
                mean: g.data(m).row_slice(r).to_vec(),
                variance: g.data(lv).row_slice(r).iter().map(|x| x.exp()).collect(),
            };
            expect += gaussian_nll(&p, t.row_slice(r)).unwrap();
        }
        assert!((g.scalar_value(v) - expect).abs() < 1e-12);
    }
}

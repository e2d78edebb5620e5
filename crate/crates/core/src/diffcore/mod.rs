//! Reverse-mode automatic differentiation.
//!
//! A [`Graph`] records operations eagerly; every node holds a dense
//! [`Matrix`] (scalars are 1x1), so the same tape handles scalar algebra and
//! batched network layers. Parameters live in a [`ParamStore`] partitioned
//! into segments; a frozen segment is a stop-gradient boundary and always
//! receives exactly zero from [`Graph::backward`].
//!
//! ```
//! use coupled_lab::diffcore::{Graph, ParamStore};
//!
//! let mut params = ParamStore::new();
//! params.push_segment("p", &[3.0]);
//! let mut g = Graph::new();
//! let p = g.param_scalar(&params, 0);
//! let y = g.square(p);
//! assert_eq!(g.backward(y, &params).unwrap(), vec![6.0]);
//! ```

mod gradcheck;
mod graph;
mod matrix;
mod params;

pub use gradcheck::{grad_check, GradCheckReport};
pub use graph::{Graph, Primitive, Value};
pub use matrix::Matrix;
pub use params::{ParamStore, Segment};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiffError {
    #[error("{op} takes {expected} input(s), got {got}")]
    Arity { op: Primitive, expected: usize, got: usize },
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape { op: Primitive, left: (usize, usize), right: (usize, usize) },
    #[error("division by zero while evaluating node {node}")]
    DivisionByZero { node: usize },
    #[error("value {0} does not belong to this graph")]
    ForeignValue(usize),
    #[error("backward root must be 1x1, got {shape:?}")]
    NotScalar { shape: (usize, usize) },
    #[error("NaN in graph data at node {node}")]
    NaN { node: usize },
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("non-finite loss when perturbing parameter {param}")]
    NonFinitePerturbation { param: usize },
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn store(values: &[f64]) -> ParamStore {
        let mut p = ParamStore::new();
        p.push_segment("x", values);
        p
    }

    #[test]
    fn primitive_values() {
        let mut g = Graph::new();
        let a = g.scalar(2.0);
        let b = g.scalar(3.0);
        let s = g.add(a, b);
        assert_eq!(g.scalar_value(s), 5.0);
        let z = g.scalar(0.0);
        let x = g.scalar(-7.25);
        let m = g.mul(x, z);
        assert_eq!(g.scalar_value(m), 0.0);
        let t = g.tanh(z);
        assert_eq!(g.scalar_value(t), 0.0);
    }

    #[test]
    fn apply_checks_arity_and_zero_division() {
        let mut g = Graph::new();
        let a = g.scalar(1.0);
        let b = g.scalar(0.0);
        assert!(matches!(g.apply(Primitive::Add, &[a]), Err(DiffError::Arity { expected: 2, got: 1, .. })));
        let next = g.len();
        assert_eq!(g.div(a, b), Err(DiffError::DivisionByZero { node: next }));
        let r = g.constant(Matrix::zeros(2, 3));
        let c = g.constant(Matrix::zeros(3, 2));
        assert!(matches!(g.apply(Primitive::Add, &[r, c]), Err(DiffError::Shape { .. })));
    }

    #[test]
    fn parents_precede_children() {
        let p = store(&[0.5, -1.0]);
        let mut g = Graph::new();
        let a = g.param_scalar(&p, 0);
        let b = g.param_scalar(&p, 1);
        let c = g.mul(a, b);
        let d = g.tanh(c);
        for v in [c, d] {
            assert!(g.parents(v).iter().all(|&q| q < v.id()));
        }
    }

    #[test]
    fn square_gradient() {
        let p = store(&[3.0]);
        let mut g = Graph::new();
        let x = g.param_scalar(&p, 0);
        let y = g.square(x);
        assert_eq!(g.backward(y, &p).unwrap(), vec![6.0]);
    }

    #[test]
    fn frozen_segment_gets_zero() {
        let mut p = ParamStore::new();
        let sa = p.push_segment("a", &[2.0]);
        p.push_segment("b", &[5.0]);
        p.set_frozen(sa, true);
        let mut g = Graph::new();
        let a = g.param_scalar(&p, 0);
        let b = g.param_scalar(&p, 1);
        let y = g.mul(a, b);
        assert_eq!(g.backward(y, &p).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn joint_loss_scalar_fixture() {
        // f(tau) = a tau, g = b s_d, a=2, b=1, s_d=1, s_a=0: dL/db = 12.
        let p = store(&[1.0]);
        let mut g = Graph::new();
        let b = g.param_scalar(&p, 0);
        let a = g.scalar(2.0);
        let sd = g.scalar(1.0);
        let sa = g.scalar(0.0);
        let tau = g.mul(b, sd);
        let sp = g.mul(a, tau);
        let e1 = g.sub(sp, sd);
        let e1 = g.square(e1);
        let e2 = g.sub(sp, sa);
        let e2 = g.square(e2);
        let l = g.add(e1, e2);
        assert_eq!(g.scalar_value(l), 5.0);
        assert_eq!(g.backward(l, &p).unwrap(), vec![12.0]);
    }

    #[test]
    fn backward_rejects_nonscalar_and_nan() {
        let p = store(&[1.0, 2.0]);
        let mut g = Graph::new();
        let v = g.param(&p, 0, 1, 2);
        assert!(matches!(g.backward(v, &p), Err(DiffError::NotScalar { shape: (1, 2) })));
        let n = g.scalar(f64::NAN);
        let s = g.sum(v);
        let r = g.add(s, n);
        assert_eq!(g.backward(r, &p), Err(DiffError::NaN { node: n.id() }));
    }

    #[test]
    fn foreign_store_leaves_are_constants() {
        let p = store(&[2.0]);
        let q = store(&[3.0]);
        let mut g = Graph::new();
        let a = g.param_scalar(&p, 0);
        let b = g.param_scalar(&q, 0);
        let y = g.mul(a, b);
        assert_eq!(g.backward(y, &p).unwrap(), vec![3.0]);
        assert_eq!(g.backward(y, &q).unwrap(), vec![2.0]);
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let p = store(&[0.0]);
        let mut g = Graph::new();
        let x = g.param_scalar(&p, 0);
        let y = g.relu(x);
        let z = g.max0(x);
        let s = g.add(y, z);
        assert_eq!(g.backward(s, &p).unwrap(), vec![0.0]);
    }

    #[test]
    fn batched_layer_gradients_match_finite_differences() {
        // y = sum(tanh(X W + b)^2) with broadcasting bias, concat and select.
        let mut p = ParamStore::new();
        p.push_segment("w", &[0.3, -0.2, 0.5, 0.1, -0.4, 0.7]);
        p.push_segment("b", &[0.05, -0.1]);
        let x = Matrix::from_vec(3, 3, vec![1.0, 2.0, -1.0, 0.5, -0.3, 0.2, -1.5, 0.4, 0.9]);
        let report = grad_check(
            |g, p| {
                let xin = g.constant(x.clone());
                let w = g.param(p, 0, 3, 2);
                let b = g.param(p, 6, 1, 2);
                let h = g.matmul(xin, w);
                let h = g.add(h, b);
                let h = g.tanh(h);
                let c = g.concat_cols(&[h, xin]);
                let sel = g.select_cols(c, &[1, 0, 1]);
                let sq = g.square(sel);
                Ok(g.mean(sq))
            },
            &mut p,
            1e-5,
            1e-7,
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.checked, 8);
    }

    #[test]
    fn backward_is_deterministic_and_linear() {
        let p = store(&[0.7, -1.3]);
        let mut g = Graph::new();
        let a = g.param_scalar(&p, 0);
        let b = g.param_scalar(&p, 1);
        let ab = g.mul(a, b);
        let f1 = g.tanh(ab);
        let ea = g.exp(a);
        let f2 = g.mul(ea, b);
        let sum = g.add(f1, f2);
        let g1 = g.backward(f1, &p).unwrap();
        let g2 = g.backward(f2, &p).unwrap();
        let gs = g.backward(sum, &p).unwrap();
        assert_eq!(gs, g.backward(sum, &p).unwrap());
        for i in 0..2 {
            assert!((gs[i] - (g1[i] + g2[i])).abs() < 1e-14);
        }
    }

    fn unary_check(op: Primitive, x: f64) -> f64 {
        let mut p = store(&[x]);
        grad_check(|g, p| {
            let v = g.param_scalar(p, 0);
            g.apply(op, &[v])
        }, &mut p, 1e-5, 1e-4)
        .unwrap()
        .max_rel_error
    }

    fn binary_check(op: Primitive, x: f64, y: f64) -> f64 {
        let mut p = store(&[x, y]);
        grad_check(|g, p| {
            let a = g.param_scalar(p, 0);
            let b = g.param_scalar(p, 1);
            g.apply(op, &[a, b])
        }, &mut p, 1e-5, 1e-4)
        .unwrap()
        .max_rel_error
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn unary_primitives_match_central_differences(x in -3.0f64..3.0) {
            for op in [Primitive::Neg, Primitive::Tanh, Primitive::Exp, Primitive::Square, Primitive::Scale(-2.5)] {
                prop_assert!(unary_check(op, x) < 1e-4, "{op}");
            }
            // Kinks are avoided by keeping the point away from them.
            if x.abs() > 1e-3 {
                prop_assert!(unary_check(Primitive::Relu, x) < 1e-4);
                prop_assert!(unary_check(Primitive::Max0, x) < 1e-4);
            }
            if (x - 1.0).abs() > 1e-3 && (x + 1.0).abs() > 1e-3 {
                let clamp = Primitive::Clamp { lo: -1.0, hi: 1.0 };
                prop_assert!(unary_check(clamp, x) < 1e-4);
            }
            prop_assert!(unary_check(Primitive::Log, x.abs() + 0.1) < 1e-4);
        }

        #[test]
        fn binary_primitives_match_central_differences(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            for op in [Primitive::Add, Primitive::Sub, Primitive::Mul, Primitive::MatMul] {
                prop_assert!(binary_check(op, x, y) < 1e-4, "{op}");
            }
            let y = if y.abs() < 0.2 { 0.2f64.copysign(y) } else { y };
            prop_assert!(binary_check(Primitive::Div, x, y) < 1e-4);
        }
    }
}

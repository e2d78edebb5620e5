use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::nn::Activation;

/// 1-D forward model computing `s_p = a·τ + c` exactly in its derivative.
fn affine_f(a: f64, c: f64) -> EnsembleForwardModel {
    let mut f = EnsembleForwardModel::new(1, 1, &[], Activation::Relu, 1, 0).unwrap();
    // mean head [W_y, W_τ, b], log-variance head [W_y, W_τ, b]
    f.store.values_mut().copy_from_slice(&[-1.0, a, c, 0.0, 0.0, 0.0]);
    f
}

/// 1-D controller `τ = w_y·y + w_r·(s_d − y) + b`.
fn affine_g(w_y: f64, w_r: f64, b: f64) -> ControllerModel {
    let mut g = ControllerModel::new(1, vec![0], 1, &[], Activation::Relu, vec![1e9], 0).unwrap();
    g.store.values_mut().copy_from_slice(&[w_y, w_r, b]);
    g
}

fn batch1(s: f64, sd: f64, sa: f64, tau: f64) -> LossBatch {
    LossBatch::new(Matrix::scalar(s), Matrix::scalar(sd), Matrix::scalar(sa), Matrix::scalar(tau)).unwrap()
}

fn unit1() -> LossSpace {
    LossSpace::unit(1, vec![0], 1)
}

fn value(kind: LossKind, f: &mut EnsembleForwardModel, g: &ControllerModel, b: &LossBatch) -> f64 {
    controller_grad(kind, f, g, b, &unit1()).unwrap().0
}

#[test]
fn linear_fixture_gradients() {
    // a = 2, g = b·s_d with b = 1, s_d = 1, s_a = 0, s_t = 0
    let mut f = affine_f(2.0, 0.0);
    let g = affine_g(0.0, 1.0, 0.0);
    let b = batch1(0.0, 1.0, 0.0, 0.0);
    let grad = |kind, f: &mut EnsembleForwardModel| controller_grad(kind, f, &g, &b, &unit1()).unwrap().1[1];
    assert_eq!(grad(LossKind::Joint, &mut f), 12.0);
    assert_eq!(grad(LossKind::Task, &mut f), 4.0);
    assert_eq!(grad(LossKind::DistalTeacher, &mut f), -4.0);
}

#[test]
fn task_and_joint_value_examples() {
    // s_p = 1 via f = τ, g = bias 1
    let mut f = affine_f(1.0, 0.0);
    let g = affine_g(0.0, 0.0, 1.0);
    assert_eq!(value(LossKind::Task, &mut f, &g, &batch1(0.0, 0.0, 2.0, 0.0)), 1.0);
    assert_eq!(value(LossKind::Joint, &mut f, &g, &batch1(0.0, 0.0, 2.0, 0.0)), 2.0);
    assert_eq!(value(LossKind::DistalTeacher, &mut f, &g, &batch1(0.0, 0.0, 2.0, 0.0)), 0.0);
    assert_eq!(value(LossKind::Task, &mut f, &g, &batch1(0.0, 1.0, 5.0, 0.0)), 0.0);
    assert_eq!(value(LossKind::Joint, &mut f, &g, &batch1(0.0, 1.0, 1.0, 0.0)), 0.0);
}

#[test]
fn distal_gradient_nonzero_only_when_targets_differ() {
    let mut f = affine_f(1.5, 0.2);
    let g = affine_g(0.3, 0.7, -0.1);
    let (_, same) = controller_grad(LossKind::DistalTeacher, &mut f, &g, &batch1(0.4, 1.0, 1.0, 0.0), &unit1()).unwrap();
    assert!(same.iter().all(|x| x.abs() < 1e-12));
    let (_, diff) = controller_grad(LossKind::DistalTeacher, &mut f, &g, &batch1(0.4, 1.0, 2.0, 0.0), &unit1()).unwrap();
    assert!(diff.iter().any(|x| x.abs() > 1e-3));
}

#[test]
fn task_gradient_vanishes_on_target() {
    let mut f = affine_f(2.0, 0.0);
    let g = affine_g(0.0, 0.5, 0.0);
    // τ = 0.5, s_p = 1 = s_d
    let (_, grad) = controller_grad(LossKind::Task, &mut f, &g, &batch1(0.0, 1.0, 3.0, 0.0), &unit1()).unwrap();
    assert_eq!(grad, vec![0.0, 0.0, 0.0]);
}

#[test]
fn affine_oracle_over_random_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (a, c) = (rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0));
        let (wy, wr, bias) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0));
        let (s, sd, sa) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let mut f = affine_f(a, c);
        let g = affine_g(wy, wr, bias);
        let b = batch1(s, sd, sa, 0.0);
        let tau = wy * s + wr * (sd - s) + bias;
        let sp = a * tau + c;
        let dg = [s, sd - s, 1.0];
        let (_, task) = controller_grad(LossKind::Task, &mut f, &g, &b, &unit1()).unwrap();
        let (_, joint) = controller_grad(LossKind::Joint, &mut f, &g, &b, &unit1()).unwrap();
        for i in 0..3 {
            worst = worst.max((task[i] - 2.0 * a * dg[i] * (sp - sd)).abs());
            worst = worst.max((joint[i] - 2.0 * a * dg[i] * (2.0 * sp - sd - sa)).abs());
        }
    }
    assert!(worst < 1e-9, "max deviation {worst:e}");
}

#[test]
fn joint_minimizer_is_the_midpoint() {
    // f = τ, controller reduced to a free bias
    let (sd, sa) = (0.7, -1.9);
    let mut f = affine_f(1.0, 0.0);
    let mut g = affine_g(0.0, 0.0, 3.0);
    let b = batch1(0.0, sd, sa, 0.0);
    for _ in 0..200 {
        let (_, grad) = controller_grad(LossKind::Joint, &mut f, &g, &b, &unit1()).unwrap();
        g.store.values_mut()[2] -= 0.2 * grad[2];
    }
    assert!((g.store.values()[2] - (sd + sa) / 2.0).abs() < 1e-6);
    let mid = affine_g(0.0, 0.0, (sd + sa) / 2.0);
    let v = value(LossKind::Joint, &mut f, &mid, &b);
    assert!((v - 0.5 * (sa - sd) * (sa - sd)).abs() < 1e-12);
}

#[test]
fn controller_losses_require_frozen_forward_model() {
    let f = affine_f(1.0, 0.0);
    let g = affine_g(0.0, 1.0, 0.0);
    let b = batch1(0.0, 1.0, 0.0, 0.0);
    let mut graph = Graph::new();
    for kind in [LossKind::Joint, LossKind::Task, LossKind::DistalTeacher] {
        assert_eq!(controller_loss(&mut graph, kind, &f, &g, &b, &unit1()), Err(LossError::ThetaNotFrozen));
    }
    assert!(controller_loss(&mut graph, LossKind::InverseSupervised, &f, &g, &b, &unit1()).is_ok());
}

#[test]
fn forward_model_receives_no_gradient_and_flags_are_restored() {
    let mut f = affine_f(1.3, 0.1);
    let g = affine_g(0.2, 0.9, 0.0);
    let b = batch1(0.3, 1.0, 0.4, 0.0);
    for kind in LossKind::ALL {
        controller_grad(kind, &mut f, &g, &b, &unit1()).unwrap();
        assert!(!f.store.all_frozen());
    }
    f.store.freeze_all();
    let mut graph = Graph::new();
    let root = joint_loss(&mut graph, &f, &g, &b, &unit1()).unwrap();
    assert!(graph.backward(root, &f.store).unwrap().iter().all(|&x| x == 0.0));
}

#[test]
fn empty_batches_are_rejected() {
    let mut f = affine_f(1.0, 0.0);
    let g = affine_g(0.0, 1.0, 0.0);
    let empty = LossBatch::new(Matrix::zeros(0, 1), Matrix::zeros(0, 1), Matrix::zeros(0, 1), Matrix::zeros(0, 1)).unwrap();
    for kind in LossKind::ALL {
        assert_eq!(controller_grad(kind, &mut f, &g, &empty, &unit1()), Err(LossError::EmptyBatch));
    }
    let mut graph = Graph::new();
    assert!(matches!(forward_sup_loss(&mut graph, &f, 0, &empty), Err(LossError::EmptyBatch)));
}

#[test]
fn inverse_supervised_examples() {
    let mut f = affine_f(1.0, 0.0);
    // g(s, s_next) = s_next reproduces τ_run = s_next
    let g = affine_g(0.0, 1.0, 0.0);
    assert_eq!(value(LossKind::InverseSupervised, &mut f, &g, &batch1(0.0, 9.0, 2.0, 2.0)), 0.0);
    let zero = affine_g(0.0, 0.0, 0.0);
    assert_eq!(value(LossKind::InverseSupervised, &mut f, &zero, &batch1(0.5, 9.0, 1.0, 2.0)), 4.0);
    let g = affine_g(0.3, -0.8, 0.1);
    let a = value(LossKind::InverseSupervised, &mut f, &g, &batch1(0.5, 9.0, 1.0, 2.0));
    let b = value(LossKind::InverseSupervised, &mut f, &g, &batch1(0.5, -3.0, 1.0, 2.0));
    assert_eq!(a.to_bits(), b.to_bits());
    // another forward model changes nothing
    let mut f2 = affine_f(-4.0, 2.0);
    let c = value(LossKind::InverseSupervised, &mut f2, &g, &batch1(0.5, 9.0, 1.0, 2.0));
    assert_eq!(a.to_bits(), c.to_bits());
}

#[test]
fn forward_loss_examples() {
    let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    // member predicts Δ = τ with unit variance
    let mut f = EnsembleForwardModel::new(1, 1, &[], Activation::Tanh, 1, 0).unwrap();
    f.store.values_mut().copy_from_slice(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    let g = affine_g(0.0, 0.0, 0.0);
    let mut graph = Graph::new();
    let exact = forward_sup_loss(&mut graph, &f, 0, &batch1(0.5, 0.0, 0.8, 0.3)).unwrap();
    assert!((graph.scalar_value(exact) - half_log_2pi).abs() < 1e-15);
    let off = forward_sup_loss(&mut graph, &f, 0, &batch1(0.5, 0.0, 1.8, 0.3)).unwrap();
    assert!((graph.scalar_value(off) - half_log_2pi - 0.5).abs() < 1e-12);
    assert!(graph.backward(off, &g.store).unwrap().iter().all(|&x| x == 0.0));
    assert!(graph.backward(off, &f.store).unwrap().iter().any(|&x| x != 0.0));
}

#[test]
fn loss_kind_round_trips_through_text() {
    for k in LossKind::ALL {
        assert_eq!(k.as_str().parse::<LossKind>().unwrap(), k);
        assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{k}\""));
    }
    assert!("lerning".parse::<LossKind>().is_err());
}

#[test]
fn scales_divide_errors() {
    let mut f = affine_f(1.0, 0.0);
    let g = affine_g(0.0, 0.0, 1.0);
    let b = batch1(0.0, 0.0, 2.0, 0.0);
    let space = LossSpace { target_dims: vec![0], state_scale: vec![2.0], action_scale: vec![1.0] };
    let (v, _) = controller_grad(LossKind::Joint, &mut f, &g, &b, &space).unwrap();
    assert_eq!(v, 0.5);
}

proptest! {
    #[test]
    fn midpoint_identity_holds_per_batch(
        rows in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..8),
    ) {
        // f = τ and g = y, with each row's state set to its midpoint
        let n = rows.len();
        let mid: Vec<f64> = rows.iter().map(|(d, a)| (d + a) / 2.0).collect();
        let sd: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let sa: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let mut f = affine_f(1.0, 0.0);
        let g = affine_g(1.0, 0.0, 0.0);
        let b = LossBatch::new(
            Matrix::from_vec(n, 1, mid.clone()),
            Matrix::from_vec(n, 1, sd.clone()),
            Matrix::from_vec(n, 1, sa.clone()),
            Matrix::zeros(n, 1),
        ).unwrap();
        let (v, _) = controller_grad(LossKind::Joint, &mut f, &g, &b, &unit1()).unwrap();
        let expect: f64 = sd.iter().zip(&sa).map(|(d, a)| 0.5 * (a - d) * (a - d)).sum::<f64>() / n as f64;
        prop_assert!((v - expect).abs() < 1e-12 * (1.0 + expect));
    }
}

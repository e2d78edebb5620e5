use nalgebra::{DMatrix, DVector};

use super::{check_finite, check_len, PlantError, PlantKind, PlantSpec, PlantState};

/// End-effector kinematics in the plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EndEffector {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
    pub acc: [f64; 2],
}

struct Chain {
    /// Joint origins `o_1..o_n` (o_1 at the base).
    origins: Vec<[f64; 2]>,
    /// Point-mass positions `p_k = o_{k+1}`.
    tips: Vec<[f64; 2]>,
    /// Absolute link angles `φ_i = Σ_{j≤i} q_j`.
    phi: Vec<f64>,
}

fn chain(q: &[f64], lengths: &[f64]) -> Chain {
    let n = q.len();
    let mut origins = Vec::with_capacity(n);
    let mut tips = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    let (mut o, mut a) = ([0.0, 0.0], 0.0);
    for i in 0..n {
        a += q[i];
        origins.push(o);
        o = [o[0] + lengths[i] * a.cos(), o[1] + lengths[i] * a.sin()];
        tips.push(o);
        phi.push(a);
    }
    Chain { origins, tips, phi }
}

fn arm_params<'a>(spec: &'a PlantSpec, op: &'static str) -> Result<(&'a [f64], &'a [f64]), PlantError> {
    match &spec.kind {
        PlantKind::Arm { masses, lengths } => Ok((masses, lengths)),
        _ => Err(PlantError::WrongKind { op, kind: spec.kind_name() }),
    }
}

fn mass_matrix(c: &Chain, masses: &[f64]) -> DMatrix<f64> {
    let n = masses.len();
    DMatrix::from_fn(n, n, |i, j| {
        (i.max(j)..n)
            .map(|k| {
                let ri = [c.tips[k][0] - c.origins[i][0], c.tips[k][1] - c.origins[i][1]];
                let rj = [c.tips[k][0] - c.origins[j][0], c.tips[k][1] - c.origins[j][1]];
                masses[k] * (ri[0] * rj[0] + ri[1] * rj[1])
            })
            .sum()
    })
}

/// Composite-inertia mass matrix `M_ij = Σ_{k≥max(i,j)} m_k (p_k − o_i)·(p_k − o_j)`.
pub fn arm_mass_matrix(q: &[f64], spec: &PlantSpec) -> Result<DMatrix<f64>, PlantError> {
    let (masses, lengths) = arm_params(spec, "arm_mass_matrix")?;
    check_len("arm q", masses.len(), q.len())?;
    Ok(mass_matrix(&chain(q, lengths), masses))
}

/// Forward dynamics `q̈ = M⁻¹(τ − b q̇ − c(q, q̇) − g(q))` with τ clamped.
pub fn arm_accel(q: &[f64], qdot: &[f64], tau: &[f64], spec: &PlantSpec) -> Result<Vec<f64>, PlantError> {
    let (masses, lengths) = arm_params(spec, "arm_accel")?;
    let n = masses.len();
    check_len("arm q", n, q.len())?;
    check_len("arm qdot", n, qdot.len())?;
    check_len("arm torque", n, tau.len())?;
    let c = chain(q, lengths);
    let m = mass_matrix(&c, masses);

    let mut phidot = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        acc += qdot[i];
        phidot[i] = acc;
    }
    // centripetal acceleration of each point mass
    let mut a_vp = vec![[0.0, 0.0]; n];
    let mut run = [0.0, 0.0];
    for i in 0..n {
        let w2 = lengths[i] * phidot[i] * phidot[i];
        run = [run[0] - w2 * c.phi[i].cos(), run[1] - w2 * c.phi[i].sin()];
        a_vp[i] = run;
    }

    let mut rhs = DVector::zeros(n);
    for i in 0..n {
        let mut bias = 0.0;
        let mut grav = 0.0;
        for k in i..n {
            let r = [c.tips[k][0] - c.origins[i][0], c.tips[k][1] - c.origins[i][1]];
            bias += masses[k] * (-r[1] * a_vp[k][0] + r[0] * a_vp[k][1]);
            grav += masses[k] * spec.gravity * r[0];
        }
        let t = tau[i].clamp(-spec.torque_limit[i], spec.torque_limit[i]);
        rhs[i] = t - spec.friction * qdot[i] - bias - grav;
    }
    let chol = m.cholesky().ok_or(PlantError::SingularMass)?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

/// Torque that holds the arm still at `q`.
pub fn gravity_torque(q: &[f64], spec: &PlantSpec) -> Result<Vec<f64>, PlantError> {
    let (masses, lengths) = arm_params(spec, "gravity_torque")?;
    check_len("arm q", masses.len(), q.len())?;
    let c = chain(q, lengths);
    Ok((0..q.len())
        .map(|i| (i..q.len()).map(|k| masses[k] * spec.gravity * (c.tips[k][0] - c.origins[i][0])).sum())
        .collect())
}

pub fn arm_step(state: &PlantState, tau: &[f64], spec: &PlantSpec) -> Result<PlantState, PlantError> {
    check_finite(state, tau)?;
    let qdd = arm_accel(&state.q, &state.qdot, tau, spec)?;
    let qdot: Vec<f64> = state.qdot.iter().zip(&qdd).map(|(v, a)| v + spec.dt * a).collect();
    let q = state.q.iter().zip(&qdot).map(|(p, v)| p + spec.dt * v).collect();
    Ok(PlantState { q, qdot, contact_force: Vec::new() })
}

/// Planar forward kinematics with velocity and the acceleration implied by `qddot`.
pub fn fk_ee(q: &[f64], qdot: &[f64], qddot: &[f64], spec: &PlantSpec) -> Result<EndEffector, PlantError> {
    let (masses, lengths) = arm_params(spec, "fk_ee")?;
    let n = masses.len();
    check_len("arm q", n, q.len())?;
    check_len("arm qdot", n, qdot.len())?;
    check_len("arm qddot", n, qddot.len())?;
    let mut ee = EndEffector { pos: [0.0; 2], vel: [0.0; 2], acc: [0.0; 2] };
    let (mut phi, mut w, mut al) = (0.0, 0.0, 0.0);
    for i in 0..n {
        phi += q[i];
        w += qdot[i];
        al += qddot[i];
        let (s, c) = phi.sin_cos();
        let l = lengths[i];
        ee.pos[0] += l * c;
        ee.pos[1] += l * s;
        ee.vel[0] -= l * w * s;
        ee.vel[1] += l * w * c;
        ee.acc[0] += l * (-al * s - w * w * c);
        ee.acc[1] += l * (al * c - w * w * s);
    }
    Ok(ee)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn unit_arm(n: usize) -> PlantSpec {
        PlantSpec {
            kind: PlantKind::Arm { masses: vec![1.0; n], lengths: vec![1.0; n] },
            ..PlantSpec::arm(n)
        }
    }

    #[test]
    fn fk_examples() {
        let sp = unit_arm(3);
        let z = [0.0; 3];
        let e = fk_ee(&z, &z, &z, &sp).unwrap();
        assert_eq!(e.pos, [3.0, 0.0]);
        let e = fk_ee(&[FRAC_PI_2, 0.0, 0.0], &z, &z, &sp).unwrap();
        assert!((e.pos[0]).abs() < 1e-15 && (e.pos[1] - 3.0).abs() < 1e-15);
        let e = fk_ee(&[0.3, -1.2, 2.0], &z, &[1.0, 2.0, 3.0], &sp).unwrap();
        assert_eq!(e.vel, [0.0, 0.0]);
    }

    #[test]
    fn fk_derivatives_match_finite_differences() {
        let sp = PlantSpec::arm(3);
        let (q, qd, qdd) = ([0.3, -0.7, 1.1], [0.5, -0.2, 0.9], [1.5, 0.4, -2.0]);
        let h = 1e-6;
        let at = |t: f64| {
            let qt: Vec<f64> = (0..3).map(|i| q[i] + qd[i] * t + 0.5 * qdd[i] * t * t).collect();
            let qdt: Vec<f64> = (0..3).map(|i| qd[i] + qdd[i] * t).collect();
            fk_ee(&qt, &qdt, &qdd, &sp).unwrap()
        };
        let (p, m, e) = (at(h), at(-h), at(0.0));
        for d in 0..2 {
            assert!(((p.pos[d] - m.pos[d]) / (2.0 * h) - e.vel[d]).abs() < 1e-6);
            assert!(((p.vel[d] - m.vel[d]) / (2.0 * h) - e.acc[d]).abs() < 1e-6);
        }
    }

    #[test]
    fn gravity_compensation_holds_still() {
        let sp = PlantSpec { torque_limit: vec![1e3; 3], ..PlantSpec::arm(3) };
        let q = [0.4, -0.3, 0.8];
        let tau = gravity_torque(&q, &sp).unwrap();
        let a = arm_accel(&q, &[0.0; 3], &tau, &sp).unwrap();
        assert!(a.iter().all(|x| x.abs() < 1e-12), "{a:?}");
    }

    #[test]
    fn zero_gravity_rest_is_fixed_point() {
        let sp = PlantSpec { gravity: 0.0, ..PlantSpec::arm(3) };
        let s = sp.rest_state(&[0.2, 0.5, -0.1]);
        assert_eq!(arm_step(&s, &[0.0; 3], &sp).unwrap(), s);
    }

    #[test]
    fn mass_matrix_is_symmetric_positive_definite() {
        let sp = PlantSpec::arm(4);
        let m = arm_mass_matrix(&[0.1, 2.0, -1.0, 0.5], &sp).unwrap();
        assert!((m.clone() - m.transpose()).abs().max() < 1e-15);
        assert!(m.cholesky().is_some());
    }

    #[test]
    fn undamped_arm_conserves_energy() {
        let sp = PlantSpec { friction: 0.0, dt: 1e-4, ..PlantSpec::arm(2) };
        let PlantKind::Arm { masses, .. } = &sp.kind else { unreachable!() };
        let masses = masses.clone();
        let energy = |s: &PlantState| {
            let m = arm_mass_matrix(&s.q, &sp).unwrap();
            let v = DVector::from_column_slice(&s.qdot);
            let ke = 0.5 * (v.transpose() * &m * &v)[(0, 0)];
            let c = chain(&s.q, &[0.5, 0.5]);
            let pe: f64 = (0..2).map(|k| masses[k] * 9.81 * c.tips[k][1]).sum();
            ke + pe
        };
        let mut s = sp.rest_state(&[0.3, 0.4]);
        let e0 = energy(&s);
        for _ in 0..50000 {
            s = arm_step(&s, &[0.0, 0.0], &sp).unwrap();
        }
        assert!((energy(&s) - e0).abs() < 0.01 * 9.81, "drift {}", energy(&s) - e0);
    }
}

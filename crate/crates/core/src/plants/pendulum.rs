use super::{check_finite, PlantError, PlantKind, PlantSpec, PlantState};

/// `m l² θ̈ = τ − m g l sin θ − b θ̇`, with τ clamped to the torque limit.
pub fn pendulum_step(state: &PlantState, tau: f64, spec: &PlantSpec) -> Result<PlantState, PlantError> {
    let PlantKind::Pendulum { mass, length } = spec.kind else {
        return Err(PlantError::WrongKind { op: "pendulum_step", kind: spec.kind_name() });
    };
    check_finite(state, &[tau])?;
    let tau = tau.clamp(-spec.torque_limit[0], spec.torque_limit[0]);
    let (th, om) = (state.q[0], state.qdot[0]);
    let acc = (tau - mass * spec.gravity * length * th.sin() - spec.friction * om) / (mass * length * length);
    let om1 = om + spec.dt * acc;
    let th1 = th + spec.dt * om1;
    Ok(PlantState { q: vec![th1], qdot: vec![om1], contact_force: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn spec() -> PlantSpec {
        PlantSpec { dt: 0.01, ..PlantSpec::pendulum() }
    }

    fn st(th: f64, om: f64) -> PlantState {
        PlantState { q: vec![th], qdot: vec![om], contact_force: vec![] }
    }

    #[test]
    fn rest_at_bottom_is_equilibrium() {
        assert_eq!(pendulum_step(&st(0.0, 0.0), 0.0, &spec()).unwrap(), st(0.0, 0.0));
    }

    #[test]
    fn horizontal_release() {
        let s = pendulum_step(&st(FRAC_PI_2, 0.0), 0.0, &spec()).unwrap();
        assert!((s.qdot[0] + 0.0981).abs() < 1e-15);
        assert!((s.q[0] - (FRAC_PI_2 - 9.81e-4)).abs() < 1e-15);
    }

    #[test]
    fn gravity_compensation() {
        let sp = spec();
        let (th, om): (f64, f64) = (0.7, 0.3);
        let tau = 9.81 * th.sin() + 0.1 * om;
        let s = pendulum_step(&st(th, om), tau, &sp).unwrap();
        assert_eq!(s.qdot[0], om);
    }

    #[test]
    fn torque_is_clamped() {
        let sp = spec();
        let a = pendulum_step(&st(0.0, 0.0), 1e6, &sp).unwrap();
        let b = pendulum_step(&st(0.0, 0.0), sp.torque_limit[0], &sp).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_nonfinite_and_wrong_kind() {
        assert_eq!(pendulum_step(&st(f64::NAN, 0.0), 0.0, &spec()), Err(PlantError::NonFinite));
        assert!(matches!(pendulum_step(&st(0.0, 0.0), 0.0, &PlantSpec::hopper()), Err(PlantError::WrongKind { .. })));
    }

    #[test]
    fn energy_drift_under_one_percent() {
        let sp = PlantSpec { friction: 0.0, dt: 1e-3, ..PlantSpec::pendulum() };
        let energy = |s: &PlantState| 0.5 * s.qdot[0].powi(2) + 9.81 * (1.0 - s.q[0].cos());
        let mut s = st(1.0, 0.0);
        let e0 = energy(&s);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            s = pendulum_step(&s, 0.0, &sp).unwrap();
            worst = worst.max((energy(&s) - e0).abs() / e0);
        }
        assert!(worst < 0.01, "relative drift {worst}");
    }
}

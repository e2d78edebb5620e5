use super::{check_finite, PlantError, PlantKind, PlantSpec, PlantState};

/// Penalty ground reaction: `max(0, k·(−x) − c·ẋ)` below the ground, else 0.
pub fn contact_force(x: f64, xdot: f64, spec: &PlantSpec) -> f64 {
    let PlantKind::Hopper { stiffness, damping, .. } = spec.kind else {
        return 0.0;
    };
    if x < 0.0 {
        (stiffness * (-x) - damping * xdot).max(0.0)
    } else {
        0.0
    }
}

/// `m ẍ = τ + f_c − m g`; the returned state records the `f_c` used.
pub fn hopper_step(state: &PlantState, tau: f64, spec: &PlantSpec) -> Result<PlantState, PlantError> {
    let PlantKind::Hopper { mass, .. } = spec.kind else {
        return Err(PlantError::WrongKind { op: "hopper_step", kind: spec.kind_name() });
    };
    check_finite(state, &[tau])?;
    let tau = tau.clamp(-spec.torque_limit[0], spec.torque_limit[0]);
    let (x, v) = (state.q[0], state.qdot[0]);
    let fc = contact_force(x, v, spec);
    let acc = (tau + fc) / mass - spec.gravity;
    let v1 = v + spec.dt * acc;
    let x1 = x + spec.dt * v1;
    Ok(PlantState { q: vec![x1], qdot: vec![v1], contact_force: vec![fc] })
}

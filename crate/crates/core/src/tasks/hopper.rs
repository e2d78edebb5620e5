use crate::plants::{contact_force, PlantKind, PlantSpec};

use super::{Quintic, ReferencePoint, TaskError};

/// Compression below static stance used for crouch and landing.
const CROUCH_DEPTH: f64 = 0.04;
const SETTLE: f64 = 0.1;
const CROUCH_TIME: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Phase {
    Stance(Quintic),
    Flight { v0: f64, duration: f64 },
    Hold(f64),
}

/// Single hop from static stance: settle, crouch, thrust, ballistic flight,
/// landing absorption, recovery, hold.
///
/// During stance the force reference is `m(ẍ_ref + g)`; in flight it is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct HopperProfile {
    phases: Vec<(f64, Phase)>,
    pub mass: f64,
    pub gravity: f64,
    pub duration: f64,
    pub stance_height: f64,
    pub hop_height: f64,
}

impl HopperProfile {
    pub fn new(hop_height: f64, duration: f64, spec: &PlantSpec) -> Result<Self, TaskError> {
        let PlantKind::Hopper { mass, stiffness, .. } = spec.kind else {
            return Err(TaskError::Infeasible(format!("hopper profile on a {} plant", spec.kind_name())));
        };
        if !(hop_height > 0.0) {
            return Err(TaskError::Infeasible(format!("hop height must be positive, got {hop_height}")));
        }
        if !(stiffness > 0.0) {
            return Err(TaskError::Infeasible("ground stiffness must be positive".into()));
        }
        let g = spec.gravity;
        let x0 = -mass * g / stiffness;
        let low = x0 - CROUCH_DEPTH;
        let v_lo = (2.0 * g * hop_height).sqrt();
        let t_flight = 2.0 * v_lo / g;
        let t_thrust = 2.0 * (-low) / v_lo;
        let needed = SETTLE + 2.0 * CROUCH_TIME + 2.0 * t_thrust + t_flight;
        if needed > duration {
            return Err(TaskError::Infeasible(format!("hop of {hop_height} m needs {needed:.3} s, have {duration} s")));
        }
        let mut phases = Vec::new();
        let mut t = 0.0;
        let mut push = |p: Phase, d: f64| {
            phases.push((t, p));
            t += d;
        };
        push(Phase::Hold(x0), SETTLE);
        push(Phase::Stance(Quintic::new(x0, 0.0, 0.0, low, 0.0, 0.0, CROUCH_TIME)), CROUCH_TIME);
        push(Phase::Stance(Quintic::new(low, 0.0, 0.0, 0.0, v_lo, -g, t_thrust)), t_thrust);
        push(Phase::Flight { v0: v_lo, duration: t_flight }, t_flight);
        push(Phase::Stance(Quintic::new(0.0, -v_lo, -g, low, 0.0, 0.0, t_thrust)), t_thrust);
        push(Phase::Stance(Quintic::new(low, 0.0, 0.0, x0, 0.0, 0.0, CROUCH_TIME)), CROUCH_TIME);
        push(Phase::Hold(x0), duration - needed);

        let profile = Self { phases, mass, gravity: g, duration, stance_height: x0, hop_height };
        // the actuator must supply whatever the ground does not along the reference
        let limit = spec.torque_limit[0];
        let n = 2000;
        for i in 0..=n {
            let r = profile.eval(duration * i as f64 / n as f64);
            let in_flight = r.f_ref == Some(0.0) && r.pos[0] > 0.0;
            if in_flight {
                continue;
            }
            let ground = contact_force(r.pos[0], r.vel[0], spec);
            let required = r.f_ref.unwrap_or(0.0) - ground;
            if required.abs() > limit {
                return Err(TaskError::Infeasible(format!(
                    "hop of {hop_height} m needs {required:.2} N at t = {:.3} s, limit {limit}",
                    r.t
                )));
            }
        }
        Ok(profile)
    }

    /// Reference at `t`, clamped to `[0, duration]`.
    pub fn eval(&self, t: f64) -> ReferencePoint {
        let t = t.clamp(0.0, self.duration);
        let idx = self.phases.iter().rposition(|(t0, _)| *t0 <= t).unwrap_or(0);
        let (t0, phase) = self.phases[idx];
        let s = t - t0;
        let (p, v, a, flight) = match phase {
            Phase::Hold(x) => (x, 0.0, 0.0, false),
            Phase::Stance(q) => {
                let (p, v, a) = q.eval(s.min(q.duration));
                (p, v, a, false)
            }
            Phase::Flight { v0, duration } => {
                let s = s.min(duration);
                (v0 * s - 0.5 * self.gravity * s * s, v0 - self.gravity * s, -self.gravity, true)
            }
        };
        let f = if flight { 0.0 } else { self.mass * (a + self.gravity) };
        ReferencePoint { t, pos: vec![p], vel: vec![v], acc: vec![a], f_ref: Some(f) }
    }

    /// Start and end of the flight phase.
    pub fn flight_window(&self) -> (f64, f64) {
        self.phases
            .iter()
            .find_map(|(t0, p)| match p {
                Phase::Flight { duration, .. } => Some((*t0, t0 + duration)),
                _ => None,
            })
            .unwrap_or((0.0, 0.0))
    }
}

/// One-shot evaluation of a hop profile at time `t`.
pub fn hopper_profile(hop_height: f64, duration: f64, t: f64, spec: &PlantSpec) -> Result<ReferencePoint, TaskError> {
    if !(0.0..=duration).contains(&t) {
        return Err(TaskError::TimeOutOfRange { t, duration });
    }
    Ok(HopperProfile::new(hop_height, duration, spec)?.eval(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> HopperProfile {
        HopperProfile::new(0.06, 1.2, &PlantSpec::hopper()).unwrap()
    }

    #[test]
    fn flight_is_ballistic_and_forceless() {
        let p = profile();
        let (a, b) = p.flight_window();
        assert!(b > a);
        for i in 1..10 {
            let r = p.eval(a + (b - a) * i as f64 / 10.0);
            assert_eq!(r.f_ref, Some(0.0));
            assert_eq!(r.acc[0], -9.81);
            assert!(r.pos[0] > 0.0);
        }
        let apex = p.eval(0.5 * (a + b));
        assert!((apex.pos[0] - 0.06).abs() < 1e-12);
    }

    #[test]
    fn static_stance_carries_weight() {
        let p = profile();
        let r = p.eval(0.05);
        assert_eq!(r.f_ref, Some(9.81));
        assert!((r.pos[0] + 9.81e-3).abs() < 1e-15);
        assert_eq!(p.eval(1.2).f_ref, Some(9.81));
    }

    #[test]
    fn stance_force_consistency_everywhere() {
        let p = profile();
        for i in 0..=1200 {
            let r = p.eval(i as f64 * 1e-3);
            let f = r.f_ref.unwrap();
            assert!(f >= -1e-9, "negative force reference {f} at {}", r.t);
            if f != 0.0 {
                assert!((f - (r.acc[0] + 9.81)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reference_is_continuous() {
        let p = profile();
        let h = 1e-7;
        let (a, _) = p.flight_window();
        for t in [0.1, 0.3, a, 0.9] {
            let (l, r) = (p.eval(t - h), p.eval(t + h));
            assert!((l.pos[0] - r.pos[0]).abs() < 1e-6);
            assert!((l.vel[0] - r.vel[0]).abs() < 1e-4);
            assert!((l.f_ref.unwrap() - r.f_ref.unwrap()).abs() < 1e-3);
        }
    }

    #[test]
    fn infeasible_profiles_are_rejected() {
        assert!(HopperProfile::new(0.06, 0.5, &PlantSpec::hopper()).is_err());
        let weak = PlantSpec { torque_limit: vec![1.0], ..PlantSpec::hopper() };
        assert!(matches!(HopperProfile::new(0.06, 1.2, &weak), Err(TaskError::Infeasible(_))));
        assert!(HopperProfile::new(0.0, 1.2, &PlantSpec::hopper()).is_err());
        assert!(HopperProfile::new(0.06, 1.2, &PlantSpec::pendulum()).is_err());
    }

    #[test]
    fn reintegrating_the_force_reference_reproduces_position() {
        // m ẍ = f_ref − m g, integrated with classical RK4 at a fine step
        let p = profile();
        let dt = 1e-5;
        let acc = |t: f64| p.eval(t).f_ref.unwrap() / p.mass - p.gravity;
        let r0 = p.eval(0.0);
        let (mut x, mut v, mut t) = (r0.pos[0], r0.vel[0], 0.0);
        let mut worst: f64 = 0.0;
        while t < p.duration - dt / 2.0 {
            let (k1x, k1v) = (v, acc(t));
            let (k2x, k2v) = (v + 0.5 * dt * k1v, acc(t + 0.5 * dt));
            let (k3x, k3v) = (v + 0.5 * dt * k2v, acc(t + 0.5 * dt));
            let (k4x, k4v) = (v + dt * k3v, acc(t + dt));
            x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
            v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            t += dt;
            worst = worst.max((x - p.eval(t).pos[0]).abs());
        }
        assert!(worst < 1e-3, "position drift {worst}");
    }
}

//! Open-loop simulation of the three plants.
//!
//! `cargo run --example plants`

use coupled_lab::plants::{fk_ee, observe, PlantSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pendulum = PlantSpec::pendulum();
    let mut s = pendulum.rest_state(&[1.0]);
    println!("pendulum released at 1 rad, no torque:");
    for k in 0..=50 {
        if k % 10 == 0 {
            println!("  t={:.2}s  [θ, θ̇] = {:.4?}", k as f64 * pendulum.control_period(), observe(&s, &pendulum));
        }
        s = pendulum.control_step(&s, &[0.0])?;
    }

    let arm = PlantSpec::arm(3);
    let mut s = arm.rest_state(&[0.3, 0.4, -0.2]);
    println!("3-link arm, constant shoulder torque of 5 N·m:");
    for k in 0..=40 {
        if k % 10 == 0 {
            println!("  t={:.2}s  q={:.3?}  end effector={:.3?}", k as f64 * arm.control_period(), s.q, fk_ee(&s.q, &s.qdot, &[0.0; 3], &arm)?.pos);
        }
        s = arm.control_step(&s, &[5.0, 0.0, 0.0])?;
    }

    let hopper = PlantSpec::hopper();
    let mut s = hopper.rest_state(&[0.1]);
    println!("hopper dropped from 10 cm:");
    for k in 0..=60 {
        if k % 5 == 0 {
            let y = observe(&s, &hopper);
            println!("  t={:.2}s  x={:+.4} m  f_c={:6.2} N  ẋ={:+.3} m/s", k as f64 * hopper.control_period(), y[0], y[1], y[2]);
        }
        s = hopper.control_step(&s, &[0.0])?;
    }
    Ok(())
}

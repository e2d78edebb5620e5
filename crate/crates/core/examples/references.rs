//! Reference trajectories and the desired next states built from them.
//!
//! `cargo run --example references`

use coupled_lab::plants::{observe, PlantSpec};
use coupled_lab::tasks::{evaluation_targets, Gains, Task, TaskSpace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let arm = PlantSpec::arm(3);
    let traj = evaluation_targets(&arm, TaskSpace::EndEffector, 2.0, 0, 1).remove(0);
    println!("end-effector reach from {:?} to {:.3?}", traj.start, traj.goal);
    let task = Task::new(arm, traj, Gains::default())?;
    for k in (0..=task.horizon()).step_by(40) {
        let r = task.reference(k);
        println!("  t={:.2}s  pos={:.4?}  vel={:.4?}", r.t, r.pos, r.vel);
    }

    let hopper = PlantSpec::hopper();
    let traj = evaluation_targets(&hopper, TaskSpace::HopperProfile, 1.2, 0, 1).remove(0);
    println!("hop to {:.3} m apex", traj.goal[0]);
    let task = Task::new(hopper, traj, Gains::default())?;
    for k in (0..=task.horizon()).step_by(10) {
        let r = task.reference(k);
        println!("  t={:.2}s  x_ref={:+.4} m  ẋ_ref={:+.3} m/s  f_ref={:6.2} N", r.t, r.pos[0], r.vel[0], r.f_ref.unwrap());
    }

    // what a controller is asked for from the first state
    let y = task.model_state(&observe(&task.initial_state(), &task.plant));
    println!("model state {:.4?} -> desired next {:.4?}", y, task.desired(&y, 0));
    Ok(())
}

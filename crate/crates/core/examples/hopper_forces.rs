//! Learning to hop: ground-reaction force tracking, model-predicted error and
//! forward-model error for the joint and task objectives.
//!
//! `cargo run --release --example hopper_forces [seed]`

use coupled_lab::losses::LossKind;
use coupled_lab::trainer::{run_learning_loop, ExperimentConfig, PlantConfig, PlantName};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::default();
    cfg.plant = PlantConfig::Name(PlantName::Hopper);
    cfg.seed = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1);
    cfg.schedule.iterations = 10;
    println!("{:<6} {:>4} {:>12} {:>12} {:>14} {:>14}", "loss", "iter", "track m²", "force N²", "predicted err", "forward err");
    for kind in [LossKind::Joint, LossKind::Task] {
        cfg.loss = kind;
        for r in run_learning_loop(&cfg)?.reports.iter().step_by(2) {
            println!(
                "{:<6} {:>4} {:>12.3e} {:>12.2} {:>14.2} {:>14.3e}",
                kind.as_str(),
                r.iteration,
                r.tracking_mse,
                r.force_track_mse.unwrap_or(f64::NAN),
                r.pred_task_err,
                r.fwd_pred_mse
            );
        }
    }
    Ok(())
}

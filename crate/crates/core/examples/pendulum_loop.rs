//! Coupled learning on the pendulum with each controller objective.
//!
//! `cargo run --release --example pendulum_loop [seed] [target]`

use coupled_lab::losses::LossKind;
use coupled_lab::trainer::{run_learning_loop, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut cfg = ExperimentConfig::default();
    cfg.seed = args.first().copied().unwrap_or(1);
    cfg.task.target = args.get(1).copied().unwrap_or(0) as usize;
    cfg.schedule.iterations = 10;
    for kind in LossKind::ALL {
        cfg.loss = kind;
        let start = std::time::Instant::now();
        let out = run_learning_loop(&cfg)?;
        let curve: Vec<String> = out.reports.iter().map(|r| format!("{:.4}", r.tracking_mse)).collect();
        println!("{kind:>18} [{:.1}s] {}", start.elapsed().as_secs_f64(), curve.join(" "));
    }
    Ok(())
}

//! Retrain joint- and task-loss controllers from scratch on data collected by
//! each other's learning loops.
//!
//! `cargo run --release --example data_swap [seed...]`

use coupled_lab::losses::LossKind;
use coupled_lab::trainer::{data_swap_experiment, run_learning_loop, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut seeds: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if seeds.is_empty() {
        seeds.push(1);
    }
    let mut cfg = ExperimentConfig::default();
    cfg.schedule.iterations = 10;
    println!("seed  objective  on joint data  on task data");
    for seed in seeds {
        cfg.seed = seed;
        cfg.loss = LossKind::Joint;
        let a = run_learning_loop(&cfg)?.dataset;
        cfg.loss = LossKind::Task;
        let b = run_learning_loop(&cfg)?.dataset;
        let grid = data_swap_experiment(&a, &b, &cfg)?;
        for (kind, row) in grid.losses.iter().zip(grid.tracking_mse) {
            println!("{seed:>4}  {:<9}  {:>13.3e}  {:>12.3e}", kind.as_str(), row[0], row[1]);
        }
    }
    Ok(())
}

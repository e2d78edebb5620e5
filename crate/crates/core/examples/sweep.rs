//! A small sweep through the experiment driver: run directories, metrics
//! files and aggregated learning curves.
//!
//! `cargo run --release --example sweep [out_dir]`

use coupled_lab::expcli::{cmd_sweep, parse_config_str};
use coupled_lab::losses::LossKind;

const CONFIG: &str = r#"
plant = "pendulum"
[loop]
iterations = 4
babble_steps = 600
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("coupled-lab-sweep"));
    let cfg = parse_config_str(CONFIG, std::env::vars())?;
    let summary = cmd_sweep(&cfg, &[LossKind::Joint, LossKind::InverseSupervised], &[1, 2], &[0, 3], &out, 1, false)?;
    println!("{} cells, {} failed, results in {}", summary.cells.len(), summary.failed(), out.display());
    let aggregate = std::fs::read_to_string(out.join("aggregate.csv"))?;
    for line in aggregate.lines().filter(|l| l.contains(",tracking_mse,") || l.starts_with("loss_kind")) {
        println!("{line}");
    }
    Ok(())
}

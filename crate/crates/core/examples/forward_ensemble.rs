//! Fit a probabilistic forward-model ensemble to pendulum babbling data and
//! score it on transitions it has not seen.
//!
//! `cargo run --release --example forward_ensemble`

use coupled_lab::nn::{AdamConfig, Normalizer};
use coupled_lab::trainer::{build_models, fit_normalizers, motor_babble, train_forward_model, BabbleSettings, ExperimentConfig, TrainSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig::default();
    let task = cfg.build_task()?;
    let babble = |steps, seed| BabbleSettings { steps, smoothing: 0.7, amplitude: 1.0, episode: 200, divergence_bound: 1e3, seed };
    let train = motor_babble(&task, &babble(2000, 1))?;
    let test = motor_babble(&task, &babble(400, 2))?;

    let (mut f, mut g) = build_models(&cfg, &task)?;
    let rows: Vec<usize> = (0..train.len()).collect();
    fit_normalizers(&mut f, &mut g, &train, &rows);
    let score = |f: &coupled_lab::nn::EnsembleForwardModel| {
        let (mut err, mut var) = (0.0, 0.0);
        for t in test.transitions() {
            let p = f.predict_one(&t.s, &t.tau_run).unwrap();
            err += p.mean.iter().zip(&t.s_next).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            var += p.variance.iter().sum::<f64>();
        }
        (err / test.len() as f64, var / test.len() as f64)
    };
    let (e, v) = score(&f);
    println!("untrained: held-out squared error {e:.3e}, predicted variance {v:.3e}");
    for round in 1..=4 {
        let settings = TrainSettings { epochs: 25, batch_size: 64, adam: AdamConfig::with_lr(1e-3), seed: round };
        let out = train_forward_model(&mut f, &train, &rows, &settings)?;
        let (e, v) = score(&f);
        println!("after {:>3} epochs: train NLL {:+.3}, held-out squared error {e:.3e}, predicted variance {v:.3e}", 25 * round, out.loss);
    }
    let spread = Normalizer::fit(&test.transitions().iter().map(|t| t.s_next.clone()).collect::<Vec<_>>(), 2);
    println!("for scale, next-state std on held-out data: {:.3?}", spread.std);
    Ok(())
}

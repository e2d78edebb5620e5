use serde::Serialize;

use crate::diffcore::{Graph, ParamStore};
use crate::losses::{controller_loss, forward_sup_loss, LossError, LossKind, LossSpace};

use super::{build_models, derive_seed, fit_normalizers, motor_babble, BabbleSettings, ExperimentConfig, Stream, TrainError};

/// Central-difference step used by [`gradient_checks`].
pub const CHECK_STEP: f64 = 1e-5;
/// Largest accepted relative gradient error.
pub const CHECK_TOLERANCE: f64 = 1e-4;

/// One finite-difference comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckEntry {
    /// `forward.member<k>` or the controller objective name.
    pub name: String,
    pub params: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

/// Central differences over every unfrozen entry of the store `store_of`
/// returns, against the reverse-mode gradient from `eval`. The relative error
/// is `|analytic − numeric| / max(1, |analytic|)`.
fn compare<M>(
    name: String,
    model: &mut M,
    store_of: fn(&mut M) -> &mut ParamStore,
    eval: impl Fn(&M) -> Result<(f64, Vec<f64>), TrainError>,
) -> Result<GradCheckEntry, TrainError> {
    let (_, analytic) = eval(model)?;
    let n = store_of(model).len();
    let (mut worst, mut checked) = (0.0f64, 0);
    for i in 0..n {
        if store_of(model).is_frozen_at(i) {
            continue;
        }
        let orig = store_of(model).values()[i];
        store_of(model).values_mut()[i] = orig + CHECK_STEP;
        let plus = eval(model).map(|r| r.0);
        store_of(model).values_mut()[i] = orig - CHECK_STEP;
        let minus = eval(model).map(|r| r.0);
        store_of(model).values_mut()[i] = orig;
        let numeric = (plus? - minus?) / (2.0 * CHECK_STEP);
        worst = worst.max((analytic[i] - numeric).abs() / analytic[i].abs().max(1.0));
        checked += 1;
    }
    Ok(GradCheckEntry { name, params: checked, max_rel_error: worst, passed: worst <= CHECK_TOLERANCE && worst.is_finite() })
}

/// Checks reverse-mode gradients of every objective the configuration trains
/// with: the likelihood loss of each forward-model member and all four
/// controller objectives, on `rows` babbling transitions with the models as
/// initialized and normalized by the loop.
pub fn gradient_checks(cfg: &ExperimentConfig, rows: usize) -> Result<Vec<GradCheckEntry>, TrainError> {
    cfg.validate()?;
    let task = cfg.build_task()?;
    let babble = BabbleSettings {
        steps: rows.max(1),
        smoothing: cfg.schedule.babble_smoothing,
        amplitude: cfg.schedule.babble_amplitude,
        episode: task.horizon().max(1),
        divergence_bound: cfg.schedule.divergence_bound,
        seed: derive_seed(cfg.seed, Stream::Babble, 0),
    };
    let data = motor_babble(&task, &babble)?;
    if data.is_empty() {
        return Err(TrainError::EmptyDataset("gradient check batch".into()));
    }
    let (mut f, mut g) = build_models(cfg, &task)?;
    let all: Vec<usize> = (0..data.len()).collect();
    fit_normalizers(&mut f, &mut g, &data, &all);
    let batch = data.batch(&all)?;
    let space = LossSpace::from_models(&f, &g);

    let mut out = Vec::new();
    for k in 0..f.ensemble_size() {
        f.store.freeze_all();
        f.store.set_frozen(k, false);
        let entry = compare(format!("forward.member{k}"), &mut f, |m| &mut m.store, |m| {
            let mut graph = Graph::new();
            let root = forward_sup_loss(&mut graph, m, k, &batch)?;
            let grads = graph.backward(root, &m.store).map_err(LossError::from)?;
            Ok((graph.scalar_value(root), grads))
        })?;
        out.push(entry);
    }
    f.store.freeze_all();
    for kind in LossKind::ALL {
        let entry = compare(kind.as_str().to_string(), &mut g, |c| &mut c.store, |c| {
            let mut graph = Graph::new();
            let root = controller_loss(&mut graph, kind, &f, c, &batch, &space)?;
            let grads = graph.backward(root, &c.store).map_err(LossError::from)?;
            Ok((graph.scalar_value(root), grads))
        })?;
        out.push(entry);
    }
    f.store.unfreeze_all();
    Ok(out)
}

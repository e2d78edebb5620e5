use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffcore::Graph;
use crate::losses::{controller_grad, forward_sup_loss, LossKind, LossSpace};
use crate::nn::{adam_step, AdamConfig, AdamState, ControllerModel, EnsembleForwardModel, Normalizer};

use super::{Dataset, TrainError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOutcome {
    /// Mean minibatch loss over the final epoch, or the full-data loss when
    /// no epoch ran.
    pub loss: f64,
    /// An epoch hit a non-finite loss or gradient and was rolled back.
    pub non_finite: bool,
}

/// Fits every normalizer of `f` and `g` on the given rows: the forward
/// model's input and delta statistics, and the controller's state, relative
/// target and action statistics (the target from observed changes of the
/// target dimensions).
pub fn fit_normalizers(f: &mut EnsembleForwardModel, g: &mut ControllerModel, data: &Dataset, rows: &[usize]) {
    let ts = data.transitions();
    let pick = |f: &dyn Fn(usize) -> Vec<f64>| rows.iter().map(|&i| f(i)).collect::<Vec<_>>();
    let inputs = pick(&|i| ts[i].s.iter().chain(&ts[i].tau_run).copied().collect());
    let deltas = pick(&|i| ts[i].s_next.iter().zip(&ts[i].s).map(|(a, b)| a - b).collect());
    let dims = &g.target_dims;
    let rel = pick(&|i| dims.iter().map(|&d| ts[i].s_next[d] - ts[i].s[d]).collect());
    let states = pick(&|i| ts[i].s.clone());
    let actions = pick(&|i| ts[i].tau_run.clone());
    f.input_norm = Normalizer::fit(&inputs, f.state_dim + f.action_dim);
    f.delta_norm = Normalizer::fit(&deltas, f.state_dim);
    g.state_norm = Normalizer::fit(&states, g.state_dim);
    g.target_norm = Normalizer::fit(&rel, g.target_dim());
    g.action_norm = Normalizer::fit(&actions, g.action_dim);
}

/// Rows the controller objective `kind` trains on. Objectives that compare
/// against `s*` skip babbling rows; `window > 0` keeps only rows added in the
/// last `window` iterations up to `iteration`.
pub fn controller_rows(data: &Dataset, kind: LossKind, iteration: usize, window: usize) -> Vec<usize> {
    let needs_desired = kind != LossKind::InverseSupervised;
    data.select(|p| {
        (!needs_desired || p.desired_valid()) && (window == 0 || p.iteration + window > iteration || p.iteration == 0 && !needs_desired)
    })
}

/// Shuffled minibatch epochs over `rows` driven by `step`, which returns the
/// batch loss and gradient. A non-finite loss or gradient rolls the store
/// back to its state at the start of the epoch and ends training.
fn minibatch_epochs(
    rows: &[usize],
    settings: &TrainSettings,
    rng: &mut ChaCha8Rng,
    values: &mut dyn FnMut() -> Vec<f64>,
    restore: &mut dyn FnMut(&[f64]),
    step: &mut dyn FnMut(&[usize]) -> Result<Option<f64>, TrainError>,
) -> Result<(Option<f64>, bool), TrainError> {
    let bs = settings.batch_size.max(1);
    let mut order = rows.to_vec();
    let mut last = None;
    for _ in 0..settings.epochs {
        order.shuffle(rng);
        let snapshot = values();
        let (mut total, mut count) = (0.0, 0usize);
        for chunk in order.chunks(bs) {
            match step(chunk)? {
                Some(l) => {
                    total += l * chunk.len() as f64;
                    count += chunk.len();
                }
                None => {
                    restore(&snapshot);
                    return Ok((last, true));
                }
            }
        }
        last = Some(total / count as f64);
    }
    Ok((last, false))
}

/// Trains every ensemble member on its own bootstrap resample of `rows` by
/// minibatch adam on the gaussian likelihood loss. Only the member being
/// trained is unfrozen; the store's freeze flags are restored afterwards.
pub fn train_forward_model(
    f: &mut EnsembleForwardModel,
    data: &Dataset,
    rows: &[usize],
    settings: &TrainSettings,
) -> Result<TrainOutcome, TrainError> {
    if rows.is_empty() {
        return Err(TrainError::EmptyDataset("no rows for forward-model training".into()));
    }
    let flags = f.store.frozen_flags();
    let result = (|| {
        let mut losses = Vec::new();
        let mut non_finite = false;
        for k in 0..f.ensemble_size() {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(k as u64);
            let boot: Vec<usize> = (0..rows.len()).map(|_| rows[rng.gen_range(0..rows.len())]).collect();
            f.store.freeze_all();
            f.store.set_frozen(f.members[k].segment, false);
            let range = f.store.segment(f.members[k].segment).range.clone();
            let mut adam = AdamState::new(f.store.len());
            let fm = std::cell::RefCell::new(&mut *f);
            let (last, bad) = minibatch_epochs(
                &boot,
                settings,
                &mut rng,
                &mut || fm.borrow().store.values()[range.clone()].to_vec(),
                &mut |v| fm.borrow_mut().store.values_mut()[range.clone()].copy_from_slice(v),
                &mut |chunk| {
                    let batch = data.batch(chunk)?;
                    let mut fm = fm.borrow_mut();
                    let mut g = Graph::new();
                    let root = forward_sup_loss(&mut g, &fm, k, &batch)?;
                    let loss = g.scalar_value(root);
                    if !loss.is_finite() {
                        return Ok(None);
                    }
                    let grads = match g.backward(root, &fm.store) {
                        Ok(gr) => gr,
                        Err(_) => return Ok(None),
                    };
                    let fm = &mut **fm;
                    match adam_step(&mut fm.store, &grads, &mut adam, &settings.adam) {
                        Ok(()) => Ok(Some(loss)),
                        Err(_) => Ok(None),
                    }
                },
            )?;
            non_finite |= bad;
            let loss = match last {
                Some(l) => l,
                None => {
                    let mut g = Graph::new();
                    let root = forward_sup_loss(&mut g, f, k, &data.batch(rows)?)?;
                    g.scalar_value(root)
                }
            };
            losses.push(loss);
        }
        Ok(TrainOutcome { loss: losses.iter().sum::<f64>() / losses.len() as f64, non_finite })
    })();
    f.store.restore_frozen_flags(&flags);
    result
}

/// Minibatch adam on the controller objective `kind` over `rows`. The forward
/// model is frozen throughout and its parameters never change.
pub fn train_controller(
    g: &mut ControllerModel,
    f: &mut EnsembleForwardModel,
    kind: LossKind,
    data: &Dataset,
    rows: &[usize],
    space: &LossSpace,
    settings: &TrainSettings,
) -> Result<TrainOutcome, TrainError> {
    if rows.is_empty() {
        return Err(TrainError::EmptyDataset(format!("no rows for {kind} controller training")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut adam = AdamState::new(g.store.len());
    let gm = std::cell::RefCell::new(&mut *g);
    let (last, bad) = minibatch_epochs(
        rows,
        settings,
        &mut rng,
        &mut || gm.borrow().store.values().to_vec(),
        &mut |v| gm.borrow_mut().store.values_mut().copy_from_slice(v),
        &mut |chunk| {
            let batch = data.batch(chunk)?;
            let mut gm = gm.borrow_mut();
            let (loss, grads) = match controller_grad(kind, f, &gm, &batch, space) {
                Ok(r) => r,
                Err(crate::losses::LossError::Diff(_)) => return Ok(None),
                Err(e) => return Err(e.into()),
            };
            if !loss.is_finite() {
                return Ok(None);
            }
            match adam_step(&mut gm.store, &grads, &mut adam, &settings.adam) {
                Ok(()) => Ok(Some(loss)),
                Err(_) => Ok(None),
            }
        },
    )?;
    let loss = match last {
        Some(l) => l,
        None => controller_grad(kind, f, g, &data.batch(rows)?, space)?.0,
    };
    Ok(TrainOutcome { loss, non_finite: bad })
}

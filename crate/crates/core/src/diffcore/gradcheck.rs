use super::{DiffError, Graph, ParamStore, Value};

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric| / max(1, |analytic|)` over checked parameters.
    pub max_rel_error: f64,
    /// Flat index where `max_rel_error` occurred.
    pub worst_index: Option<usize>,
    pub checked: usize,
    /// Names of segments skipped because they were frozen.
    pub frozen_segments: Vec<String>,
    pub passed: bool,
}

/// Checks `backward` against central finite differences for every unfrozen
/// parameter of `params`.
///
/// `build` must be deterministic: it is called once for the analytic
/// gradient and twice per checked parameter.
pub fn grad_check<F>(build: F, params: &mut ParamStore, step: f64, tolerance: f64) -> Result<GradCheckReport, DiffError>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Value, DiffError>,
{
    if !(step > 0.0) {
        return Err(DiffError::InvalidStep(step));
    }
    let mut g = Graph::new();
    let root = build(&mut g, params)?;
    let analytic = g.backward(root, params)?;
    drop(g);

    let eval = |params: &ParamStore| -> Result<f64, DiffError> {
        let mut g = Graph::new();
        let root = build(&mut g, params)?;
        Ok(g.scalar_value(root))
    };

    let frozen_segments = params.segments().iter().filter(|s| s.frozen).map(|s| s.name.clone()).collect();
    let mut max_rel_error: f64 = 0.0;
    let mut worst_index = None;
    let mut checked = 0;
    for i in 0..params.len() {
        if params.is_frozen_at(i) {
            continue;
        }
        let orig = params.values()[i];
        params.values_mut()[i] = orig + step;
        let plus = eval(params);
        params.values_mut()[i] = orig - step;
        let minus = eval(params);
        params.values_mut()[i] = orig;
        let (plus, minus) = (plus?, minus?);
        if !plus.is_finite() || !minus.is_finite() {
            return Err(DiffError::NonFinitePerturbation { param: i });
        }
        let numeric = (plus - minus) / (2.0 * step);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(1.0);
        if rel > max_rel_error || worst_index.is_none() {
            max_rel_error = max_rel_error.max(rel);
            worst_index = Some(i);
        }
        checked += 1;
    }
    Ok(GradCheckReport { max_rel_error, worst_index, checked, frozen_segments, passed: max_rel_error <= tolerance })
}

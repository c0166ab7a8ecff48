use super::{ParamId, ParameterStore};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Denominator floor of the relative error. A central difference of a loss
/// of order one carries round-off near `f64::EPSILON / delta` (about 1e-11
/// for `delta = 1e-5`), so gradients whose true value is zero, such as a
/// bias feeding batch normalization, would otherwise score errors near 1e-3.
pub const REL_ERR_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Compare the gradients already accumulated in `store` with central
/// differences of `loss`. Checks every trainable parameter, or only `subset`.
pub fn grad_check_report<F>(
    store: &mut ParameterStore,
    subset: Option<&[ParamId]>,
    delta: f64,
    loss: F,
) -> GradCheckReport
where
    F: Fn(&ParameterStore) -> f64,
{
    let ids: Vec<ParamId> = match subset {
        Some(ids) => ids.to_vec(),
        None => store
            .ids()
            .filter(|&id| store.param(id).kind.trainable())
            .collect(),
    };
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        checked: 0,
    };
    for id in ids {
        for j in 0..store.value(id).data.len() {
            let original = store.value(id).data[j];
            store.value_mut(id).data[j] = original + delta;
            let plus = loss(store);
            store.value_mut(id).data[j] = original - delta;
            let minus = loss(store);
            store.value_mut(id).data[j] = original;
            let numeric = (plus - minus) / (2.0 * delta);
            let err = relative_error(store.grad(id).data[j], numeric);
            report.checked += 1;
            if err > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = report.max_rel_err.max(err);
                report.worst = Some((store.param(id).name.clone(), j));
            }
        }
    }
    report
}

/// Maximum relative error between analytic and central-difference gradients.
pub fn grad_check<F>(
    store: &mut ParameterStore,
    subset: Option<&[ParamId]>,
    delta: f64,
    loss: F,
) -> f64
where
    F: Fn(&ParameterStore) -> f64,
{
    grad_check_report(store, subset, delta, loss).max_rel_err
}

//! Central finite-difference checks of analytic parameter gradients.

use rand::Rng as _;

use super::graph::Gradients;
use super::params::{ParamGroup, ParamStore};
use crate::rng;

/// Worst disagreement found for one parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub group: ParamGroup,
    pub entries: usize,
    pub max_rel_err: f64,
    pub max_abs_grad: f64,
}

/// `|a − n| / max(|a|, |n|, floor)`; the floor keeps entries whose true
/// gradient is zero from dividing by rounding noise.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub const REL_ERR_FLOOR: f64 = 1e-6;

/// Compares `loss`'s analytic gradient with `(L(θ+h) − L(θ−h)) / 2h` on up
/// to `per_param` seeded entries of every parameter in `groups`. `loss`
/// must be deterministic (no dropout).
pub fn check_gradients<F>(
    store: &ParamStore,
    groups: &[ParamGroup],
    per_param: usize,
    h: f64,
    seed: u64,
    loss: F,
) -> Vec<ParamCheck>
where
    F: Fn(&ParamStore) -> (f64, Gradients),
{
    let (_, grads) = loss(store);
    let mut work = store.clone();
    let mut r = rng::seeded(seed, 0x96AD);
    let mut out = Vec::new();
    for id in store.ids() {
        let entry = store.entry(id);
        if !groups.contains(&entry.group) {
            continue;
        }
        let (rows, cols) = entry.value.dim();
        let zero;
        let g = match grads.get(id) {
            Some(g) => g,
            None => {
                zero = super::Mat::zeros((rows, cols));
                &zero
            }
        };
        let n = per_param.min(rows * cols);
        let mut check = ParamCheck {
            name: entry.name.clone(),
            group: entry.group,
            entries: n,
            max_rel_err: 0.0,
            max_abs_grad: 0.0,
        };
        for _ in 0..n {
            let (i, j) = (r.random_range(0..rows), r.random_range(0..cols));
            let orig = store.value(id)[[i, j]];
            work.value_mut_raw(id)[[i, j]] = orig + h;
            let plus = loss(&work).0;
            work.value_mut_raw(id)[[i, j]] = orig - h;
            let minus = loss(&work).0;
            work.value_mut_raw(id)[[i, j]] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = g[[i, j]];
            check.max_rel_err =
                check
                    .max_rel_err
                    .max(relative_error(analytic, numeric, REL_ERR_FLOOR));
            check.max_abs_grad = check.max_abs_grad.max(analytic.abs());
        }
        out.push(check);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Graph, Init};

    #[test]
    fn quadratic_passes() {
        let mut store = ParamStore::new(3);
        let w = store.register("w", ParamGroup::TagHead, (2, 3), Init::Normal(1.0));
        let checks = check_gradients(&store, &[ParamGroup::TagHead], 6, 1e-5, 0, |s| {
            let mut g = Graph::new(s);
            let p = g.param(w);
            let sq = g.mul(p, p);
            let l = g.sum_all(sq);
            (g.scalar(l), g.backward(l))
        });
        assert_eq!(checks.len(), 1);
        assert!(checks[0].max_rel_err < 1e-8, "{checks:?}");
    }

    #[test]
    fn wrong_gradient_is_caught() {
        assert!(relative_error(1.0, 1.1, REL_ERR_FLOOR) > 1e-2);
        assert_eq!(relative_error(0.0, 0.0, REL_ERR_FLOOR), 0.0);
    }
}

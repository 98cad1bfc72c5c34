use crate::neural::round_f32;
use crate::neural::{Gradients, Mat, ParamStore};

/// Adam with bias correction. Updated values are rounded to `f32`.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip: Option<f64>,
    step: i32,
    m: Vec<Option<Mat>>,
    v: Vec<Option<Mat>>,
}

impl Adam {
    pub fn new(lr: f64, clip: Option<f64>) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    /// Applies one update. Frozen parameters and parameters without a
    /// gradient are left untouched.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) {
        if self.lr == 0.0 {
            return;
        }
        if self.m.len() < store.len() {
            self.m.resize(store.len(), None);
            self.v.resize(store.len(), None);
        }
        let scale = match self.clip {
            Some(c) => {
                let norm = global_norm(grads);
                if norm > c {
                    c / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            if store.is_frozen(id) {
                continue;
            }
            let Some(g) = grads.get(id) else { continue };
            let i = id.index();
            let m = self.m[i].get_or_insert_with(|| Mat::zeros(g.dim()));
            let v = self.v[i].get_or_insert_with(|| Mat::zeros(g.dim()));
            let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
            let value = store.value_mut_raw(id);
            ndarray::Zip::from(value)
                .and(m)
                .and(v)
                .and(g)
                .for_each(|w, m, v, &g| {
                    let g = g * scale;
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let mh = *m / bc1;
                    let vh = *v / bc2;
                    *w = round_f32(*w - lr * mh / (vh.sqrt() + eps));
                });
        }
    }
}

pub fn global_norm(grads: &Gradients) -> f64 {
    grads
        .grads
        .iter()
        .flatten()
        .map(|g| g.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Graph, Init, ParamGroup};

    fn quadratic_grads(store: &ParamStore) -> Gradients {
        let id = store.ids().next().unwrap();
        let mut g = Graph::new(store);
        let p = g.param(id);
        let sq = g.mul(p, p);
        let loss = g.sum_all(sq);
        g.backward(loss)
    }

    #[test]
    fn descends_a_quadratic() {
        let mut store = ParamStore::new(3);
        store.register("w", ParamGroup::TagHead, (2, 2), Init::Constant(1.0));
        let mut opt = Adam::new(0.05, None);
        for _ in 0..100 {
            let g = quadratic_grads(&store);
            opt.step(&mut store, &g);
        }
        let id = store.ids().next().unwrap();
        assert!(store.value(id).iter().all(|v| v.abs() < 0.2));
    }

    #[test]
    fn first_step_moves_by_lr() {
        // bias-corrected first step is lr * sign(g)
        let mut store = ParamStore::new(3);
        store.register("w", ParamGroup::TagHead, (1, 1), Init::Constant(1.0));
        let mut opt = Adam::new(0.125, None);
        let g = quadratic_grads(&store);
        opt.step(&mut store, &g);
        let id = store.ids().next().unwrap();
        assert!((store.value(id)[[0, 0]] - 0.875).abs() < 1e-6);
    }

    #[test]
    fn frozen_and_zero_lr_are_noops() {
        let mut store = ParamStore::new(3);
        store.register("w", ParamGroup::TagHead, (2, 3), Init::Normal(1.0));
        let before = store.clone();
        let g = quadratic_grads(&store);
        Adam::new(0.0, None).step(&mut store, &g);
        assert!(store.group_bits_equal(&before, ParamGroup::TagHead));
        store.freeze(ParamGroup::TagHead);
        Adam::new(0.1, None).step(&mut store, &g);
        assert!(store.group_bits_equal(&before, ParamGroup::TagHead));
    }
}

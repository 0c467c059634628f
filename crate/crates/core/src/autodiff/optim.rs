use ndarray::Array2;

use super::params::{ParamGrads, ParamStore};

/// Adam with the usual moment defaults, one instance per parameter store.
#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    first: Vec<Array2<f64>>,
    second: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Array2<f64>> = store.ids().map(|id| Array2::zeros(store.get(id).dim())).collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &ParamGrads, lr: f64) {
        self.step += 1;
        let bias1 = 1.0 - self.beta1.powi(self.step as i32);
        let bias2 = 1.0 - self.beta2.powi(self.step as i32);
        let ids: Vec<_> = store.ids().collect();
        for (k, id) in ids.into_iter().enumerate() {
            if !store.is_trainable(id) {
                continue;
            }
            let g = grads.get(id);
            let (b1, b2) = (self.beta1, self.beta2);
            self.first[k].zip_mut_with(g, |m, &gv| *m = b1 * *m + (1.0 - b1) * gv);
            self.second[k].zip_mut_with(g, |v, &gv| *v = b2 * *v + (1.0 - b2) * gv * gv);
            let (first, second) = (&self.first[k], &self.second[k]);
            let eps = self.eps;
            let value = store.get_mut(id);
            ndarray::Zip::from(value)
                .and(first)
                .and(second)
                .for_each(|p, &m, &v| *p -= lr * (m / bias1) / ((v / bias2).sqrt() + eps));
        }
    }
}

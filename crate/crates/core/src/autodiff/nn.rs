//! Shared per-point layers.
//!
//! Each hidden layer is `linear → standardize → ReLU`. The standardization
//! statistics are not trained: they start as the identity and are estimated
//! once from data by [`Mlp::calibrate`], after which they act as a fixed
//! per-channel affine map (batch normalization in inference mode). That keeps
//! training and inference identical and each point's output a function of
//! that point alone.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::graph::{Graph, Var};
use super::params::{Bound, ParamId, ParamStore};

const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
struct Dense {
    weight: ParamId,
    bias: ParamId,
    /// `(shift, inv_std)` applied as `(h + shift) · inv_std`.
    norm: Option<(ParamId, ParamId)>,
    relu: bool,
}

#[derive(Debug, Clone)]
pub struct Mlp {
    input: usize,
    widths: Vec<usize>,
    layers: Vec<Dense>,
}

impl Mlp {
    /// Builds layers of the given output widths. The last layer is linear
    /// unless `activate_last` is set.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        widths: &[usize],
        activate_last: bool,
        rng: &mut R,
    ) -> Self {
        assert!(input > 0 && widths.iter().all(|&w| w > 0), "layer widths must be positive");
        let mut layers = Vec::with_capacity(widths.len());
        let mut fan_in = input;
        for (l, &width) in widths.iter().enumerate() {
            let hidden = l + 1 < widths.len() || activate_last;
            let gain = if hidden { 2.0 } else { 1.0 };
            let normal = Normal::new(0.0, (gain / fan_in as f64).sqrt()).unwrap();
            let w = Array2::from_shape_simple_fn((fan_in, width), || normal.sample(rng));
            let weight = store.add(format!("{prefix}.{l}.weight"), w, true);
            let bias = store.add(format!("{prefix}.{l}.bias"), Array2::zeros((1, width)), true);
            let norm = hidden.then(|| {
                (
                    store.add(format!("{prefix}.{l}.norm_shift"), Array2::zeros((1, width)), false),
                    store.add(format!("{prefix}.{l}.norm_scale"), Array2::ones((1, width)), false),
                )
            });
            layers.push(Dense {
                weight,
                bias,
                norm,
                relu: hidden,
            });
            fan_in = width;
        }
        Self {
            input,
            widths: widths.to_vec(),
            layers,
        }
    }

    pub fn input_width(&self) -> usize {
        self.input
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("at least one layer")
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Id of the final layer's bias, for callers that want a custom initial output.
    pub fn last_bias(&self) -> ParamId {
        self.layers.last().expect("at least one layer").bias
    }

    /// Applies the layers row-wise to `x` (`rows × input`).
    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var) -> Var {
        assert_eq!(g.shape(x).1, self.input, "MLP input width mismatch");
        let mut h = x;
        for layer in &self.layers {
            h = g.matmul(h, p[layer.weight]);
            h = g.add_row(h, p[layer.bias]);
            if let Some((shift, scale)) = layer.norm {
                h = g.add_row(h, p[shift]);
                h = g.mul_row(h, p[scale]);
            }
            if layer.relu {
                h = g.relu(h);
            }
        }
        h
    }

    /// Same map as [`Mlp::forward`] evaluated directly, without a tape.
    pub fn infer(&self, store: &ParamStore, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(x.ncols(), self.input, "MLP input width mismatch");
        let mut h = x.dot(store.get(self.layers[0].weight));
        for (l, layer) in self.layers.iter().enumerate() {
            if l > 0 {
                h = h.dot(store.get(layer.weight));
            }
            let bias = store.get(layer.bias).row(0).to_owned();
            let norm = layer
                .norm
                .map(|(shift, scale)| (store.get(shift).row(0).to_owned(), store.get(scale).row(0).to_owned()));
            let relu = layer.relu;
            for mut row in h.rows_mut() {
                row += &bias;
                if let Some((shift, scale)) = &norm {
                    row += shift;
                    row *= scale;
                }
                if relu {
                    row.mapv_inplace(|v| v.max(0.0));
                }
            }
        }
        h
    }

    /// Estimates standardization statistics layer by layer from the rows of
    /// `samples`, so each hidden channel has zero mean and unit variance on them.
    pub fn calibrate(&self, store: &mut ParamStore, samples: &[Array2<f64>]) {
        if samples.is_empty() {
            return;
        }
        let mut acts: Vec<Array2<f64>> = samples.to_vec();
        for layer in &self.layers {
            let w = store.get(layer.weight).clone();
            let b = store.get(layer.bias).clone();
            let mut pre: Vec<Array2<f64>> = acts.iter().map(|a| a.dot(&w) + &b).collect();
            if let Some((shift, scale)) = layer.norm {
                let rows: usize = pre.iter().map(|p| p.nrows()).sum();
                let mut mean = Array2::<f64>::zeros((1, w.ncols()));
                for p in &pre {
                    mean += &p.sum_axis(Axis(0)).insert_axis(Axis(0));
                }
                mean /= rows as f64;
                let mut var = Array2::<f64>::zeros((1, w.ncols()));
                for p in &pre {
                    let centered = p - &mean;
                    var += &(&centered * &centered).sum_axis(Axis(0)).insert_axis(Axis(0));
                }
                var /= rows as f64;
                let inv_std = var.mapv(|v| 1.0 / (v + NORM_EPS).sqrt());
                *store.get_mut(shift) = -&mean;
                *store.get_mut(scale) = inv_std.clone();
                for p in &mut pre {
                    *p = (&*p - &mean) * &inv_std;
                }
            }
            if layer.relu {
                for p in &mut pre {
                    p.mapv_inplace(|v| v.max(0.0));
                }
            }
            acts = pre;
        }
    }
}

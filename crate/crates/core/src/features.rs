//! Point-wise embedding with a shared per-point map and a max-pooled global
//! feature concatenated back onto every row.

use ndarray::{s, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Bound, Graph, Mlp, ParamStore, Var};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Default widths of the shared per-point layers.
pub const DEFAULT_ENCODER_WIDTHS: [usize; 5] = [64, 64, 64, 128, 128];

/// Per-point features `[H, maxpool(H)]` for one cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub features: Array2<f64>,
    pub local_dim: usize,
    pub global_dim: usize,
}

impl FeatureMap {
    pub fn dim(&self) -> usize {
        self.local_dim + self.global_dim
    }

    pub fn local(&self) -> ndarray::ArrayView2<'_, f64> {
        self.features.slice(ndarray::s![.., ..self.local_dim])
    }

    pub fn global(&self) -> ndarray::ArrayView1<'_, f64> {
        self.features.row(0).slice_move(ndarray::s![self.local_dim..])
    }
}

/// Weights and normalization statistics of the shared per-point map.
#[derive(Debug, Clone)]
pub struct EncoderParams {
    store: ParamStore,
    mlp: Mlp,
}

impl EncoderParams {
    /// Seeded fan-in-scaled initialization. Every layer, including the last,
    /// is followed by normalization and ReLU.
    pub fn new(widths: &[usize], seed: u64) -> Result<Self> {
        if widths.is_empty() || widths.contains(&0) {
            return Err(Error::config(format!("encoder widths must be positive, got {widths:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "encoder", 3, widths, true, &mut rng);
        Ok(Self { store, mlp })
    }

    pub fn widths(&self) -> &[usize] {
        self.mlp.widths()
    }

    pub fn local_dim(&self) -> usize {
        self.mlp.output_width()
    }

    /// Width of a full feature row.
    pub fn feature_dim(&self) -> usize {
        2 * self.local_dim()
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Records normalization statistics from a set of clouds.
    pub fn calibrate(&mut self, clouds: &[PointCloud]) {
        let samples: Vec<Array2<f64>> = clouds.iter().map(|c| c.points().clone()).collect();
        self.mlp.calibrate(&mut self.store, &samples);
    }

    /// Records normalization statistics from raw point arrays.
    pub fn calibrate_points(&mut self, samples: &[Array2<f64>]) {
        self.mlp.calibrate(&mut self.store, samples);
    }

    /// Per-point local features `H` on the tape.
    pub fn local_features(&self, g: &mut Graph, p: &Bound, points: Var) -> Var {
        self.mlp.forward(g, p, points)
    }

    /// The full feature map `[H, maxpool(H)]` on the tape.
    pub fn forward(&self, g: &mut Graph, p: &Bound, points: Var) -> Var {
        let local = self.mlp.forward(g, p, points);
        let n = g.shape(points).0;
        let global = g.max_pool_rows(local);
        let spread = g.broadcast_rows(global, n);
        g.concat_cols(local, spread)
    }
}

/// Evaluates the feature map of `cloud`.
pub fn extract_features(cloud: &PointCloud, params: &EncoderParams) -> Result<FeatureMap> {
    extract_from_points(cloud.points(), params)
}

pub(crate) fn extract_from_points(points: &Array2<f64>, params: &EncoderParams) -> Result<FeatureMap> {
    if points.ncols() != 3 {
        return Err(Error::config(format!("encoder expects 3 columns, got {}", points.ncols())));
    }
    if points.nrows() == 0 {
        return Err(Error::arg("cannot extract features of an empty cloud"));
    }
    let local = params.mlp.infer(&params.store, points);
    let global = local.fold_axis(Axis(0), f64::NEG_INFINITY, |&a, &b| a.max(b));
    let width = local.ncols();
    let mut features = Array2::<f64>::zeros((points.nrows(), 2 * width));
    features.slice_mut(s![.., ..width]).assign(&local);
    features.slice_mut(s![.., width..]).assign(&global.broadcast((points.nrows(), width)).expect("row broadcast"));
    Ok(FeatureMap {
        features,
        local_dim: params.local_dim(),
        global_dim: params.local_dim(),
    })
}

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::matrix::{anneal_softmax, truncate_columns, SamplingMatrix};
use super::sparse::{sparse_apply, sparsify, DEFAULT_THRESHOLD};
use crate::autodiff::{Bound, Graph, Mlp, ParamStore, Var};
use crate::cloud::{DownsampleResult, PointCloud};
use crate::error::{ensure_arg, Error, Result};
use crate::features::{extract_features, EncoderParams, FeatureMap};
use crate::samplers::{fps_completion, match_to_subset};

/// Default hidden widths of the row-wise logit map; the output width is `m`.
pub const DEFAULT_RHO_HIDDEN: [usize; 3] = [512, 256, 128];

/// The row-wise map from a feature row to `m` sampling logits.
#[derive(Debug, Clone)]
pub struct SamplerParams {
    store: ParamStore,
    rho: Mlp,
    tau_min: f64,
}

impl SamplerParams {
    /// `hidden` widths are followed by a linear layer of width `m_out`.
    pub fn new(feature_dim: usize, hidden: &[usize], m_out: usize, tau_min: f64, seed: u64) -> Result<Self> {
        if feature_dim == 0 || m_out == 0 || hidden.contains(&0) {
            return Err(Error::config(format!(
                "sampler widths must be positive (features {feature_dim}, hidden {hidden:?}, m {m_out})"
            )));
        }
        if tau_min.is_nan() || tau_min <= 0.0 {
            return Err(Error::config(format!("tau_min must be positive, got {tau_min}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let mut widths = hidden.to_vec();
        widths.push(m_out);
        let rho = Mlp::new(&mut store, "sampler.rho", feature_dim, &widths, false, &mut rng);
        Ok(Self { store, rho, tau_min })
    }

    pub fn feature_dim(&self) -> usize {
        self.rho.input_width()
    }

    /// Number of columns the map produces (`m`, or `m_max` for the flexible variant).
    pub fn m_out(&self) -> usize {
        self.rho.output_width()
    }

    pub fn hidden(&self) -> &[usize] {
        let w = self.rho.widths();
        &w[..w.len() - 1]
    }

    /// Inference temperature.
    pub fn tau_min(&self) -> f64 {
        self.tau_min
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Records normalization statistics from feature maps.
    pub fn calibrate(&mut self, features: &[Array2<f64>]) {
        self.rho.calibrate(&mut self.store, features);
    }

    /// Raw logits `n×m_out` on the tape.
    pub fn forward(&self, g: &mut Graph, p: &Bound, features: Var) -> Var {
        self.rho.forward(g, p, features)
    }
}

/// Applies the row-wise map to every feature row.
pub fn predict_raw_rows(features: &FeatureMap, params: &SamplerParams) -> Result<Array2<f64>> {
    if features.dim() != params.feature_dim() || features.features.ncols() != params.feature_dim() {
        return Err(Error::config(format!(
            "sampler expects {}-dimensional features, got {}",
            params.feature_dim(),
            features.features.ncols()
        )));
    }
    Ok(params.rho.infer(&params.store, &features.features))
}

/// Generates `m` points from `cloud`, matches them back onto the cloud and
/// completes the match to exactly `m` indices.
pub fn downsample(
    cloud: &PointCloud,
    encoder: &EncoderParams,
    sampler: &SamplerParams,
    m: usize,
    tau: f64,
    r: f64,
) -> Result<DownsampleResult> {
    let generated = generate(cloud, encoder, sampler, m, tau, r)?;
    let matched = match_to_subset(cloud, generated.view())?;
    let completed = fps_completion(cloud, &matched, m)?;
    Ok(DownsampleResult {
        generated,
        matched,
        completed,
    })
}

fn sampling_matrix(
    cloud: &PointCloud,
    encoder: &EncoderParams,
    sampler: &SamplerParams,
    m: usize,
    tau: f64,
) -> Result<SamplingMatrix> {
    ensure_arg!(m >= 1 && m <= cloud.len(), "cannot sample {m} of {} points", cloud.len());
    ensure_arg!(m <= sampler.m_out(), "sampler produces at most {} columns, asked for {m}", sampler.m_out());
    let features = extract_features(cloud, encoder)?;
    let raw = predict_raw_rows(&features, sampler)?;
    let s = anneal_softmax(&raw, tau)?;
    if m == sampler.m_out() {
        Ok(s)
    } else {
        truncate_columns(&s, m)
    }
}

fn generate(
    cloud: &PointCloud,
    encoder: &EncoderParams,
    sampler: &SamplerParams,
    m: usize,
    tau: f64,
    r: f64,
) -> Result<Array2<f64>> {
    let s = sampling_matrix(cloud, encoder, sampler, m, tau)?;
    sparse_apply(cloud, &sparsify(&s, r)?)
}

/// A feature encoder and a logit map trained together as one sampler.
#[derive(Debug, Clone)]
pub struct LearnedSampler {
    pub encoder: EncoderParams,
    pub sampler: SamplerParams,
    /// Sparsification threshold used at inference.
    pub threshold: f64,
}

impl LearnedSampler {
    pub fn new(encoder_widths: &[usize], rho_hidden: &[usize], m_out: usize, tau_min: f64, seed: u64) -> Result<Self> {
        let encoder = EncoderParams::new(encoder_widths, seed)?;
        let sampler = SamplerParams::new(encoder.feature_dim(), rho_hidden, m_out, tau_min, seed.wrapping_add(1))?;
        Ok(Self {
            encoder,
            sampler,
            threshold: DEFAULT_THRESHOLD,
        })
    }

    pub fn m_out(&self) -> usize {
        self.sampler.m_out()
    }

    /// Calibrates the encoder on `clouds`, then the logit map on their features.
    pub fn calibrate(&mut self, clouds: &[PointCloud]) -> Result<()> {
        self.encoder.calibrate(clouds);
        let features = clouds
            .iter()
            .map(|c| extract_features(c, &self.encoder).map(|f| f.features))
            .collect::<Result<Vec<_>>>()?;
        self.sampler.calibrate(&features);
        Ok(())
    }

    /// Dense sampling matrix at the inference temperature, truncated to `m` columns.
    pub fn matrix(&self, cloud: &PointCloud, m: usize) -> Result<SamplingMatrix> {
        sampling_matrix(cloud, &self.encoder, &self.sampler, m, self.sampler.tau_min())
    }

    /// Generated points through the sparse inference path.
    pub fn generate(&self, cloud: &PointCloud, m: usize) -> Result<Array2<f64>> {
        generate(cloud, &self.encoder, &self.sampler, m, self.sampler.tau_min(), self.threshold)
    }

    pub fn downsample(&self, cloud: &PointCloud, m: usize) -> Result<DownsampleResult> {
        downsample(cloud, &self.encoder, &self.sampler, m, self.sampler.tau_min(), self.threshold)
    }

    /// Builds `(S, Q)` on the tape for training; `S` keeps its leftmost `m` columns.
    pub fn forward(
        &self,
        g: &mut Graph,
        encoder: &Bound,
        sampler: &Bound,
        points: Var,
        m: usize,
        tau: f64,
    ) -> (Var, Var) {
        let features = self.encoder.forward(g, encoder, points);
        let raw = self.sampler.forward(g, sampler, features);
        let raw = if m == self.m_out() { raw } else { g.slice_cols(raw, 0..m) };
        let s = g.col_softmax(raw, tau);
        let q = g.matmul_tn(s, points);
        (s, q)
    }

    pub fn checksum(&self) -> u64 {
        self.encoder.store().checksum() ^ self.sampler.store().checksum().rotate_left(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{make_synthetic, Shape};
    use ndarray::array;

    #[test]
    fn hand_set_linear_map() {
        let mut params = SamplerParams::new(2, &[], 2, 0.1, 0).unwrap();
        let w = params.store().find("sampler.rho.0.weight").unwrap();
        let b = params.store().find("sampler.rho.0.bias").unwrap();
        *params.store_mut().get_mut(w) = array![[1.0, 2.0], [3.0, -1.0]];
        *params.store_mut().get_mut(b) = array![[0.5, 0.0]];
        let features = FeatureMap {
            features: array![[1.0, 1.0], [2.0, 0.0]],
            local_dim: 1,
            global_dim: 1,
        };
        let raw = predict_raw_rows(&features, &params).unwrap();
        assert_eq!(raw, array![[4.5, 1.0], [2.5, 4.0]]);
    }

    #[test]
    fn dimension_mismatch_is_a_config_error() {
        let params = SamplerParams::new(4, &[8], 2, 0.1, 0).unwrap();
        let features = FeatureMap {
            features: Array2::zeros((3, 6)),
            local_dim: 3,
            global_dim: 3,
        };
        assert!(matches!(predict_raw_rows(&features, &params), Err(Error::Config(_))));
    }

    #[test]
    fn identical_rows_give_identical_logits() {
        let params = SamplerParams::new(3, &[8], 4, 0.1, 0).unwrap();
        let features = FeatureMap {
            features: array![[0.1, 0.2, 0.3], [0.5, 0.5, 0.5], [0.1, 0.2, 0.3]],
            local_dim: 2,
            global_dim: 1,
        };
        let raw = predict_raw_rows(&features, &params).unwrap();
        assert_eq!(raw.row(0), raw.row(2));
    }

    #[test]
    fn downsample_contract() {
        let cloud = make_synthetic(Shape::Sphere, 64, 3).unwrap();
        let mut s = LearnedSampler::new(&[8, 16], &[16], 8, 0.1, 7).unwrap();
        s.calibrate(std::slice::from_ref(&cloud)).unwrap();
        for m in [1, 4, 8] {
            let out = s.downsample(&cloud, m).unwrap();
            assert_eq!(out.generated.nrows(), m);
            assert_eq!(out.completed.len(), m);
            assert!(out.matched.len() <= m);
            assert_eq!(&out.completed[..out.matched.len()], &out.matched[..]);
        }
        assert!(s.downsample(&cloud, 9).is_err());
    }

    #[test]
    fn tape_forward_matches_inference_at_zero_threshold() {
        let cloud = make_synthetic(Shape::Torus, 32, 1).unwrap();
        let mut s = LearnedSampler::new(&[8, 16], &[16], 6, 0.2, 9).unwrap();
        s.calibrate(std::slice::from_ref(&cloud)).unwrap();
        s.threshold = 0.0;
        let mut g = Graph::new();
        let e = s.encoder.store().bind(&mut g, false);
        let p = s.sampler.store().bind(&mut g, false);
        let x = g.constant(cloud.points().clone());
        let (_, q) = s.forward(&mut g, &e, &p, x, 4, 0.2);
        let generated = s.generate(&cloud, 4).unwrap();
        assert!(g.value(q).iter().zip(&generated).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}

//! Downstream task networks the sampler is trained against: a PointNet-style
//! classifier, a fully connected reconstruction decoder, a multi-patch
//! folding decoder and a one-pass rigid registration regressor.

mod mfold;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use mfold::MFoldConfig;

use crate::autodiff::{Bound, Graph, Mlp, ParamStore, Var};
use crate::cloud::RigidTransform;
use crate::error::{ensure_arg, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classification,
    ReconstructionMlp,
    ReconstructionMfold,
    Registration,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [
        TaskKind::Classification,
        TaskKind::ReconstructionMlp,
        TaskKind::ReconstructionMfold,
        TaskKind::Registration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Classification => "classification",
            TaskKind::ReconstructionMlp => "reconstruction_mlp",
            TaskKind::ReconstructionMfold => "reconstruction_mfold",
            TaskKind::Registration => "registration",
        }
    }

    pub fn is_reconstruction(self) -> bool {
        matches!(self, TaskKind::ReconstructionMlp | TaskKind::ReconstructionMfold)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classification" | "cls" => Ok(TaskKind::Classification),
            "reconstruction" | "reconstruction_mlp" | "recon" => Ok(TaskKind::ReconstructionMlp),
            "reconstruction_mfold" | "mfold" => Ok(TaskKind::ReconstructionMfold),
            "registration" | "reg" => Ok(TaskKind::Registration),
            other => Err(Error::arg(format!("unknown task {other:?}"))),
        }
    }
}

/// Architecture of a task head.
///
/// `encoder_widths` is the shared per-point map whose output is max-pooled to
/// a code. `mlp_widths` are the hidden widths of the map applied to the code
/// (classifier, decoder or registration regressor); the output layer is
/// implied by the task. `fold_widths` are the hidden widths of each folding map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub kind: TaskKind,
    pub encoder_widths: Vec<usize>,
    pub mlp_widths: Vec<usize>,
    #[serde(default)]
    pub num_classes: usize,
    #[serde(default)]
    pub output_points: usize,
    #[serde(default)]
    pub mfold: Option<MFoldConfig>,
    #[serde(default)]
    pub fold_widths: Vec<usize>,
}

impl HeadSpec {
    /// PointNet-vanilla classifier.
    pub fn classification(num_classes: usize) -> Self {
        Self {
            kind: TaskKind::Classification,
            encoder_widths: vec![64, 64, 64, 128, 1024],
            mlp_widths: vec![512, 256],
            num_classes,
            output_points: 0,
            mfold: None,
            fold_widths: Vec::new(),
        }
    }

    /// Point encoder to a 128-d code, fully connected decoder to `output_points`.
    pub fn reconstruction_mlp(output_points: usize) -> Self {
        Self {
            kind: TaskKind::ReconstructionMlp,
            encoder_widths: vec![64, 128, 128, 256, 128],
            mlp_widths: vec![256, 256],
            num_classes: 0,
            output_points,
            mfold: None,
            fold_widths: Vec::new(),
        }
    }

    /// Point encoder to a `code_dim` code followed by shared folding maps.
    pub fn reconstruction_mfold(cfg: MFoldConfig) -> Self {
        Self {
            kind: TaskKind::ReconstructionMfold,
            encoder_widths: vec![64, 128, 128, 256, cfg.code_dim],
            mlp_widths: Vec::new(),
            num_classes: 0,
            output_points: cfg.output_points(),
            mfold: Some(cfg),
            fold_widths: vec![64, 32],
        }
    }

    /// Shared encoder on both clouds, regressor on the concatenated codes.
    pub fn registration() -> Self {
        Self {
            kind: TaskKind::Registration,
            encoder_widths: vec![64, 64, 64, 128, 1024],
            mlp_widths: vec![256, 128],
            num_classes: 0,
            output_points: 0,
            mfold: None,
            fold_widths: Vec::new(),
        }
    }

    pub fn default_for(kind: TaskKind) -> Self {
        match kind {
            TaskKind::Classification => Self::classification(40),
            TaskKind::ReconstructionMlp => Self::reconstruction_mlp(1024),
            TaskKind::ReconstructionMfold => Self::reconstruction_mfold(MFoldConfig {
                patches: 4,
                code_dim: 128,
                grid: (16, 16),
            }),
            TaskKind::Registration => Self::registration(),
        }
    }

    pub fn code_dim(&self) -> usize {
        self.encoder_widths.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |w: &[usize]| w.iter().all(|&v| v > 0);
        if self.encoder_widths.is_empty() || !positive(&self.encoder_widths) || !positive(&self.mlp_widths) {
            return Err(Error::config(format!("head widths must be positive: {self:?}")));
        }
        match self.kind {
            TaskKind::Classification if self.num_classes < 2 => {
                Err(Error::config("a classifier needs at least two classes"))
            }
            TaskKind::ReconstructionMlp if self.output_points == 0 => {
                Err(Error::config("a reconstruction decoder needs a positive output size"))
            }
            TaskKind::ReconstructionMfold => {
                let cfg = self.mfold.ok_or_else(|| Error::config("folding decoder needs a layout"))?;
                cfg.validate()?;
                if cfg.code_dim != self.code_dim() {
                    return Err(Error::config(format!(
                        "folding layout expects a {}-d code but the encoder produces {}",
                        cfg.code_dim,
                        self.code_dim()
                    )));
                }
                if self.fold_widths.is_empty() || !positive(&self.fold_widths) {
                    return Err(Error::config("folding maps need positive hidden widths"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
enum Decoder {
    Mlp(Mlp),
    Fold { first: Mlp, second: Mlp, grid: Array2<f64> },
}

/// A task network with its parameters.
#[derive(Debug, Clone)]
pub struct TaskHead {
    spec: HeadSpec,
    store: ParamStore,
    encoder: Mlp,
    decoder: Decoder,
    /// A frozen head is never updated by sampler training.
    pub frozen: bool,
}

impl TaskHead {
    pub fn new(spec: HeadSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let encoder = Mlp::new(&mut store, "head.encoder", 3, &spec.encoder_widths, true, &mut rng);
        let code = spec.code_dim();
        let with_output = |out: usize| {
            let mut w = spec.mlp_widths.clone();
            w.push(out);
            w
        };
        let decoder = match spec.kind {
            TaskKind::Classification => Decoder::Mlp(Mlp::new(
                &mut store,
                "head.mlp",
                code,
                &with_output(spec.num_classes),
                false,
                &mut rng,
            )),
            TaskKind::ReconstructionMlp => Decoder::Mlp(Mlp::new(
                &mut store,
                "head.mlp",
                code,
                &with_output(spec.output_points * 3),
                false,
                &mut rng,
            )),
            TaskKind::Registration => {
                let mlp = Mlp::new(&mut store, "head.mlp", 2 * code, &with_output(7), false, &mut rng);
                let last = store.find(&format!("head.mlp.{}.weight", spec.mlp_widths.len())).unwrap();
                store.get_mut(last).mapv_inplace(|v| v * 0.1);
                *store.get_mut(mlp.last_bias()) = Array2::from_shape_vec((1, 7), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
                Decoder::Mlp(mlp)
            }
            TaskKind::ReconstructionMfold => {
                let cfg = spec.mfold.expect("validated");
                let mut widths = spec.fold_widths.clone();
                widths.push(3);
                let first = Mlp::new(&mut store, "head.fold1", cfg.d_prime() + 2, &widths, false, &mut rng);
                let second = Mlp::new(&mut store, "head.fold2", cfg.d_prime() + 5, &widths, false, &mut rng);
                Decoder::Fold {
                    first,
                    second,
                    grid: cfg.grid_lattice(),
                }
            }
        };
        Ok(Self {
            spec,
            store,
            encoder,
            decoder,
            frozen: true,
        })
    }

    pub fn kind(&self) -> TaskKind {
        self.spec.kind
    }

    pub fn spec(&self) -> &HeadSpec {
        &self.spec
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn num_parameters(&self) -> usize {
        self.store.num_parameters()
    }

    /// Fingerprint of every parameter bit.
    pub fn checksum(&self) -> u64 {
        self.store.checksum()
    }

    /// Max-pooled code `1×d` of one cloud on the tape.
    pub fn code(&self, g: &mut Graph, p: &Bound, points: Var) -> Var {
        let h = self.encoder.forward(g, p, points);
        g.max_pool_rows(h)
    }

    /// The head's output on the tape: logits `1×C`, a reconstruction `n×3`,
    /// or `1×7` (unit quaternion then translation) for registration, which
    /// needs `template`.
    pub fn forward(&self, g: &mut Graph, p: &Bound, points: Var, template: Option<Var>) -> Var {
        let code = self.code(g, p, points);
        match (&self.decoder, self.spec.kind) {
            (Decoder::Mlp(mlp), TaskKind::Classification) => mlp.forward(g, p, code),
            (Decoder::Mlp(mlp), TaskKind::ReconstructionMlp) => {
                let flat = mlp.forward(g, p, code);
                g.reshape(flat, self.spec.output_points, 3)
            }
            (Decoder::Mlp(mlp), TaskKind::Registration) => {
                let template = template.expect("registration needs a template cloud");
                let other = self.code(g, p, template);
                let joint = g.concat_cols(code, other);
                let out = mlp.forward(g, p, joint);
                let quat = g.slice_cols(out, 0..4);
                let quat = g.normalize_rows(quat);
                let trans = g.slice_cols(out, 4..7);
                g.concat_cols(quat, trans)
            }
            (Decoder::Fold { first, second, grid }, _) => {
                let (chunks, grid) = self.fold_inputs(g, code, grid);
                let x1 = g.concat_cols(chunks, grid);
                let f1 = first.forward(g, p, x1);
                let tail = g.concat_cols(f1, grid);
                let x2 = g.concat_cols(chunks, tail);
                second.forward(g, p, x2)
            }
            _ => unreachable!("decoder matches kind"),
        }
    }

    /// Local codes repeated per grid point and the tiled grid, both `(M·g)×·`.
    fn fold_inputs(&self, g: &mut Graph, code: Var, grid: &Array2<f64>) -> (Var, Var) {
        let cfg = self.spec.mfold.expect("folding head");
        let local = g.reshape(code, cfg.patches, cfg.d_prime());
        let chunks = g.repeat_rows(local, grid.nrows());
        let tiled = ndarray::concatenate(ndarray::Axis(0), &vec![grid.view(); cfg.patches]).unwrap();
        (chunks, g.constant(tiled))
    }

    /// Calibrates normalization statistics stage by stage. Registration
    /// samples are used as source/template pairs `(2k, 2k+1)`.
    pub fn calibrate(&mut self, samples: &[Array2<f64>]) {
        if samples.is_empty() {
            return;
        }
        self.encoder.calibrate(&mut self.store, samples);
        let codes: Vec<Array2<f64>> = samples
            .iter()
            .map(|s| {
                let mut g = Graph::new();
                let p = self.store.bind(&mut g, false);
                let x = g.constant(s.clone());
                let c = self.code(&mut g, &p, x);
                g.value(c).clone()
            })
            .collect();
        match &self.decoder {
            Decoder::Mlp(mlp) => {
                let inputs = if self.spec.kind == TaskKind::Registration {
                    codes
                        .chunks_exact(2)
                        .map(|pair| ndarray::concatenate(ndarray::Axis(1), &[pair[0].view(), pair[1].view()]).unwrap())
                        .collect()
                } else {
                    codes
                };
                let stacked = stack_rows(&inputs);
                if let Some(stacked) = stacked {
                    mlp.calibrate(&mut self.store, &[stacked]);
                }
            }
            Decoder::Fold { first, second, grid } => {
                let mut x1s = Vec::new();
                for c in &codes {
                    let mut g = Graph::new();
                    let code = g.constant(c.clone());
                    let (chunks, grid_var) = self.fold_inputs(&mut g, code, grid);
                    let x1 = g.concat_cols(chunks, grid_var);
                    x1s.push(g.value(x1).clone());
                }
                first.calibrate(&mut self.store, &x1s);
                let mut x2s = Vec::new();
                for (c, x1) in codes.iter().zip(&x1s) {
                    let mut g = Graph::new();
                    let p = self.store.bind(&mut g, false);
                    let code = g.constant(c.clone());
                    let (chunks, grid_var) = self.fold_inputs(&mut g, code, grid);
                    let x1 = g.constant(x1.clone());
                    let f1 = first.forward(&mut g, &p, x1);
                    let tail = g.concat_cols(f1, grid_var);
                    let x2 = g.concat_cols(chunks, tail);
                    x2s.push(g.value(x2).clone());
                }
                second.calibrate(&mut self.store, &x2s);
            }
        }
    }

    fn evaluate(&self, points: ArrayView2<'_, f64>, template: Option<ArrayView2<'_, f64>>) -> Result<Array2<f64>> {
        ensure_arg!(points.nrows() > 0 && points.ncols() == 3, "head input must be a nonempty k×3 array");
        let mut g = Graph::new();
        let p = self.store.bind(&mut g, false);
        let x = g.constant(points.to_owned());
        let t = match template {
            Some(t) => {
                ensure_arg!(t.nrows() > 0 && t.ncols() == 3, "template must be a nonempty k×3 array");
                Some(g.constant(t.to_owned()))
            }
            None => None,
        };
        let out = self.forward(&mut g, &p, x, t);
        Ok(g.value(out).clone())
    }

    fn expect_kind(&self, kinds: &[TaskKind]) -> Result<()> {
        if kinds.contains(&self.spec.kind) {
            Ok(())
        } else {
            Err(Error::arg(format!("operation not supported by a {} head", self.spec.kind)))
        }
    }
}

fn stack_rows(rows: &[Array2<f64>]) -> Option<Array2<f64>> {
    let views: Vec<_> = rows.iter().map(|r| r.view()).collect();
    ndarray::concatenate(ndarray::Axis(0), &views).ok()
}

/// Class logits of a `k×3` point set.
pub fn classify(points: ArrayView2<'_, f64>, head: &TaskHead) -> Result<Vec<f64>> {
    head.expect_kind(&[TaskKind::Classification])?;
    Ok(head.evaluate(points, None)?.iter().copied().collect())
}

/// Fixed-size reconstruction from the fully connected decoder.
pub fn reconstruct_mlp(points: ArrayView2<'_, f64>, head: &TaskHead) -> Result<Array2<f64>> {
    head.expect_kind(&[TaskKind::ReconstructionMlp])?;
    head.evaluate(points, None)
}

/// Reconstruction from the folding decoder; `cfg` must match the head.
pub fn reconstruct_mfold(points: ArrayView2<'_, f64>, cfg: &MFoldConfig, head: &TaskHead) -> Result<Array2<f64>> {
    head.expect_kind(&[TaskKind::ReconstructionMfold])?;
    cfg.validate()?;
    if head.spec.mfold.as_ref() != Some(cfg) {
        return Err(Error::config(format!(
            "folding layout {cfg:?} does not match the head's {:?}",
            head.spec.mfold
        )));
    }
    head.evaluate(points, None)
}

/// Reconstruction from either decoder kind.
pub fn reconstruct(points: ArrayView2<'_, f64>, head: &TaskHead) -> Result<Array2<f64>> {
    head.expect_kind(&[TaskKind::ReconstructionMlp, TaskKind::ReconstructionMfold])?;
    head.evaluate(points, None)
}

/// Transform predicted to carry `source` onto `target`.
pub fn register(source: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>, head: &TaskHead) -> Result<RigidTransform> {
    head.expect_kind(&[TaskKind::Registration])?;
    let out = head.evaluate(source, Some(target))?;
    RigidTransform::from_raw(
        [out[[0, 0]], out[[0, 1]], out[[0, 2]], out[[0, 3]]],
        [out[[0, 4]], out[[0, 5]], out[[0, 6]]],
    )
}

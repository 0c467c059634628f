use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::DEFAULT_ENCODER_WIDTHS;
use crate::heads::{HeadSpec, MFoldConfig, TaskKind};
use crate::losses::{LossWeights, DEFAULT_LAMBDA_EMD};
use crate::sampling::{DEFAULT_RHO_HIDDEN, DEFAULT_THRESHOLD};
use crate::synthetic::Shape;

/// Where training and test clouds come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// Synthetic shapes, one class per shape, split evenly over classes.
    Shapes {
        shapes: Vec<Shape>,
        train: usize,
        test: usize,
        /// Apply a random rotation to every cloud.
        rotate: bool,
    },
    /// Boxes with random half-extents, a single class.
    Boxes { train: usize, test: usize },
    /// `<root>/<split>/<class>/<id>.xyz`.
    Directory { root: PathBuf },
}

/// Random rigid transforms applied to build registration pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub max_angle_deg: f64,
    pub max_translation: f64,
}

impl Default for PairSpec {
    fn default() -> Self {
        Self {
            max_angle_deg: 45.0,
            max_translation: 0.3,
        }
    }
}

/// Everything that defines a run. Serialized as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: TaskKind,
    pub n: usize,
    pub m: usize,
    /// Train one `n×m_max` matrix and truncate columns per iteration.
    pub flexible: bool,
    /// Sizes drawn per iteration in flexible mode; `m_max` is the largest.
    pub m_set: Vec<usize>,
    pub alpha: f64,
    pub tau_min: f64,
    /// Fraction of iterations over which the temperature decays.
    pub anneal_fraction: f64,
    pub lr_start: f64,
    pub lr_end: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Also update the task head while training the sampler.
    pub joint_training: bool,
    /// With joint training, start from a freshly initialized head instead of a checkpoint.
    #[serde(default)]
    pub head_from_scratch: bool,
    pub sparsify_threshold: f64,
    pub noise_level: f64,
    pub lambda_emd: f64,
    pub translation_weight: f64,
    pub encoder_widths: Vec<usize>,
    pub rho_hidden: Vec<usize>,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    /// Sizes evaluated after training.
    pub eval_m: Vec<usize>,
    pub head_checkpoint: Option<PathBuf>,
    pub dataset: DatasetSpec,
    pub pairs: PairSpec,
    pub head: HeadSpec,
}

impl RunConfig {
    /// Full-size defaults for a task.
    pub fn for_task(task: TaskKind) -> Self {
        let (tau_min, alpha, lr_start) = match task {
            TaskKind::Classification => (0.1, 30.0, 5e-4),
            TaskKind::ReconstructionMlp | TaskKind::ReconstructionMfold => (0.5, 0.2, 5e-4),
            TaskKind::Registration => (0.1, 1.0, 1e-4),
        };
        let mut head = HeadSpec::default_for(task);
        if task == TaskKind::ReconstructionMlp {
            head.output_points = 1024;
        }
        Self {
            task,
            n: 1024,
            m: 32,
            flexible: false,
            m_set: vec![8, 16, 32, 64],
            alpha,
            tau_min,
            anneal_fraction: 0.8,
            lr_start,
            lr_end: 1e-5,
            epochs: 250,
            batch_size: 32,
            seed: 0,
            joint_training: false,
            head_from_scratch: false,
            sparsify_threshold: DEFAULT_THRESHOLD,
            noise_level: 0.0,
            lambda_emd: DEFAULT_LAMBDA_EMD,
            translation_weight: 1.0,
            encoder_widths: DEFAULT_ENCODER_WIDTHS.to_vec(),
            rho_hidden: DEFAULT_RHO_HIDDEN.to_vec(),
            pretrain_epochs: 250,
            pretrain_lr: 1e-3,
            eval_m: vec![8, 16, 32, 64],
            head_checkpoint: None,
            dataset: DatasetSpec::Shapes {
                shapes: Shape::ALL.to_vec(),
                train: 64,
                test: 32,
                rotate: true,
            },
            pairs: PairSpec::default(),
            head,
        }
    }

    /// Desk-scale settings: `n = 256`, narrow networks, short schedules.
    pub fn toy(task: TaskKind) -> Self {
        let mut c = Self::for_task(task);
        c.n = 256;
        c.batch_size = 8;
        c.encoder_widths = vec![32, 64, 64];
        c.rho_hidden = vec![128, 64, 32];
        c.lr_start = 2e-3;
        c.lr_end = 1e-4;
        c.pretrain_lr = 2e-3;
        match task {
            TaskKind::Classification => {
                c.m = 16;
                c.epochs = 60;
                c.pretrain_epochs = 40;
                c.eval_m = vec![16];
                c.head = HeadSpec::classification(4);
                c.head.encoder_widths = vec![64, 64, 128];
                c.head.mlp_widths = vec![64];
            }
            TaskKind::ReconstructionMlp => {
                c.m = 32;
                c.epochs = 40;
                c.pretrain_epochs = 60;
                c.eval_m = vec![32];
                c.dataset = DatasetSpec::Boxes { train: 64, test: 32 };
                c.head = HeadSpec::reconstruction_mlp(256);
                c.head.encoder_widths = vec![64, 128, 128];
                c.head.mlp_widths = vec![256, 256];
            }
            TaskKind::ReconstructionMfold => {
                c.m = 32;
                c.epochs = 40;
                c.pretrain_epochs = 60;
                c.eval_m = vec![32];
                c.dataset = DatasetSpec::Boxes { train: 64, test: 32 };
                let cfg = MFoldConfig {
                    patches: 4,
                    code_dim: 64,
                    grid: (8, 8),
                };
                c.head = HeadSpec::reconstruction_mfold(cfg);
                c.head.encoder_widths = vec![64, 128, 64];
            }
            TaskKind::Registration => {
                c.m = 32;
                c.epochs = 30;
                c.pretrain_epochs = 60;
                c.lr_start = 1e-3;
                c.eval_m = vec![32];
                c.dataset = DatasetSpec::Boxes { train: 64, test: 32 };
                c.head = HeadSpec::registration();
                c.head.encoder_widths = vec![64, 128, 256];
                c.head.mlp_widths = vec![256, 128];
            }
        }
        c
    }

    /// Width of the sampling matrix the sampler is built with.
    pub fn m_max(&self) -> usize {
        if self.flexible {
            self.m_set.iter().copied().max().unwrap_or(self.m)
        } else {
            self.m
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            alpha: self.alpha,
            lambda_emd: self.lambda_emd,
            translation_weight: self.translation_weight,
        }
    }

    /// Learning rate at the start of `epoch`.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        exponential_decay(self.lr_start, self.lr_end, epoch, self.epochs)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.task != self.head.kind {
            return fail(format!("task {} but head {}", self.task, self.head.kind));
        }
        if self.n == 0 || self.m == 0 || self.m > self.n {
            return fail(format!("need 1 <= m <= n, got m = {} and n = {}", self.m, self.n));
        }
        if self.flexible {
            if self.m_set.is_empty() || self.m_set.iter().any(|&m| m == 0 || m > self.n) {
                return fail(format!("flexible sizes must lie in 1..={}, got {:?}", self.n, self.m_set));
            }
            if self.m > self.m_max() {
                return fail(format!("m = {} exceeds m_max = {}", self.m, self.m_max()));
            }
        }
        if let Some(&bad) = self.eval_m.iter().find(|&&m| m == 0 || m > self.n) {
            return fail(format!("evaluation size {bad} outside 1..={}", self.n));
        }
        for (name, v) in [
            ("lr_start", self.lr_start),
            ("lr_end", self.lr_end),
            ("tau_min", self.tau_min),
            ("pretrain_lr", self.pretrain_lr),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.anneal_fraction > 0.0 && self.anneal_fraction <= 1.0) {
            return fail(format!("anneal_fraction must lie in (0, 1], got {}", self.anneal_fraction));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return fail("epochs and batch_size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.sparsify_threshold) {
            return fail(format!("sparsify_threshold must lie in [0, 1), got {}", self.sparsify_threshold));
        }
        if self.noise_level.is_nan() || self.noise_level < 0.0 {
            return fail(format!("noise_level must be nonnegative, got {}", self.noise_level));
        }
        if self.encoder_widths.is_empty() || self.encoder_widths.contains(&0) || self.rho_hidden.contains(&0) {
            return fail("sampler widths must be positive".into());
        }
        self.loss_weights().validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.head.kind == TaskKind::ReconstructionMlp && self.head.output_points != self.n {
            return fail(format!(
                "decoder produces {} points but clouds have {}",
                self.head.output_points, self.n
            ));
        }
        if self.head.kind == TaskKind::ReconstructionMfold && self.lambda_emd > 0.0 && self.head.output_points != self.n {
            return fail(format!(
                "earth mover's loss needs {} decoded points, the folding layout gives {}",
                self.n, self.head.output_points
            ));
        }
        self.head.validate()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }
}

/// `start · (end / start)^(step / total)`.
pub fn exponential_decay(start: f64, end: f64, step: usize, total: usize) -> f64 {
    if total == 0 {
        return end;
    }
    start * (end / start).powf(step as f64 / total as f64)
}

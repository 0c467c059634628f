//! Training objectives: the task loss of each head, the subset loss that
//! pulls generated points onto the input, and their weighted sum.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Bound, Graph, Var};
use crate::cloud::{PointCloud, RigidTransform};
use crate::error::{ensure_arg, Error, Result};
use crate::heads::{TaskHead, TaskKind};

/// Default weight of the earth mover's term in the reconstruction loss.
pub const DEFAULT_LAMBDA_EMD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Weight of the subset loss.
    pub alpha: f64,
    /// Weight of the earth mover's term next to Chamfer for reconstruction.
    pub lambda_emd: f64,
    /// Weight of the squared translation error for registration.
    pub translation_weight: f64,
}

impl LossWeights {
    pub fn new(alpha: f64) -> Result<Self> {
        let w = Self {
            alpha,
            lambda_emd: DEFAULT_LAMBDA_EMD,
            translation_weight: 1.0,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("lambda_emd", self.lambda_emd),
            ("translation_weight", self.translation_weight),
        ] {
            ensure_arg!(v.is_finite() && v >= 0.0, "{name} must be finite and nonnegative, got {v}");
        }
        Ok(())
    }
}

/// Ground truth for one sample.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskTarget {
    Label(usize),
    /// The cloud a reconstruction should reproduce.
    Cloud(Array2<f64>),
    /// The template the sampled source is registered to and the true transform.
    Registration {
        template: Array2<f64>,
        transform: RigidTransform,
    },
}

impl TaskTarget {
    fn matches(&self, kind: TaskKind) -> bool {
        matches!(
            (self, kind),
            (TaskTarget::Label(_), TaskKind::Classification)
                | (TaskTarget::Cloud(_), TaskKind::ReconstructionMlp | TaskKind::ReconstructionMfold)
                | (TaskTarget::Registration { .. }, TaskKind::Registration)
        )
    }
}

/// Ground-truth `[w, x, y, z]` flipped onto the hemisphere of `pred`.
pub fn align_quaternion(pred: [f64; 4], gt: [f64; 4]) -> [f64; 4] {
    let dot: f64 = pred.iter().zip(&gt).map(|(a, b)| a * b).sum();
    if dot < 0.0 {
        gt.map(|v| -v)
    } else {
        gt
    }
}

/// Task loss on the tape. For registration, `template` overrides the
/// template stored in the target (e.g. a sampled template).
pub fn task_loss_node(
    g: &mut Graph,
    head: &TaskHead,
    p: &Bound,
    sampled: Var,
    template: Option<Var>,
    target: &TaskTarget,
    weights: &LossWeights,
) -> Result<Var> {
    if !target.matches(head.kind()) {
        return Err(Error::arg(format!("target does not fit a {} head", head.kind())));
    }
    ensure_arg!(g.shape(sampled).0 > 0, "sampled set is empty");
    Ok(match target {
        TaskTarget::Label(label) => {
            let logits = head.forward(g, p, sampled, None);
            ensure_arg!(*label < g.shape(logits).1, "label {label} out of range");
            g.cross_entropy(logits, *label)
        }
        TaskTarget::Cloud(cloud) => {
            let recon = head.forward(g, p, sampled, None);
            let t = g.constant(cloud.clone());
            let cd = g.chamfer(t, recon);
            if weights.lambda_emd > 0.0 {
                ensure_arg!(
                    cloud.nrows() == g.shape(recon).0,
                    "target has {} points but the decoder produces {}",
                    cloud.nrows(),
                    g.shape(recon).0
                );
                let emd = g.earth_mover(t, recon);
                let emd = g.scale(emd, weights.lambda_emd);
                g.add(cd, emd)
            } else {
                cd
            }
        }
        TaskTarget::Registration { template: stored, transform } => {
            let template = template.unwrap_or_else(|| g.constant(stored.clone()));
            let out = head.forward(g, p, sampled, Some(template));
            let v = g.value(out);
            let pred = [v[[0, 0]], v[[0, 1]], v[[0, 2]], v[[0, 3]]];
            let q = align_quaternion(pred, transform.quaternion());
            let t = transform.translation();
            let gt = g.constant(Array2::from_shape_vec((1, 7), vec![q[0], q[1], q[2], q[3], t[0], t[1], t[2]]).unwrap());
            let diff = g.sub(out, gt);
            let dq = g.slice_cols(diff, 0..4);
            let dq = g.sum_squares(dq);
            if weights.translation_weight > 0.0 {
                let dt = g.slice_cols(diff, 4..7);
                let dt = g.sum_squares(dt);
                let dt = g.scale(dt, weights.translation_weight);
                g.add(dq, dt)
            } else {
                dq
            }
        }
    })
}

/// Subset loss on the tape.
pub fn subset_loss_node(g: &mut Graph, source: Var, generated: Var) -> Var {
    g.nearest_sq(generated, source)
}

/// `task + alpha · subset` on the tape.
#[allow(clippy::too_many_arguments)]
pub fn total_loss_node(
    g: &mut Graph,
    head: &TaskHead,
    p: &Bound,
    sampled: Var,
    template: Option<Var>,
    target: &TaskTarget,
    source: Var,
    weights: &LossWeights,
) -> Result<Var> {
    let task = task_loss_node(g, head, p, sampled, template, target, weights)?;
    if weights.alpha == 0.0 {
        return Ok(task);
    }
    let subset = subset_loss_node(g, source, sampled);
    let subset = g.scale(subset, weights.alpha);
    Ok(g.add(task, subset))
}

/// Task loss of a sampled set.
pub fn task_loss(head: &TaskHead, sampled: ArrayView2<'_, f64>, target: &TaskTarget, weights: &LossWeights) -> Result<f64> {
    ensure_arg!(sampled.ncols() == 3, "sampled set must have 3 columns");
    let mut g = Graph::new();
    let p = head.store().bind(&mut g, false);
    let x = g.constant(sampled.to_owned());
    let loss = task_loss_node(&mut g, head, &p, x, None, target, weights)?;
    Ok(g.scalar(loss))
}

/// Mean squared distance from each generated point to its nearest source point.
pub fn subset_loss(source: &PointCloud, generated: ArrayView2<'_, f64>) -> Result<f64> {
    ensure_arg!(generated.nrows() > 0 && generated.ncols() == 3, "generated set must be a nonempty m×3 array");
    Ok(crate::metrics::mean_nearest_sq(generated, source.view()))
}

/// `task_loss + alpha · subset_loss`.
pub fn total_loss(
    head: &TaskHead,
    sampled: ArrayView2<'_, f64>,
    target: &TaskTarget,
    source: &PointCloud,
    weights: &LossWeights,
) -> Result<f64> {
    weights.validate()?;
    let task = task_loss(head, sampled, target, weights)?;
    if weights.alpha == 0.0 {
        return Ok(task);
    }
    Ok(task + weights.alpha * subset_loss(source, sampled)?)
}

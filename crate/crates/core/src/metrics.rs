//! Distances between point sets and the task metrics built on them.
//!
//! Chamfer distance is the symmetric sum of mean squared nearest-neighbor
//! distances. Earth mover's distance is the mean Euclidean cost of an optimal
//! one-to-one assignment: solved exactly for up to [`EXACT_EMD_LIMIT`] points
//! and by log-domain entropic transport above that.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::cloud::{quaternion_angle_deg, PointCloud, RigidTransform};
use crate::error::{ensure_arg, Error, Result};

pub const EXACT_EMD_LIMIT: usize = 256;

#[inline]
pub(crate) fn sq_dist(a: ArrayView2<'_, f64>, i: usize, b: ArrayView2<'_, f64>, j: usize) -> f64 {
    let dx = a[[i, 0]] - b[[j, 0]];
    let dy = a[[i, 1]] - b[[j, 1]];
    let dz = a[[i, 2]] - b[[j, 2]];
    dx * dx + dy * dy + dz * dz
}

/// For every row of `from`, the index of its nearest row in `to` (ties go to
/// the lowest index) and the squared distance to it.
pub fn nearest_neighbors(from: ArrayView2<'_, f64>, to: ArrayView2<'_, f64>) -> Vec<(usize, f64)> {
    (0..from.nrows())
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            for j in 0..to.nrows() {
                let d = sq_dist(from, i, to, j);
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .collect()
}

/// Mean over rows of `from` of the squared distance to the nearest row of `to`.
pub fn mean_nearest_sq(from: ArrayView2<'_, f64>, to: ArrayView2<'_, f64>) -> f64 {
    let total: f64 = nearest_neighbors(from, to).iter().map(|&(_, d)| d).sum();
    total / from.nrows() as f64
}

pub fn chamfer_points(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<f64> {
    ensure_arg!(a.nrows() > 0 && b.nrows() > 0, "chamfer distance of an empty set");
    Ok(mean_nearest_sq(a, b) + mean_nearest_sq(b, a))
}

pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    chamfer_points(a.view(), b.view())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmdSolver {
    /// Exact up to [`EXACT_EMD_LIMIT`] points, entropic above.
    Auto,
    Exact,
    /// `epsilon` is relative to the mean nearest-neighbor cost of the pair.
    Entropic { epsilon: f64 },
}

pub const DEFAULT_ENTROPIC_EPSILON: f64 = 0.01;

/// A coupling between two equal-size point sets, stored as `(row, col, mass)`
/// with total mass 1.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

pub fn transport_plan(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, solver: EmdSolver) -> Result<TransportPlan> {
    ensure_arg!(
        a.nrows() == b.nrows(),
        "earth mover's distance needs equal sizes, got {} and {}",
        a.nrows(),
        b.nrows()
    );
    ensure_arg!(a.nrows() > 0, "earth mover's distance of empty sets");
    let n = a.nrows();
    let cost: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| sq_dist(a, i, b, j).sqrt())
        .collect();
    let exact = match solver {
        EmdSolver::Exact => true,
        EmdSolver::Auto => n <= EXACT_EMD_LIMIT,
        EmdSolver::Entropic { .. } => false,
    };
    if exact {
        let assignment = min_cost_assignment(&cost, n);
        let w = 1.0 / n as f64;
        let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
        Ok(TransportPlan {
            entries: assignment.into_iter().enumerate().map(|(i, j)| (i, j, w)).collect(),
            cost: total / n as f64,
        })
    } else {
        let eps = match solver {
            EmdSolver::Entropic { epsilon } => epsilon,
            _ => DEFAULT_ENTROPIC_EPSILON,
        };
        ensure_arg!(eps > 0.0, "entropic epsilon must be positive");
        Ok(entropic_plan(&cost, n, a, b, eps))
    }
}

pub fn earth_mover_points(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<f64> {
    Ok(transport_plan(a, b, EmdSolver::Auto)?.cost)
}

pub fn earth_mover_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    earth_mover_points(a.view(), b.view())
}

/// Hungarian algorithm with potentials; `cost` is row-major `n×n`.
/// Returns the column assigned to each row.
pub fn min_cost_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // col_owner[j] is the 1-based row matched to 1-based column j; 0 means free.
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[col_owner[j] - 1] = j - 1;
    }
    assignment
}

/// Log-domain Sinkhorn with epsilon scaling on uniform marginals.
fn entropic_plan(cost: &[f64], n: usize, a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, rel_eps: f64) -> TransportPlan {
    let nn_scale = 0.5 * (mean_nearest_sq(a, b).sqrt() + mean_nearest_sq(b, a).sqrt());
    let max_cost = cost.iter().cloned().fold(0.0, f64::max);
    if max_cost == 0.0 {
        let w = 1.0 / n as f64;
        return TransportPlan {
            entries: (0..n).map(|i| (i, i, w)).collect(),
            cost: 0.0,
        };
    }
    let target_eps = (rel_eps * nn_scale).max(1e-6 * max_cost);
    let log_mass = -(n as f64).ln();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut eps = max_cost;
    loop {
        eps = (eps * 0.5).max(target_eps);
        let last_stage = eps <= target_eps;
        let max_iters = if last_stage { 2000 } else { 100 };
        for _ in 0..max_iters {
            for i in 0..n {
                f[i] = eps * log_mass - eps * log_sum_exp((0..n).map(|j| (g[j] - cost[i * n + j]) / eps));
            }
            let mut violation: f64 = 0.0;
            for j in 0..n {
                let col = (0..n).map(|i| (f[i] - cost[i * n + j]) / eps);
                let lse = log_sum_exp(col);
                let mass = (lse + g[j] / eps).exp();
                violation = violation.max((mass - 1.0 / n as f64).abs());
                g[j] = eps * log_mass - eps * lse;
            }
            if violation < 1e-9 {
                break;
            }
        }
        if last_stage {
            break;
        }
    }
    let mut entries = Vec::new();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mass = ((f[i] + g[j] - cost[i * n + j]) / eps).exp();
            if mass > 1e-12 {
                entries.push((i, j, mass));
                total += mass * cost[i * n + j];
            }
        }
    }
    TransportPlan { entries, cost: total }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReconMetric {
    #[serde(rename = "CD")]
    Chamfer,
    #[serde(rename = "EMD")]
    EarthMover,
}

impl ReconMetric {
    pub fn evaluate(&self, a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<f64> {
        match self {
            ReconMetric::Chamfer => chamfer_points(a, b),
            ReconMetric::EarthMover => earth_mover_points(a, b),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ReconMetric::Chamfer => "CD",
            ReconMetric::EarthMover => "EMD",
        }
    }
}

/// Normalized reconstruction error: the metric of the reconstruction from the
/// downsampled set over the metric of the reconstruction from the full cloud.
pub fn nre(
    original: ArrayView2<'_, f64>,
    recon_from_sampled: ArrayView2<'_, f64>,
    recon_from_full: ArrayView2<'_, f64>,
    metric: ReconMetric,
) -> Result<f64> {
    let denominator = metric.evaluate(original, recon_from_full)?;
    if denominator == 0.0 {
        return Err(Error::Degenerate(format!(
            "{} of the full-cloud reconstruction is zero",
            metric.name()
        )));
    }
    Ok(metric.evaluate(original, recon_from_sampled)? / denominator)
}

/// Mean geodesic rotation angle in degrees between paired transforms.
pub fn mean_rotation_error(pred: &[RigidTransform], gt: &[RigidTransform]) -> Result<f64> {
    ensure_arg!(!pred.is_empty(), "mean rotation error of an empty list");
    ensure_arg!(
        pred.len() == gt.len(),
        "prediction and ground truth lengths differ: {} vs {}",
        pred.len(),
        gt.len()
    );
    let total: f64 = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| quaternion_angle_deg(p.quaternion(), g.quaternion()))
        .sum();
    Ok(total / pred.len() as f64)
}

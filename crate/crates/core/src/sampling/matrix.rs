use ndarray::{s, Array2};

use crate::autodiff::column_softmax;
use crate::cloud::PointCloud;
use crate::error::{ensure_arg, Result};

/// A column-stochastic `n×m` relaxation of a sampling matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMatrix {
    dense: Array2<f64>,
    temperature: f64,
}

impl SamplingMatrix {
    pub fn dense(&self) -> &Array2<f64> {
        &self.dense
    }

    pub fn into_dense(self) -> Array2<f64> {
        self.dense
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// `(n, m)`.
    pub fn shape(&self) -> (usize, usize) {
        self.dense.dim()
    }

    /// Wraps an already column-stochastic matrix, e.g. a hand-built selection.
    pub fn from_dense(dense: Array2<f64>, temperature: f64) -> Result<Self> {
        ensure_arg!(temperature > 0.0, "temperature must be positive, got {temperature}");
        ensure_arg!(dense.nrows() > 0 && dense.ncols() > 0, "sampling matrix must be nonempty");
        for col in dense.columns() {
            ensure_arg!(col.iter().all(|&v| v >= 0.0), "sampling matrix entries must be nonnegative");
            let sum = col.sum();
            ensure_arg!((sum - 1.0).abs() <= 1e-6, "column sums to {sum}, expected 1");
        }
        Ok(Self { dense, temperature })
    }
}

/// Column-wise softmax of `raw / tau` over the rows.
pub fn anneal_softmax(raw: &Array2<f64>, tau: f64) -> Result<SamplingMatrix> {
    ensure_arg!(tau > 0.0 && tau.is_finite(), "temperature must be positive, got {tau}");
    ensure_arg!(raw.nrows() > 0 && raw.ncols() > 0, "raw rows must be nonempty");
    Ok(SamplingMatrix {
        dense: column_softmax(raw, tau),
        temperature: tau,
    })
}

/// `Q = SᵀP`.
pub fn regress_sampled(cloud: &PointCloud, s: &SamplingMatrix) -> Result<Array2<f64>> {
    ensure_arg!(
        s.dense.nrows() == cloud.len(),
        "sampling matrix has {} rows but the cloud has {} points",
        s.dense.nrows(),
        cloud.len()
    );
    Ok(s.dense.t().dot(cloud.points()))
}

/// The `m` leftmost columns.
pub fn truncate_columns(s: &SamplingMatrix, m: usize) -> Result<SamplingMatrix> {
    let m_max = s.dense.ncols();
    ensure_arg!(m >= 1 && m <= m_max, "cannot keep {m} of {m_max} columns");
    Ok(SamplingMatrix {
        dense: s.dense.slice(s![.., ..m]).to_owned(),
        temperature: s.temperature,
    })
}

/// `‖SᵀS − I‖_F`, which vanishes exactly for a selection of distinct rows.
pub fn orthogonality_residual(s: &SamplingMatrix) -> f64 {
    let mut gram = s.dense.t().dot(&s.dense);
    for i in 0..gram.nrows() {
        gram[[i, i]] -= 1.0;
    }
    gram.iter().map(|v| v * v).sum::<f64>().sqrt()
}

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use super::matrix::SamplingMatrix;
use crate::cloud::PointCloud;
use crate::error::{ensure_arg, Error, Result};

/// Default sparsification threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.01;

/// Coordinate-format sampling matrix. Triplets are stored column by column,
/// rows ascending within a column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSamplingMatrix {
    triplets: Vec<(usize, usize, f64)>,
    shape: (usize, usize),
    threshold: f64,
}

impl SparseSamplingMatrix {
    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn nnz(&self) -> usize {
        self.triplets.len()
    }

    /// Stored entries as a fraction of `n·m`.
    pub fn nonzero_fraction(&self) -> f64 {
        self.triplets.len() as f64 / (self.shape.0 * self.shape.1) as f64
    }

    /// Mean stored entries per column.
    pub fn per_column(&self) -> f64 {
        self.triplets.len() as f64 / self.shape.1 as f64
    }

    /// Dense copy with dropped entries as zeros.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros(self.shape);
        for &(i, j, v) in &self.triplets {
            out[[i, j]] = v;
        }
        out
    }
}

/// Keeps the entries of `s` above `r`. A column left empty keeps its largest
/// entry. `r = 0` keeps every entry.
pub fn sparsify(s: &SamplingMatrix, r: f64) -> Result<SparseSamplingMatrix> {
    ensure_arg!((0.0..1.0).contains(&r), "threshold must lie in [0, 1), got {r}");
    let dense = s.dense();
    let (n, m) = dense.dim();
    let mut columns: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); m];
    let mut best = vec![0usize; m];
    for (i, row) in dense.rows().into_iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v > dense[[best[j], j]] {
                best[j] = i;
            }
            if r == 0.0 || v > r {
                columns[j].push((i, j, v));
            }
        }
    }
    let mut triplets = Vec::new();
    for (j, column) in columns.into_iter().enumerate() {
        if column.is_empty() {
            triplets.push((best[j], j, dense[[best[j], j]]));
        } else {
            triplets.extend(column);
        }
    }
    Ok(SparseSamplingMatrix {
        triplets,
        shape: (n, m),
        threshold: r,
    })
}

/// `Q = SᵀP` over the stored triplets only.
pub fn sparse_apply(cloud: &PointCloud, s: &SparseSamplingMatrix) -> Result<Array2<f64>> {
    ensure_arg!(
        s.shape.0 == cloud.len(),
        "sparse matrix has {} rows but the cloud has {} points",
        s.shape.0,
        cloud.len()
    );
    let p = cloud.points();
    let mut q = Array2::zeros((s.shape.1, 3));
    for &(i, j, v) in &s.triplets {
        for k in 0..3 {
            q[[j, k]] += v * p[[i, k]];
        }
    }
    Ok(q)
}

/// Text export: a header `n m nnz` then one `row col value` line per entry.
pub fn format_triplets(s: &SparseSamplingMatrix) -> String {
    let mut out = format!("{} {} {}\n", s.shape.0, s.shape.1, s.triplets.len());
    for &(i, j, v) in &s.triplets {
        writeln!(out, "{i} {j} {v:e}").unwrap();
    }
    out
}

pub fn write_triplets(path: impl AsRef<Path>, s: &SparseSamplingMatrix) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_triplets(s)).map_err(|e| Error::io(path, e))
}

/// Parses the text export. The threshold is not stored and is reported as 0.
pub fn parse_triplets(text: &str, origin: &Path) -> Result<SparseSamplingMatrix> {
    let parse_err = |line: usize, message: String| Error::Parse {
        file: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))?;
    let head: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(1, format!("bad header: {e}")))?;
    if head.len() != 3 {
        return Err(parse_err(1, format!("header needs 3 fields, got {}", head.len())));
    }
    let (n, m, nnz) = (head[0], head[1], head[2]);
    let mut triplets = Vec::with_capacity(nnz);
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(idx + 1, format!("expected 3 fields, got {}", fields.len())));
        }
        let i: usize = fields[0].parse().map_err(|e| parse_err(idx + 1, format!("bad row: {e}")))?;
        let j: usize = fields[1].parse().map_err(|e| parse_err(idx + 1, format!("bad column: {e}")))?;
        let v: f64 = fields[2].parse().map_err(|e| parse_err(idx + 1, format!("bad value: {e}")))?;
        if i >= n || j >= m {
            return Err(parse_err(idx + 1, format!("entry ({i}, {j}) outside {n}x{m}")));
        }
        triplets.push((i, j, v));
    }
    if triplets.len() != nnz {
        return Err(parse_err(0, format!("header declares {nnz} entries, found {}", triplets.len())));
    }
    Ok(SparseSamplingMatrix {
        triplets,
        shape: (n, m),
        threshold: 0.0,
    })
}

pub fn read_triplets(path: impl AsRef<Path>) -> Result<SparseSamplingMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_triplets(&text, path)
}

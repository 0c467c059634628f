use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layout of a multi-patch folding decoder: a `code_dim` global code split
/// into `patches` local codes, each folded from the same `grid` lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MFoldConfig {
    pub patches: usize,
    pub code_dim: usize,
    pub grid: (usize, usize),
}

impl MFoldConfig {
    pub fn new(patches: usize, code_dim: usize, grid: (usize, usize)) -> Result<Self> {
        let cfg = Self {
            patches,
            code_dim,
            grid,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.patches == 0 || self.code_dim == 0 || self.grid.0 == 0 || self.grid.1 == 0 {
            return Err(Error::config(format!("folding layout must be positive, got {self:?}")));
        }
        if !self.code_dim.is_multiple_of(self.patches) {
            return Err(Error::config(format!(
                "{} patches do not divide a {}-dimensional code",
                self.patches, self.code_dim
            )));
        }
        Ok(())
    }

    /// Width of each local code.
    pub fn d_prime(&self) -> usize {
        self.code_dim / self.patches
    }

    pub fn grid_points(&self) -> usize {
        self.grid.0 * self.grid.1
    }

    pub fn output_points(&self) -> usize {
        self.patches * self.grid_points()
    }

    /// The `g₁×g₂` lattice on `[0, 1]²`, row-major.
    pub fn grid_lattice(&self) -> Array2<f64> {
        let coord = |i: usize, g: usize| if g == 1 { 0.5 } else { i as f64 / (g - 1) as f64 };
        let (g1, g2) = self.grid;
        Array2::from_shape_fn((g1 * g2, 2), |(r, k)| {
            if k == 0 {
                coord(r / g2, g1)
            } else {
                coord(r % g2, g2)
            }
        })
    }
}

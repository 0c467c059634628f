//! Task-oriented point cloud downsampling.
//!
//! A per-point encoder feeds a row-wise map that predicts a relaxed `n×m`
//! sampling matrix; a temperature-annealed column softmax keeps it
//! column-stochastic and pushes it toward one-hot columns, and `SᵀP` yields
//! the downsampled set. The whole pipeline trains end to end against a
//! downstream task network (classification, reconstruction, registration)
//! together with a loss that pulls generated points onto the input.
//!
//! Classical baselines (random, voxel, farthest point), the metrics used to
//! compare them, and a training/evaluation harness live alongside.

pub mod autodiff;
pub mod cloud;
pub mod error;
pub mod features;
pub mod harness;
pub mod heads;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod noise;
pub mod samplers;
pub mod sampling;
pub mod synthetic;

pub use cloud::{DownsampleResult, PointCloud, RigidTransform, SetKind};
pub use error::{Error, Result};

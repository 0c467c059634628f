//! Learned sampling matrices: row-wise logits, temperature-annealed column
//! softmax, regression of the sampled set, sparsification for inference and
//! the full generate/match/complete pipeline.

mod matrix;
mod net;
mod schedule;
mod sparse;

pub use matrix::{anneal_softmax, orthogonality_residual, regress_sampled, truncate_columns, SamplingMatrix};
pub use net::{downsample, predict_raw_rows, LearnedSampler, SamplerParams, DEFAULT_RHO_HIDDEN};
pub use schedule::Annealing;
pub use sparse::{
    format_triplets, parse_triplets, read_triplets, sparse_apply, sparsify, write_triplets, SparseSamplingMatrix,
    DEFAULT_THRESHOLD,
};

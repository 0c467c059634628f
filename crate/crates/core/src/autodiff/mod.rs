//! Reverse-mode differentiation, parameter storage and optimization for the
//! trainable parts of the pipeline.

mod graph;
mod nn;
mod optim;
mod params;

pub use graph::{column_softmax, Gradients, Graph, Var};
pub use nn::Mlp;
pub use optim::Adam;
pub use params::{Bound, ParamGrads, ParamId, ParamStore};

#[cfg(test)]
mod tests;

//! Minimal reverse-mode differentiation over dense tensors.
//!
//! A [`Graph`] records every operation as it is evaluated; calling
//! [`Graph::backward`] on a scalar node walks the record in reverse. The
//! thresholded [`Graph::spike`] op uses a fast-sigmoid surrogate derivative.

mod check;
mod graph;
mod kernels;
mod tensor;

pub use check::{grad_check, grad_check_entries};
pub use graph::{Gradients, Graph, NodeId, SpikeMode, SurrogateSpec};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;

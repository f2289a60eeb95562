//! Reverse-mode differentiation, SGD, learning-rate schedules and the
//! binary checkpoint format.

pub mod checkpoint;
pub mod gradcheck;
mod graph;
pub(crate) mod kernels;
mod optim;
mod tensor;

pub use graph::{Gradients, Graph, Param, Var};
pub use optim::{multistep_lr, OptimizerSettings, Sgd};
pub use tensor::Tensor;

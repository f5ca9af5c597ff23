//! Numeric core: tensors, activations, the differentiation tape, Adam, and
//! supporting special functions. Everything is generic over [`real::Real`].

pub mod activation;
pub mod adam;
pub mod finite_diff;
pub mod graph;
pub mod linalg;
pub mod real;
pub mod rng;
pub mod special;
pub mod tensor;

pub use activation::{eval_activation, parse_combination, ActKind};
pub use adam::AdamState;
pub use finite_diff::finite_diff_grad;
pub use graph::{Graph, NodeId};
pub use real::Real;
pub use rng::Rng;
pub use tensor::Tensor;

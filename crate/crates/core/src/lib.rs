//! Coherent hierarchical probabilistic forecasting of aggregated demand
//! series.
//!
//! A partially input-convex network maps quantile levels to crossing-free
//! quantile values, stochastic scenarios are sampled from it, and a
//! differentiable quadratic-program layer with a trainable weight matrix
//! reconciles the scenarios so bottom-level series sum exactly to the
//! aggregate.
//!
//! The numeric core is generic over the scalar type (`f32`/`f64` through
//! [`numerics::Real`]); the pipeline and the concrete aliases below use
//! `f64`.

pub mod data;
pub mod error;
pub mod lstm;
pub mod metrics;
pub mod mlp;
pub mod numerics;
pub mod picnn;
pub mod pipeline;
pub mod reconcile;
pub mod score;

pub use error::{Error, Result};

/// f64 instantiations used throughout the pipeline.
pub type Tensor64 = numerics::Tensor<f64>;
pub type Graph64 = numerics::Graph<f64>;
pub type Adam64 = numerics::AdamState<f64>;

/// f32 instantiations, available for memory-constrained experimentation.
pub type Tensor32 = numerics::Tensor<f32>;
pub type Graph32 = numerics::Graph<f32>;
pub type Adam32 = numerics::AdamState<f32>;

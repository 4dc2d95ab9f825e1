//! Temporal causal discovery from multivariate time series.
//!
//! Learns full temporal causal graphs — lagged and contemporaneous directed
//! edges — by training parallel causal convolution heads under an augmented
//! Lagrangian acyclicity constraint, with synthetic benchmark generators and
//! graph evaluation metrics alongside.
//!
//! The numeric core ([`tensor`], [`expm`], [`adam`]) is generic over the
//! float scalar; the pipeline runs in `f64` via the aliases below.

pub mod adam;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod expm;
pub mod graph;
pub mod graphio;
pub mod metrics;
pub mod model;
pub mod preprocess;
pub mod tensor;
pub mod trainer;

/// Dense `f64` tensor.
pub type Tensor = tensor::Tensor<f64>;

/// Adam state over `f64` parameters.
pub type AdamState = adam::AdamState<f64>;

/// Weighted temporal causal graph over `f64`.
pub type TemporalGraph = graph::TemporalGraph<f64>;

/// Model parameters over `f64`.
pub type ModelState = model::ModelState<f64>;

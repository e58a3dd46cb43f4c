//! Storyline clustering for streams of timestamped short documents.
//!
//! Documents choose "follow" links to earlier-or-nearby documents with
//! probability decaying in time distance; connected components of the link
//! graph are the storylines. Inference is collapsed Gibbs sampling over
//! links, either offline over a full corpus or online over a fixed-lag
//! window, with optional annealing and hyperparameter adaptation.
//!
//! The numeric core is generic over the floating-point scalar through
//! [`scalar::Real`]; the crate root exports `f64` aliases for the common
//! case.

pub mod corpus;
pub mod evaluation;
pub mod hyper;
pub mod math;
pub mod model;
pub mod sampler;
pub mod scalar;
pub mod streaming;
pub mod synth;

/// Model hyperparameters at the default `f64` precision.
pub type Hyperparams = model::Hyperparams<f64>;
/// Offline sampler settings at the default `f64` precision.
pub type SamplerConfig = sampler::SamplerConfig<f64>;
/// Finished-run report at the default `f64` precision.
pub type ClusteringResult = sampler::ClusteringResult<f64>;
/// Streaming settings at the default `f64` precision.
pub type StreamConfig = streaming::StreamConfig<f64>;
/// Online inference state at the default `f64` precision.
pub type StreamState = streaming::StreamState<f64>;
/// Stream checkpoint at the default `f64` precision.
pub type Checkpoint = streaming::Checkpoint<f64>;
/// Hyperparameter adaptation settings at the default `f64` precision.
pub type HyperUpdateConfig = hyper::HyperUpdateConfig<f64>;
/// Timeline scores at the default `f64` precision.
pub type Metrics = evaluation::Metrics<f64>;

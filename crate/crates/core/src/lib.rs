//! Emotion recognition over facial landmarks, organized as a small pipeline
//! of isolated workers connected by a request-reply wire protocol.
//!
//! The crate is split along the pipeline's seams:
//!
//! * [`landmarks`] / [`features`] — 68-point landmark sets and the transforms
//!   that turn them into classifier inputs (absolute vectors, part-relative
//!   vectors, binary occupancy grids).
//! * [`nn`] — from-scratch dense and convolutional networks, inverted
//!   dropout, cross-entropy, the Adam optimizer, a deterministic training
//!   loop, and a checksummed binary model format.
//! * [`data`] — dataset ingestion, filtering, stratified splitting, and a
//!   synthetic landmark generator for desk-scale experiments.
//! * [`wire`] — length-prefixed framing and the "ready"/"done" handshake over
//!   TCP loopback.
//! * [`pipeline`] — the four runnable workers (input, model, controller,
//!   view) and the orchestrator that wires them together.
//! * [`eval`] — per-class certainty/accuracy metrics and latency statistics.
//!
//! The numeric core is generic over the scalar type via [`scalar::Scalar`];
//! the pipeline runs everything in `f32` (the wire format's precision) while
//! tests can instantiate the same code in `f64` for tight tolerances.

pub mod data;
pub mod eval;
pub mod features;
pub mod landmarks;
pub mod nn;
pub mod pipeline;
pub mod scalar;
pub mod wire;

pub use landmarks::{LandmarkSet, Point, FRAME_SIZE, LANDMARK_COUNT};
pub use scalar::Scalar;

/// Landmark set in the pipeline's native precision.
pub type Landmarks = LandmarkSet<f32>;
/// Feature vector in the pipeline's native precision.
pub type Features = features::FeatureVector<f32>;
/// Dense network in the pipeline's native precision.
pub type Mlp = nn::MlpModel<f32>;
/// Convolutional network in the pipeline's native precision.
pub type Cnn = nn::CnnModel<f32>;
/// Adam state in the pipeline's native precision.
pub type Adam = nn::AdamState<f32>;

//! Capacity-distortion analysis for action-dependent integrated sensing
//! and communication (ISAC) channels.
//!
//! The crate computes, at desk scale:
//! - optimal per-symbol state estimators and their expected distortion,
//! - single-letter capacity-distortion tradeoffs for discrete-memoryless
//!   action-dependent models, including mixed-model bounds and a
//!   nonstationary Lagrangian solver,
//! - empirical spectral inf/sup information rates for simulable processes,
//! - closed-form Gaussian examples (dirty-paper boundary point, fading
//!   capacity-distortion curves),
//! - Monte Carlo random-coding experiments with information-density
//!   threshold decoding.
//!
//! All internal rates are in nats; the CLI converts to bits on request.

pub mod coding;
pub mod estimator;
pub mod solver;
pub mod spectrum;
pub mod gaussian;
pub mod model;
pub mod prob;

pub use model::{Alphabets, IsacModel, Policy};

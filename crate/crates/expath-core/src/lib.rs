//! Explains link predictions of knowledge-graph embedding models.
//!
//! Given a trained embedding model and a prediction `<h, r, t>`, the library
//! mines closed-path (CP) and property-transition (PT) rules local to the
//! prediction, scores training facts by Noisy-OR aggregation of rule
//! confidences, and verifies the resulting explanations with an
//! adversarial-deletion retraining harness.
//!
//! Module map:
//! - [`kg`] — dictionary-encoded triple store with inverse-aware relations
//! - [`sparse`] — row-compressed boolean adjacency matrices
//! - [`kge`] — embedding models, deterministic training, ranking metrics
//! - [`paths`] — grounded-path enumeration and relation-path aggregation
//! - [`rules`] — prediction-local CP/PT rule mining and metric evaluation
//! - [`scorer`] — Noisy-OR fact scoring and explanation assembly
//! - [`attack`] — deletion/retrain evaluation harness and baselines
//! - [`synth`] — synthetic planted-rule dataset generator

pub mod attack;
pub mod error;
pub mod kg;
pub mod kge;
pub mod paths;
pub mod rules;
pub mod scorer;
pub mod sparse;
pub mod synth;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;

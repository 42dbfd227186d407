//! Cross-chain bridge attack detection from transaction execution graphs.
//!
//! A transaction trace becomes an xTEG (vertices for the sender, contract functions and
//! emitted events; edges for calls and emits). Each graph yields a 21-value global feature
//! (graph2vec embedding plus size, density and transfer direction) and a 16-value directed
//! triad census. A classifier labels the 37-value concatenation as normal, source-chain
//! attack or target-chain attack.
//!
//! Numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`); the aliases below fix
//! `f64`.

pub mod classify;
pub mod global;
pub mod ingest;
pub mod motif;
pub mod pipeline;
pub mod primitives;
pub mod scalar;
pub mod synth;
pub mod xteg;

pub use ingest::{Label, TxRecord};
pub use motif::LocalFeature;
pub use xteg::{build_xteg, Xteg};

pub type EmbeddingModel = global::EmbeddingModel<f64>;
pub type GlobalFeature = global::GlobalFeature<f64>;
pub type FeatureVector = classify::FeatureVector<f64>;
pub type LabeledSample = classify::LabeledSample<f64>;
pub type KnnModel = classify::KnnModel<f64>;
pub type DecisionTree = classify::DecisionTree<f64>;
pub type Classifier = classify::Classifier<f64>;
pub type Detector = pipeline::Detector<f64>;

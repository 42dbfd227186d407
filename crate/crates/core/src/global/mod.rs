//! Global graph features: WL-document embedding, graph statistics and the direction flag.

mod graph2vec;
mod stats;
mod wl;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

pub use graph2vec::{train_graph2vec, EmbeddingError, EmbeddingModel, Graph2VecParams, EMBEDDING_DIM, MODEL_FORMAT_VERSION};
pub use stats::{density, direction_flag, graph_stats, Direction, GraphStats, SignatureConfig, DEPOSIT_EVENTS, WITHDRAWAL_EVENTS};
pub use wl::{wl_document, WlDocument};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeatureError {
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("feature layout mismatch: expected {expected:?}")]
    LayoutMismatch { expected: String },
    #[error("non-finite feature value at position {0}")]
    NonFinite(usize),
}

/// Column names of the 21 global values, in storage order.
pub const GLOBAL_LAYOUT: [&str; 21] = [
    "emb0", "emb1", "emb2", "emb3", "emb4", "emb5", "emb6", "emb7", "emb8", "emb9", "emb10", "emb11", "emb12", "emb13",
    "emb14", "emb15", "n_vertices", "n_edges", "n_logs", "density", "direction",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GlobalFeature<S: Scalar> {
    pub embedding: [S; EMBEDDING_DIM],
    pub n_vertices: S,
    pub n_edges: S,
    pub n_logs: S,
    pub density: S,
    pub direction: S,
}

impl<S: Scalar> GlobalFeature<S> {
    pub const DIM: usize = 21;

    pub fn to_array(&self) -> [S; 21] {
        let mut out = [S::zero(); 21];
        out[..EMBEDDING_DIM].copy_from_slice(&self.embedding);
        out[16] = self.n_vertices;
        out[17] = self.n_edges;
        out[18] = self.n_logs;
        out[19] = self.density;
        out[20] = self.direction;
        out
    }

    /// Rebuilds a feature from stored values tagged with their column layout.
    pub fn from_values(values: &[S], layout: &[&str]) -> Result<Self, FeatureError> {
        if layout != GLOBAL_LAYOUT {
            return Err(FeatureError::LayoutMismatch { expected: GLOBAL_LAYOUT.join(",") });
        }
        if values.len() != Self::DIM {
            return Err(FeatureError::DimensionMismatch { expected: Self::DIM, got: values.len() });
        }
        Ok(Self {
            embedding: std::array::from_fn(|i| values[i]),
            n_vertices: values[16],
            n_edges: values[17],
            n_logs: values[18],
            density: values[19],
            direction: values[20],
        })
    }
}

/// Concatenates `[embedding(16), |V|, |E|, n_logs, density, direction]`.
pub fn assemble_global<S: Scalar>(
    embedding: &[S],
    stats: &GraphStats,
    direction: Direction,
) -> Result<GlobalFeature<S>, FeatureError> {
    if embedding.len() != EMBEDDING_DIM {
        return Err(FeatureError::DimensionMismatch { expected: EMBEDDING_DIM, got: embedding.len() });
    }
    Ok(GlobalFeature {
        embedding: std::array::from_fn(|i| embedding[i]),
        n_vertices: S::from_count(stats.n_vertices as u64),
        n_edges: S::from_count(stats.n_edges as u64),
        n_logs: S::from_count(stats.n_logs as u64),
        density: S::from_f64_lossy(stats.density),
        direction: S::from_f64_lossy(direction.value()),
    })
}

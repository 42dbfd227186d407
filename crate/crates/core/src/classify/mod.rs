//! Supervised detection over the 37-value feature vector, plus evaluation metrics.

mod dtree;
mod eval;
mod knn;
mod metrics;
mod split;
mod standardize;

use serde::{Deserialize, Serialize};

use crate::global::{FeatureError, GlobalFeature, EMBEDDING_DIM};
use crate::ingest::Label;
use crate::motif::LocalFeature;
use crate::primitives::TxHash;
use crate::scalar::Scalar;

pub use dtree::{dtree_predict, dtree_train, DecisionTree, TreeNode, TreeParams};
pub use eval::{repeat_runs, repeated_eval, MeanStd, MetricsSummary, SummaryRow};
pub use knn::{knn_predict, knn_train, KnnModel};
pub use metrics::{evaluate, ClassMetrics, Metrics};
pub use split::split_dataset;
pub use standardize::Standardizer;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("k = {k} exceeds the {n} training samples")]
    KTooLarge { k: usize, n: usize },
    #[error("k must be a positive odd integer, got {0}")]
    InvalidK(usize),
    #[error("class {0} has too few samples for a stratified split")]
    ClassTooSmall(Label),
    #[error("split ratio {0} leaves an empty side")]
    InvalidRatio(f64),
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("nothing to evaluate")]
    EmptyEvaluation,
    #[error("feature vector has {got} values, model expects {expected}")]
    WidthMismatch { expected: usize, got: usize },
}

pub const FEATURE_DIM: usize = 37;

/// `[global(21), local(16)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", try_from = "Vec<S>", into = "Vec<S>")]
pub struct FeatureVector<S: Scalar> {
    values: Vec<S>,
}

impl<S: Scalar> TryFrom<Vec<S>> for FeatureVector<S> {
    type Error = FeatureError;

    fn try_from(values: Vec<S>) -> Result<Self, Self::Error> {
        if values.len() != FEATURE_DIM {
            return Err(FeatureError::DimensionMismatch { expected: FEATURE_DIM, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(i));
        }
        Ok(Self { values })
    }
}

impl<S: Scalar> From<FeatureVector<S>> for Vec<S> {
    fn from(v: FeatureVector<S>) -> Self {
        v.values
    }
}

impl<S: Scalar> FeatureVector<S> {
    pub fn from_slice(values: &[S]) -> Result<Self, FeatureError> {
        Self::try_from(values.to_vec())
    }

    pub fn as_slice(&self) -> &[S] {
        &self.values
    }

    pub fn global_part(&self) -> &[S] {
        &self.values[..GlobalFeature::<S>::DIM]
    }

    pub fn local_part(&self) -> &[S] {
        &self.values[GlobalFeature::<S>::DIM..]
    }

    pub fn embedding_part(&self) -> &[S] {
        &self.values[..EMBEDDING_DIM]
    }
}

/// Global block first, then the motif counts.
pub fn concat_features<S: Scalar>(global: &GlobalFeature<S>, local: &LocalFeature) -> FeatureVector<S> {
    let mut values = Vec::with_capacity(FEATURE_DIM);
    values.extend_from_slice(&global.to_array());
    values.extend_from_slice(&local.to_scalars::<S>());
    FeatureVector::try_from(values).expect("21 + 16 finite values")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LabeledSample<S: Scalar> {
    pub tx_hash: TxHash,
    pub features: FeatureVector<S>,
    pub label: Label,
}

/// Predicted class with the per-class vote (KNN) or leaf (tree) distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub distribution: [f64; Label::COUNT],
}

/// Highest score wins; ties go to the class that comes first in `Label` order.
pub(crate) fn argmax_label(scores: &[f64; Label::COUNT]) -> Label {
    let mut best = 0;
    for i in 1..Label::COUNT {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    Label::from_index(best).expect("index in range")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierConfig {
    Knn { k: usize },
    DecisionTree(TreeParams),
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig::Knn { k: 5 }
    }
}

impl ClassifierConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierConfig::Knn { .. } => "knn",
            ClassifierConfig::DecisionTree(_) => "decision_tree",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "")]
pub enum Classifier<S: Scalar> {
    Knn(KnnModel<S>),
    DecisionTree(DecisionTree<S>),
}

impl<S: Scalar> Classifier<S> {
    pub fn train(config: &ClassifierConfig, train: &[LabeledSample<S>], seed: u64) -> Result<Self, ClassifyError> {
        Ok(match config {
            ClassifierConfig::Knn { k } => Classifier::Knn(knn_train(train, *k, seed)?),
            ClassifierConfig::DecisionTree(params) => Classifier::DecisionTree(dtree_train(train, params, seed)?),
        })
    }

    pub fn predict(&self, features: &FeatureVector<S>) -> Prediction {
        match self {
            Classifier::Knn(m) => knn_predict(m, features),
            Classifier::DecisionTree(t) => dtree_predict(t, features),
        }
    }
}

#[cfg(test)]
mod tests;

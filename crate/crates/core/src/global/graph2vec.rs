//! Document embeddings for WL documents: distributed bag of words with negative sampling.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::wl::{stable_hash, WlDocument};
use crate::scalar::{dot, Scalar};

pub const EMBEDDING_DIM: usize = 16;
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("embedding model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("embedding model stores {found} scalars, loader expects {expected}")]
    ScalarMismatch { found: String, expected: String },
    #[error("embedding model is malformed: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Graph2VecParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    pub negative: usize,
    pub wl_iterations: usize,
    /// Gradient passes when embedding an unseen document.
    pub infer_epochs: usize,
    pub seed: u64,
}

impl Default for Graph2VecParams {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.025,
            min_learning_rate: 0.0001,
            negative: 5,
            wl_iterations: 2,
            infer_epochs: 100,
            seed: 42,
        }
    }
}

impl Graph2VecParams {
    fn validate(&self) -> Result<(), EmbeddingError> {
        if self.epochs == 0 || self.infer_epochs == 0 {
            return Err(EmbeddingError::InvalidParams("epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(EmbeddingError::InvalidParams(format!("learning rate {}", self.learning_rate)));
        }
        if self.min_learning_rate < 0.0 || self.min_learning_rate > self.learning_rate {
            return Err(EmbeddingError::InvalidParams(format!("min learning rate {}", self.min_learning_rate)));
        }
        Ok(())
    }
}

/// Trained graph vectors plus the frozen token (output) vectors used for inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EmbeddingModel<S: Scalar> {
    pub format_version: u32,
    pub scalar: String,
    pub params: Graph2VecParams,
    /// Sorted token vocabulary; position is the row in `token_vectors`.
    pub vocab: Vec<String>,
    pub token_vectors: Vec<[S; EMBEDDING_DIM]>,
    /// Corpus frequency of each token; drives negative sampling.
    pub token_counts: Vec<u64>,
    /// One vector per distinct document content.
    pub doc_vectors: Vec<[S; EMBEDDING_DIM]>,
    pub doc_keys: Vec<String>,
    /// Corpus position -> row of `doc_vectors`.
    pub corpus: Vec<usize>,
    #[serde(skip)]
    index: Option<Index>,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Index {
    vocab: HashMap<String, usize>,
    docs: HashMap<String, usize>,
}

/// Cumulative unigram^0.75 table for negative draws.
struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|c| {
                acc += (*c as f64).powf(0.75);
                acc
            })
            .collect();
        Self { cumulative }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let x = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|c| *c <= x).min(self.cumulative.len() - 1)
    }
}

fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

fn random_vector<S: Scalar>(rng: &mut ChaCha8Rng) -> [S; EMBEDDING_DIM] {
    let scale = 1.0 / EMBEDDING_DIM as f64;
    std::array::from_fn(|_| S::from_f64_lossy((rng.gen::<f64>() - 0.5) * scale))
}

/// Document-vector initialization derived from content, so equal documents start equal.
fn content_init<S: Scalar>(seed: u64, key: &str) -> [S; EMBEDDING_DIM] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stable_hash(key));
    random_vector(&mut rng)
}

/// One skip-gram step: raise the score of `target` (or lower it for negatives) and return the
/// gradient for the document vector. Updates `token` unless it is frozen.
fn sgns_step<S: Scalar>(
    doc: &[S; EMBEDDING_DIM],
    token: &mut [S; EMBEDDING_DIM],
    label: S,
    lr: S,
    grad: &mut [S; EMBEDDING_DIM],
    update_token: bool,
) {
    let g = (label - sigmoid(dot(doc, token))) * lr;
    for d in 0..EMBEDDING_DIM {
        grad[d] += g * token[d];
    }
    if update_token {
        for d in 0..EMBEDDING_DIM {
            token[d] += g * doc[d];
        }
    }
}

fn learning_rate<S: Scalar>(params: &Graph2VecParams, step: usize, total: usize) -> S {
    let progress = step as f64 / total.max(1) as f64;
    let lr = params.learning_rate - (params.learning_rate - params.min_learning_rate) * progress;
    S::from_f64_lossy(lr.max(params.min_learning_rate))
}

/// Trains one vector per corpus document. Documents with identical content share one vector.
pub fn train_graph2vec<S: Scalar>(
    corpus: &[WlDocument],
    params: &Graph2VecParams,
) -> Result<EmbeddingModel<S>, EmbeddingError> {
    if corpus.is_empty() {
        return Err(EmbeddingError::EmptyCorpus);
    }
    params.validate()?;

    let mut vocab: Vec<String> = corpus.iter().flat_map(|d| d.tokens().iter().cloned()).collect();
    vocab.sort_unstable();
    vocab.dedup();
    let vocab_ix: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();

    let mut counts = vec![0u64; vocab.len()];
    let mut doc_keys = Vec::new();
    let mut doc_tokens: Vec<Vec<usize>> = Vec::new();
    let mut key_ix: HashMap<String, usize> = HashMap::new();
    let mut corpus_rows = Vec::with_capacity(corpus.len());
    for doc in corpus {
        let tokens: Vec<usize> = doc.tokens().iter().map(|t| vocab_ix[t.as_str()]).collect();
        for t in &tokens {
            counts[*t] += 1;
        }
        let key = doc.content_key();
        let row = *key_ix.entry(key.clone()).or_insert_with(|| {
            doc_keys.push(key);
            doc_tokens.push(tokens);
            doc_tokens.len() - 1
        });
        corpus_rows.push(row);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut token_vectors: Vec<[S; EMBEDDING_DIM]> = (0..vocab.len()).map(|_| random_vector(&mut rng)).collect();
    let mut doc_vectors: Vec<[S; EMBEDDING_DIM]> =
        doc_keys.iter().map(|k| content_init(params.seed, k)).collect();
    let noise = NoiseTable::new(&counts);

    let per_epoch: usize = doc_tokens.iter().map(Vec::len).sum();
    let total = per_epoch * params.epochs;
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..doc_tokens.len()).collect();
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &row in &order {
            for &pos in &doc_tokens[row] {
                let lr = learning_rate::<S>(params, step, total);
                step += 1;
                let mut grad = [S::zero(); EMBEDDING_DIM];
                let doc = doc_vectors[row];
                sgns_step(&doc, &mut token_vectors[pos], S::one(), lr, &mut grad, true);
                for _ in 0..params.negative {
                    let neg = noise.sample(&mut rng);
                    if neg == pos {
                        continue;
                    }
                    sgns_step(&doc, &mut token_vectors[neg], S::zero(), lr, &mut grad, true);
                }
                for d in 0..EMBEDDING_DIM {
                    doc_vectors[row][d] += grad[d];
                }
            }
        }
    }

    let mut model = EmbeddingModel {
        format_version: MODEL_FORMAT_VERSION,
        scalar: S::NAME.to_string(),
        params: params.clone(),
        vocab,
        token_vectors,
        token_counts: counts,
        doc_vectors,
        doc_keys,
        corpus: corpus_rows,
        index: None,
    };
    model.build_index();
    Ok(model)
}

impl<S: Scalar> EmbeddingModel<S> {
    fn build_index(&mut self) {
        self.index = Some(Index {
            vocab: self.vocab.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect(),
            docs: self.doc_keys.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect(),
        });
    }

    fn index(&self) -> &Index {
        self.index.as_ref().expect("index built on construction and load")
    }

    pub fn corpus_len(&self) -> usize {
        self.corpus.len()
    }

    /// Trained vector of corpus document `i`.
    pub fn graph_vector(&self, i: usize) -> &[S; EMBEDDING_DIM] {
        &self.doc_vectors[self.corpus[i]]
    }

    pub fn is_finite(&self) -> bool {
        self.doc_vectors.iter().chain(&self.token_vectors).all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Embeds a document against the frozen token vectors.
    ///
    /// A document whose content equals a training document returns that document's vector.
    /// Unseen tokens only receive negative updates.
    pub fn infer(&self, doc: &WlDocument) -> [S; EMBEDDING_DIM] {
        let key = doc.content_key();
        let index = self.index();
        if let Some(row) = index.docs.get(&key) {
            return self.doc_vectors[*row];
        }
        let params = &self.params;
        let tokens: Vec<Option<usize>> = doc.tokens().iter().map(|t| index.vocab.get(t).copied()).collect();
        let mut vector = content_init::<S>(params.seed, &key);
        if self.vocab.is_empty() || tokens.is_empty() {
            return vector;
        }
        let noise = NoiseTable::new(&self.token_counts);
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ stable_hash(&key).rotate_left(17));
        let total = tokens.len() * params.infer_epochs;
        let mut step = 0;
        for _ in 0..params.infer_epochs {
            for tok in &tokens {
                let lr = learning_rate::<S>(params, step, total);
                step += 1;
                let mut grad = [S::zero(); EMBEDDING_DIM];
                if let Some(pos) = tok {
                    let mut target = self.token_vectors[*pos];
                    sgns_step(&vector, &mut target, S::one(), lr, &mut grad, false);
                }
                for _ in 0..params.negative {
                    let neg = noise.sample(&mut rng);
                    if Some(neg) == *tok {
                        continue;
                    }
                    let mut target = self.token_vectors[neg];
                    sgns_step(&vector, &mut target, S::zero(), lr, &mut grad, false);
                }
                for d in 0..EMBEDDING_DIM {
                    vector[d] += grad[d];
                }
            }
        }
        vector
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    /// Loads a serialized model, failing on a format or scalar-type mismatch.
    pub fn from_json(text: &str) -> Result<Self, EmbeddingError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| EmbeddingError::Malformed(e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, EmbeddingError> {
        let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != MODEL_FORMAT_VERSION {
            return Err(EmbeddingError::VersionMismatch { found, expected: MODEL_FORMAT_VERSION });
        }
        let scalar = value.get("scalar").and_then(|v| v.as_str()).unwrap_or_default();
        if scalar != S::NAME {
            return Err(EmbeddingError::ScalarMismatch { found: scalar.to_string(), expected: S::NAME.to_string() });
        }
        let mut model: Self = serde_json::from_value(value).map_err(|e| EmbeddingError::Malformed(e.to_string()))?;
        if model.token_vectors.len() != model.vocab.len()
            || model.token_counts.len() != model.vocab.len()
            || model.doc_vectors.len() != model.doc_keys.len()
            || model.corpus.iter().any(|r| *r >= model.doc_vectors.len())
        {
            return Err(EmbeddingError::Malformed("inconsistent table sizes".into()));
        }
        model.build_index();
        Ok(model)
    }
}

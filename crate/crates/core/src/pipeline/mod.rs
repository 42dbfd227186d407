//! End-to-end detection: trace to xTEG to features to label, plus the training,
//! evaluation and timing drivers built on it.

mod bench;
mod config;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{
    concat_features, evaluate, repeat_runs, split_dataset, Classifier, ClassifyError, FeatureVector, LabeledSample,
    Metrics, MetricsSummary, Prediction,
};
use crate::global::{
    assemble_global, direction_flag, graph_stats, train_graph2vec, wl_document, Direction, EmbeddingError,
    EmbeddingModel, FeatureError, GraphStats, SignatureConfig, WlDocument,
};
use crate::ingest::{load_trace_file, DatasetManifest, IngestError, Label, RpcClient, TxRecord};
use crate::motif::{local_feature, LocalFeature, MotifError};
use crate::primitives::TxHash;
use crate::scalar::Scalar;
use crate::xteg::{build_xteg, Xteg, XtegError};

pub use bench::{bench, BenchReport, StageTiming, MIN_BENCH_CORPUS, REFERENCE_STAGE_MS};
pub use config::RunConfig;

pub const DETECTOR_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Xteg(#[from] XtegError),
    #[error(transparent)]
    Motif(#[from] MotifError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("config: {0}")]
    Config(String),
    #[error("corpus has {got} transactions, at least {min} required")]
    CorpusTooSmall { got: usize, min: usize },
    #[error("model file {0} not found")]
    ModelMissing(PathBuf),
    #[error("model file: {0}")]
    Model(String),
    #[error("{0} samples but {1} labels")]
    LabelCount(usize, usize),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Everything about one transaction that does not depend on a trained model.
#[derive(Debug, Clone)]
pub struct PreparedTx {
    pub tx_hash: TxHash,
    pub xteg: Xteg,
    pub document: WlDocument,
    pub stats: GraphStats,
    pub direction: Direction,
    pub local: LocalFeature,
}

pub fn prepare(record: &TxRecord, wl_iterations: usize, signatures: &SignatureConfig) -> Result<PreparedTx, PipelineError> {
    let xteg = build_xteg(record)?;
    let document = wl_document(&xteg, wl_iterations);
    let stats = graph_stats(&xteg);
    let direction = direction_flag(&record.logs, signatures);
    let local = local_feature(&xteg)?;
    Ok(PreparedTx { tx_hash: record.tx_hash, xteg, document, stats, direction, local })
}

/// Runs `f` on a rayon pool limited to `threads` workers.
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

pub fn prepare_all(
    records: &[TxRecord],
    config: &RunConfig,
) -> Vec<Result<PreparedTx, PipelineError>> {
    let iterations = config.embedding.wl_iterations;
    with_pool(config.max_concurrency, || {
        records.par_iter().map(|r| prepare(r, iterations, &config.signatures)).collect()
    })
}

pub fn features_of<S: Scalar>(embedding: &EmbeddingModel<S>, tx: &PreparedTx) -> Result<FeatureVector<S>, PipelineError> {
    let vector = embedding.infer(&tx.document);
    let global = assemble_global(&vector, &tx.stats, tx.direction)?;
    Ok(concat_features(&global, &tx.local))
}

/// Trained embedding plus classifier, stored as one JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Detector<S: Scalar> {
    pub format_version: u32,
    pub scalar: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub embedding: EmbeddingModel<S>,
    pub classifier: Classifier<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub tx_hash: TxHash,
    pub label: Label,
    /// Neighbour vote shares or leaf class shares, in `Label` order.
    pub distribution: [f64; Label::COUNT],
}

impl<S: Scalar> Detector<S> {
    /// Fits the embedding and the classifier on `train` only.
    pub fn fit(train: &[&PreparedTx], labels: &[Label], config: &RunConfig, seed: u64) -> Result<Self, PipelineError> {
        if train.len() != labels.len() {
            return Err(PipelineError::LabelCount(train.len(), labels.len()));
        }
        let docs: Vec<WlDocument> = train.iter().map(|t| t.document.clone()).collect();
        let params = crate::global::Graph2VecParams { seed, ..config.embedding.clone() };
        let embedding = train_graph2vec::<S>(&docs, &params)?;
        let samples = train
            .par_iter()
            .zip(labels.par_iter())
            .map(|(t, l)| Ok(LabeledSample { tx_hash: t.tx_hash, features: features_of(&embedding, t)?, label: *l }))
            .collect::<Result<Vec<_>, PipelineError>>()?;
        let classifier = Classifier::train(&config.classifier, &samples, seed)?;
        Ok(Self {
            format_version: DETECTOR_FORMAT_VERSION,
            scalar: S::NAME.to_string(),
            config_hash: config.config_hash(),
            config: config.clone(),
            embedding,
            classifier,
        })
    }

    pub fn predict(&self, tx: &PreparedTx) -> Result<Prediction, PipelineError> {
        Ok(self.classifier.predict(&features_of(&self.embedding, tx)?))
    }

    pub fn detect(&self, record: &TxRecord) -> Result<Detection, PipelineError> {
        let tx = prepare(record, self.embedding.params.wl_iterations, &self.config.signatures)?;
        let p = self.predict(&tx)?;
        Ok(Detection { tx_hash: tx.tx_hash, label: p.label, distribution: p.distribution })
    }

    /// Parallel [`Detector::detect`], one result per record in input order.
    pub fn detect_many(&self, records: &[TxRecord]) -> Vec<Result<Detection, PipelineError>> {
        with_pool(self.config.max_concurrency, || records.par_iter().map(|r| self.detect(r)).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("detector serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| PipelineError::Model(e.to_string()))?;
        let version = value.get("format_version").and_then(|v| v.as_u64());
        if version != Some(DETECTOR_FORMAT_VERSION as u64) {
            return Err(PipelineError::Model(format!(
                "format version {version:?}, expected {DETECTOR_FORMAT_VERSION}"
            )));
        }
        let scalar = value.get("scalar").and_then(|v| v.as_str()).unwrap_or_default();
        if scalar != S::NAME {
            return Err(PipelineError::Model(format!("stores {scalar} scalars, loader expects {}", S::NAME)));
        }
        let embedding = EmbeddingModel::from_value(value.get("embedding").cloned().unwrap_or_default())?;
        let mut detector: Self = serde_json::from_value(value).map_err(|e| PipelineError::Model(e.to_string()))?;
        detector.embedding = embedding;
        Ok(detector)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        if !path.exists() {
            return Err(PipelineError::ModelMissing(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// One seeded split, fit on the training side, scored on the test side.
pub fn evaluate_once<S: Scalar>(
    prepared: &[PreparedTx],
    labels: &[Label],
    config: &RunConfig,
    seed: u64,
) -> Result<Metrics, PipelineError> {
    let (train_idx, test_idx) = split_dataset(labels, config.split_ratio, true, seed)?;
    let train: Vec<&PreparedTx> = train_idx.iter().map(|&i| &prepared[i]).collect();
    let train_labels: Vec<Label> = train_idx.iter().map(|&i| labels[i]).collect();
    let detector = Detector::<S>::fit(&train, &train_labels, config, seed)?;
    let predicted = test_idx
        .par_iter()
        .map(|&i| detector.predict(&prepared[i]).map(|p| p.label))
        .collect::<Result<Vec<_>, _>>()?;
    let truth: Vec<Label> = test_idx.iter().map(|&i| labels[i]).collect();
    Ok(evaluate(&predicted, &truth)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config_hash: String,
    pub classifier: String,
    pub n_samples: usize,
    pub summary: MetricsSummary,
}

/// `config.runs` evaluations with seeds `config.seed + i`.
pub fn evaluate_repeated<S: Scalar>(
    prepared: &[PreparedTx],
    labels: &[Label],
    config: &RunConfig,
) -> Result<EvaluationReport, PipelineError> {
    config.validate()?;
    if prepared.len() != labels.len() {
        return Err(PipelineError::LabelCount(prepared.len(), labels.len()));
    }
    let summary = with_pool(config.max_concurrency, || {
        repeat_runs(config.runs, config.seed, |seed| evaluate_once::<S>(prepared, labels, config, seed))
    })?;
    Ok(EvaluationReport {
        config_hash: config.config_hash(),
        classifier: config.classifier.name().to_string(),
        n_samples: prepared.len(),
        summary,
    })
}

/// Fits a detector on the training side of the `config.seed` split and scores it on the rest.
pub fn train_and_score<S: Scalar>(
    prepared: &[PreparedTx],
    labels: &[Label],
    config: &RunConfig,
) -> Result<(Detector<S>, Metrics), PipelineError> {
    config.validate()?;
    let (train_idx, test_idx) = split_dataset(labels, config.split_ratio, true, config.seed)?;
    let train: Vec<&PreparedTx> = train_idx.iter().map(|&i| &prepared[i]).collect();
    let train_labels: Vec<Label> = train_idx.iter().map(|&i| labels[i]).collect();
    let detector = with_pool(config.max_concurrency, || Detector::<S>::fit(&train, &train_labels, config, config.seed))?;
    let predicted = test_idx.iter().map(|&i| detector.predict(&prepared[i]).map(|p| p.label)).collect::<Result<Vec<_>, _>>()?;
    let truth: Vec<Label> = test_idx.iter().map(|&i| labels[i]).collect();
    Ok((detector, evaluate(&predicted, &truth)?))
}

/// Reads a JSON-lines manifest; relative sources resolve against its directory.
pub fn read_manifest(path: &Path) -> Result<(DatasetManifest, PathBuf), PipelineError> {
    let file = std::fs::File::open(path)?;
    let manifest = DatasetManifest::read(std::io::BufReader::new(file))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((manifest, base))
}

/// Loads a trace file path or fetches a `0x` tx hash through `rpc`.
pub fn resolve_source(source: &str, base: &Path, rpc: Option<&RpcClient>) -> Result<TxRecord, IngestError> {
    let is_hash = source.len() == 66 && source.starts_with("0x") && source[2..].bytes().all(|b| b.is_ascii_hexdigit());
    if is_hash {
        let hash: TxHash = source.parse().map_err(|_| IngestError::MalformedTrace(format!("bad tx hash {source}")))?;
        match rpc {
            Some(client) => client.fetch_trace(&hash),
            None => Err(IngestError::RpcUnavailable(String::new(), "no RPC endpoint configured".into())),
        }
    } else {
        let path = Path::new(source);
        load_trace_file(if path.is_absolute() { path.to_path_buf() } else { base.join(path) })
    }
}

/// One result per source, in input order.
pub fn load_sources(
    sources: &[String],
    base: &Path,
    rpc: Option<&RpcClient>,
    max_concurrency: usize,
) -> Vec<Result<TxRecord, IngestError>> {
    with_pool(max_concurrency, || sources.par_iter().map(|s| resolve_source(s, base, rpc)).collect())
}

/// One result per manifest entry, in manifest order.
pub fn load_manifest_records(
    manifest: &DatasetManifest,
    base: &Path,
    rpc: Option<&RpcClient>,
    max_concurrency: usize,
) -> Vec<Result<TxRecord, IngestError>> {
    let sources: Vec<String> = manifest.entries.iter().map(|e| e.source.clone()).collect();
    load_sources(&sources, base, rpc, max_concurrency)
}

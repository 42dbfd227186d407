use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::classify::ClassifierConfig;
use crate::global::{Graph2VecParams, SignatureConfig};
use crate::ingest::rpc::RPC_URL_ENV;

/// Fully resolved run settings. Layers apply as defaults < file < environment < flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rpc_url: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub chain_id: Option<u64>,
    pub model_path: Option<PathBuf>,
    /// Worker bound for batch stages and RPC fetches.
    pub max_concurrency: usize,
    pub seed: u64,
    pub runs: usize,
    pub split_ratio: f64,
    pub embedding: Graph2VecParams,
    pub classifier: ClassifierConfig,
    pub signatures: SignatureConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            rpc_url: None,
            cache_dir: None,
            chain_id: None,
            model_path: None,
            max_concurrency: 4,
            seed: 42,
            runs: 10,
            split_ratio: 0.7,
            embedding: Graph2VecParams::default(),
            classifier: ClassifierConfig::default(),
            signatures: SignatureConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Defaults, then the optional file, then `BRIDGEGUARD_RPC_URL`.
    pub fn load(file: Option<&Path>) -> Result<Self, PipelineError> {
        let mut config = match file {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        if let Some(url) = std::env::var(RPC_URL_ENV).ok().filter(|s| !s.is_empty()) {
            config.rpc_url = Some(url);
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(PipelineError::Config(format!("split_ratio {} not in (0, 1)", self.split_ratio)));
        }
        if self.runs == 0 {
            return Err(PipelineError::Config("runs must be at least 1".into()));
        }
        if self.max_concurrency == 0 {
            return Err(PipelineError::Config("max_concurrency must be at least 1".into()));
        }
        if let ClassifierConfig::Knn { k } = self.classifier {
            if k == 0 || k % 2 == 0 {
                return Err(PipelineError::Config(format!("knn k must be a positive odd integer, got {k}")));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn config_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes to JSON");
        hex::encode(Sha256::digest(&bytes))
    }
}

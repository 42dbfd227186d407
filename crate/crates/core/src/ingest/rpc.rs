//! JSON-RPC ingestion: `debug_traceTransaction` (callTracer) plus `eth_getTransactionReceipt`.
//!
//! Raw responses are cached under `<cache_dir>/<chain_id>/<tx_hash>.json` and replayed on
//! later fetches without touching the network.

use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::format::{parse_trace_document, RawFrame, RawReceiptLog, TraceDocument};
use super::{IngestError, TxRecord};
use crate::primitives::{quantity, TxHash};

pub const RPC_URL_ENV: &str = "BRIDGEGUARD_RPC_URL";

/// Picks the endpoint from an explicit flag, falling back to `BRIDGEGUARD_RPC_URL`.
pub fn resolve_endpoint(flag: Option<&str>) -> Option<String> {
    flag.map(str::to_string).or_else(|| std::env::var(RPC_URL_ENV).ok().filter(|s| !s.is_empty()))
}

#[derive(Debug, Clone)]
pub struct RpcConfig {
    pub url: String,
    /// Known chain id; queried once per client via `eth_chainId` when absent.
    pub chain_id: Option<u64>,
    pub cache_dir: Option<PathBuf>,
    pub max_concurrency: usize,
    pub timeout: Duration,
}

impl RpcConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self { url: url.into(), chain_id: None, cache_dir: None, max_concurrency: 4, timeout: Duration::from_secs(30) }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CachedResponses {
    chain_id: u64,
    receipt: Value,
    trace: Value,
}

#[derive(Deserialize)]
struct RpcResponse {
    #[serde(default)]
    result: Option<Value>,
    #[serde(default)]
    error: Option<RpcErrorObject>,
}

#[derive(Deserialize)]
struct RpcErrorObject {
    code: i64,
    #[serde(default)]
    message: String,
}

pub struct RpcClient {
    config: RpcConfig,
    agent: ureq::Agent,
    chain_id: OnceLock<u64>,
    next_id: AtomicU64,
}

impl RpcClient {
    pub fn new(config: RpcConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let chain_id = OnceLock::new();
        if let Some(id) = config.chain_id {
            let _ = chain_id.set(id);
        }
        Self { config, agent, chain_id, next_id: AtomicU64::new(1) }
    }

    pub fn config(&self) -> &RpcConfig {
        &self.config
    }

    fn unavailable(&self, msg: impl ToString) -> IngestError {
        IngestError::RpcUnavailable(self.config.url.clone(), msg.to_string())
    }

    fn call(&self, method: &str, params: Value) -> Result<Result<Value, RpcErrorObject>, IngestError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let body = json!({"jsonrpc": "2.0", "id": id, "method": method, "params": params});
        let mut resp = self.agent.post(&self.config.url).send_json(&body).map_err(|e| self.unavailable(e))?;
        let status = resp.status();
        let parsed: Result<RpcResponse, _> = resp.body_mut().read_json();
        match parsed {
            Ok(RpcResponse { error: Some(err), .. }) => Ok(Err(err)),
            Ok(RpcResponse { result, .. }) if status.is_success() => Ok(Ok(result.unwrap_or(Value::Null))),
            Ok(_) => Err(self.unavailable(format!("http status {status}"))),
            Err(e) if status.is_success() => Err(self.unavailable(format!("invalid response body: {e}"))),
            Err(_) => Err(self.unavailable(format!("http status {status}"))),
        }
    }

    pub fn chain_id(&self) -> Result<u64, IngestError> {
        if let Some(id) = self.chain_id.get() {
            return Ok(*id);
        }
        let value = self
            .call("eth_chainId", json!([]))?
            .map_err(|e| IngestError::Rpc { code: e.code, message: e.message })?;
        let id = value
            .as_str()
            .ok_or_else(|| IngestError::MalformedTrace(format!("eth_chainId returned {value}")))
            .and_then(|s| quantity::parse(s).map_err(IngestError::MalformedTrace))?;
        Ok(*self.chain_id.get_or_init(|| id))
    }

    fn cache_path(&self, chain_id: u64, tx_hash: &TxHash) -> Option<PathBuf> {
        self.config.cache_dir.as_ref().map(|dir| dir.join(chain_id.to_string()).join(format!("{tx_hash}.json")))
    }

    fn fetch_raw(&self, chain_id: u64, tx_hash: &TxHash) -> Result<CachedResponses, IngestError> {
        if let Some(path) = self.cache_path(chain_id, tx_hash) {
            if let Ok(bytes) = fs::read(&path) {
                if let Ok(cached) = serde_json::from_slice::<CachedResponses>(&bytes) {
                    return Ok(cached);
                }
            }
        }

        let receipt = self
            .call("eth_getTransactionReceipt", json!([tx_hash]))?
            .map_err(|e| IngestError::Rpc { code: e.code, message: e.message })?;
        if receipt.is_null() {
            return Err(IngestError::TxNotFound(*tx_hash));
        }

        let trace = match self.call(
            "debug_traceTransaction",
            json!([tx_hash, {"tracer": "callTracer", "tracerConfig": {"withLog": true}}]),
        )? {
            Ok(v) => v,
            Err(e) => {
                let msg = e.message.to_ascii_lowercase();
                return Err(if e.code == -32601
                    || msg.contains("does not exist")
                    || msg.contains("not available")
                    || msg.contains("not supported")
                    || msg.contains("method not found")
                {
                    IngestError::TraceUnsupported(e.message)
                } else if msg.contains("not found") {
                    IngestError::TxNotFound(*tx_hash)
                } else {
                    IngestError::Rpc { code: e.code, message: e.message }
                });
            }
        };

        let cached = CachedResponses { chain_id, receipt, trace };
        if let Some(path) = self.cache_path(chain_id, tx_hash) {
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir)?;
            }
            fs::write(&path, serde_json::to_vec_pretty(&cached).expect("json value serializes"))?;
        }
        Ok(cached)
    }

    /// The document `load_trace_file` would read for the same transaction.
    pub fn fetch_document(&self, tx_hash: &TxHash) -> Result<TraceDocument, IngestError> {
        let chain_id = self.chain_id()?;
        let raw = self.fetch_raw(chain_id, tx_hash)?;
        let trace: RawFrame = serde_json::from_value(raw.trace.clone())
            .map_err(|e| IngestError::MalformedTrace(format!("trace response: {e}")))?;
        let logs: Vec<RawReceiptLog> = serde_json::from_value(raw.receipt.get("logs").cloned().unwrap_or(json!([])))
            .map_err(|e| IngestError::MalformedTrace(format!("receipt logs: {e}")))?;
        let block_number = raw
            .receipt
            .get("blockNumber")
            .and_then(Value::as_str)
            .map(quantity::parse)
            .transpose()
            .map_err(IngestError::MalformedTrace)?;
        Ok(TraceDocument { tx_hash: Some(*tx_hash), chain_id: Some(chain_id), block_number, trace: Some(trace), logs: Some(logs) })
    }

    pub fn fetch_trace(&self, tx_hash: &TxHash) -> Result<TxRecord, IngestError> {
        let doc = self.fetch_document(tx_hash)?;
        parse_trace_document(&doc, *tx_hash)
    }

    /// Fetches many transactions with at most `max_concurrency` requests in flight. Output order follows input.
    pub fn fetch_many(&self, hashes: &[TxHash]) -> Vec<Result<TxRecord, IngestError>> {
        use rayon::prelude::*;
        // resolve the chain id once before fanning out
        if let Err(e) = self.chain_id() {
            let msg = e.to_string();
            return hashes.iter().map(|_| Err(self.unavailable(&msg))).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.max_concurrency.max(1))
            .build()
            .expect("thread pool");
        pool.install(|| hashes.par_iter().map(|h| self.fetch_trace(h)).collect())
    }
}

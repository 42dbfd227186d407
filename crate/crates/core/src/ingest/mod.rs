//! Transaction trace acquisition and normalization.
//!
//! A [`TxRecord`] is built from a call-tracer document (the `trace` tree plus the
//! receipt `logs`), either read from disk or fetched from a node. Both paths go
//! through the same parser in [`format`].

mod builder;
mod format;
mod manifest;
pub mod rpc;

use serde::{Deserialize, Serialize};

use crate::primitives::{Address, Selector, TxHash, Wei, B256};

pub use builder::{FrameId, RecordBuilder};
pub use format::{
    load_trace_file, parse_trace_document, read_trace_bytes, to_document, write_trace_file, RawFrame, RawFrameLog,
    RawReceiptLog, TraceDocument,
};
pub use manifest::{DatasetManifest, Label, ManifestEntry};
pub use rpc::{RpcClient, RpcConfig};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("trace document has no root frame")]
    EmptyTrace,
    #[error("node at {0} is unavailable: {1}")]
    RpcUnavailable(String, String),
    #[error("transaction {0} not found")]
    TxNotFound(TxHash),
    #[error("node does not support call tracing: {0}")]
    TraceUnsupported(String),
    #[error("rpc error {code}: {message}")]
    Rpc { code: i64, message: String },
    #[error("invalid manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FrameKind {
    Call,
    StaticCall,
    DelegateCall,
    CallCode,
    Create,
    Create2,
    SelfDestruct,
}

impl FrameKind {
    pub const ALL: [FrameKind; 7] = [
        FrameKind::Call,
        FrameKind::StaticCall,
        FrameKind::DelegateCall,
        FrameKind::CallCode,
        FrameKind::Create,
        FrameKind::Create2,
        FrameKind::SelfDestruct,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FrameKind::Call => "CALL",
            FrameKind::StaticCall => "STATICCALL",
            FrameKind::DelegateCall => "DELEGATECALL",
            FrameKind::CallCode => "CALLCODE",
            FrameKind::Create => "CREATE",
            FrameKind::Create2 => "CREATE2",
            FrameKind::SelfDestruct => "SELFDESTRUCT",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        let upper = text.to_ascii_uppercase();
        match upper.as_str() {
            "SUICIDE" => Some(FrameKind::SelfDestruct),
            _ => Self::ALL.into_iter().find(|k| k.as_str() == upper),
        }
    }
}

/// One call-tracer frame with its subcalls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallFrame {
    pub kind: FrameKind,
    pub caller: Address,
    /// Created address for CREATE*, refund beneficiary for SELFDESTRUCT.
    pub callee: Address,
    pub input: Vec<u8>,
    pub value: Wei,
    pub depth: usize,
    /// Global pre-order index; the root is 0.
    pub order: usize,
    /// The frame ended with an error. Kept in the tree; graph construction ignores it.
    pub reverted: bool,
    pub children: Vec<CallFrame>,
}

impl CallFrame {
    pub fn selector(&self) -> Option<Selector> {
        self.input.get(..4).and_then(Selector::from_slice)
    }

    pub fn frame_count(&self) -> usize {
        1 + self.children.iter().map(CallFrame::frame_count).sum::<usize>()
    }

    /// Pre-order iterator over this frame and all descendants.
    pub fn iter(&self) -> FrameIter<'_> {
        FrameIter { stack: vec![self] }
    }
}

pub struct FrameIter<'a> {
    stack: Vec<&'a CallFrame>,
}

impl<'a> Iterator for FrameIter<'a> {
    type Item = &'a CallFrame;

    fn next(&mut self) -> Option<Self::Item> {
        let frame = self.stack.pop()?;
        self.stack.extend(frame.children.iter().rev());
        Some(frame)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub emitter: Address,
    pub topic0: Option<B256>,
    pub topics_rest: Vec<B256>,
    pub data: Vec<u8>,
    pub log_index: u64,
    /// Pre-order index of the emitting frame, when the trace attributes it.
    pub frame: Option<usize>,
    /// Number of subcalls the emitting frame had made before this log.
    pub position: Option<usize>,
}

impl LogEntry {
    pub fn topics(&self) -> impl Iterator<Item = &B256> {
        self.topic0.iter().chain(self.topics_rest.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenTransfer {
    pub token: Address,
    pub from: Address,
    pub to: Address,
    pub amount: Wei,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxRecord {
    pub tx_hash: TxHash,
    pub chain_id: u64,
    pub block_number: u64,
    pub sender: Address,
    pub root: CallFrame,
    pub logs: Vec<LogEntry>,
}

fn word_to_address(word: &B256) -> Address {
    Address::from_slice(&word.0[12..]).expect("20 bytes")
}

impl TxRecord {
    pub fn frame_count(&self) -> usize {
        self.root.frame_count()
    }

    pub fn frames(&self) -> FrameIter<'_> {
        self.root.iter()
    }

    /// ERC-20 `Transfer` events found in the receipt logs.
    pub fn token_transfers(&self) -> Vec<TokenTransfer> {
        let transfer = B256::of_signature("Transfer(address,address,uint256)");
        self.logs
            .iter()
            .filter(|log| log.topic0 == Some(transfer) && log.topics_rest.len() == 2)
            .map(|log| {
                let mut amount = [0u8; 32];
                let n = log.data.len().min(32);
                amount[..n].copy_from_slice(&log.data[..n]);
                TokenTransfer {
                    token: log.emitter,
                    from: word_to_address(&log.topics_rest[0]),
                    to: word_to_address(&log.topics_rest[1]),
                    amount: Wei(amount),
                }
            })
            .collect()
    }

    /// Checks the structural invariants of a normalized record.
    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |msg: String| Err(IngestError::MalformedTrace(msg));
        if self.root.depth != 0 {
            return bad(format!("root depth is {}", self.root.depth));
        }
        if self.root.caller != self.sender {
            return bad(format!("root caller {} differs from sender {}", self.root.caller, self.sender));
        }
        let mut stack = vec![&self.root];
        let mut expected = 0usize;
        while let Some(frame) = stack.pop() {
            if frame.order != expected {
                return bad(format!("frame order {} where {} expected", frame.order, expected));
            }
            expected += 1;
            for child in &frame.children {
                if child.depth != frame.depth + 1 {
                    return bad(format!("frame {} has depth {} under depth {}", child.order, child.depth, frame.depth));
                }
            }
            stack.extend(frame.children.iter().rev());
        }
        let mut seen = std::collections::HashSet::new();
        for log in &self.logs {
            if !seen.insert(log.log_index) {
                return bad(format!("duplicate log index {}", log.log_index));
            }
            if let Some(f) = log.frame {
                if f >= expected {
                    return bad(format!("log {} attributed to missing frame {}", log.log_index, f));
                }
            }
        }
        Ok(())
    }
}

/// Pre-order listing of every frame in the record.
pub fn flatten_frames(record: &TxRecord) -> Vec<&CallFrame> {
    record.frames().collect()
}

/// Reassigns depth and pre-order indices over a tree built bottom-up.
pub fn renumber(root: &mut CallFrame) {
    fn walk(frame: &mut CallFrame, depth: usize, next: &mut usize) {
        frame.depth = depth;
        frame.order = *next;
        *next += 1;
        for child in &mut frame.children {
            walk(child, depth + 1, next);
        }
    }
    let mut next = 0;
    walk(root, 0, &mut next);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(kind: FrameKind, to: u8) -> CallFrame {
        CallFrame {
            kind,
            caller: Address::ZERO,
            callee: Address([to; 20]),
            input: vec![],
            value: Wei::ZERO,
            depth: 0,
            order: 0,
            reverted: false,
            children: vec![],
        }
    }

    fn record(root: CallFrame) -> TxRecord {
        TxRecord { tx_hash: B256::ZERO, chain_id: 1, block_number: 0, sender: root.caller, root, logs: vec![] }
    }

    #[test]
    fn flatten_assigns_preorder() {
        // root -> [A -> [B], C]
        let mut a = leaf(FrameKind::Call, 1);
        a.children.push(leaf(FrameKind::Call, 2));
        let mut root = leaf(FrameKind::Call, 9);
        root.children = vec![a, leaf(FrameKind::StaticCall, 3)];
        renumber(&mut root);
        let rec = record(root);
        let flat = flatten_frames(&rec);
        let callees: Vec<u8> = flat.iter().map(|f| f.callee.0[0]).collect();
        assert_eq!(callees, vec![9, 1, 2, 3]);
        assert!(flat.iter().enumerate().all(|(i, f)| f.order == i));
        rec.validate().unwrap();
    }

    #[test]
    fn flatten_single_root() {
        let rec = record(leaf(FrameKind::Call, 1));
        assert_eq!(flatten_frames(&rec).len(), 1);
    }

    #[test]
    fn validate_rejects_bad_depth() {
        let mut root = leaf(FrameKind::Call, 1);
        root.children.push(leaf(FrameKind::Call, 2));
        renumber(&mut root);
        root.children[0].depth = 5;
        assert!(matches!(record(root).validate(), Err(IngestError::MalformedTrace(_))));
    }

    #[test]
    fn selector_absent_for_short_input() {
        let mut f = leaf(FrameKind::Call, 1);
        f.input = vec![0xa9, 0x05, 0x9c];
        assert_eq!(f.selector(), None);
        f.input.push(0xbb);
        assert_eq!(f.selector().unwrap().to_string(), "0xa9059cbb");
    }

    #[test]
    fn frame_kind_parse_accepts_aliases() {
        assert_eq!(FrameKind::parse("delegatecall"), Some(FrameKind::DelegateCall));
        assert_eq!(FrameKind::parse("SUICIDE"), Some(FrameKind::SelfDestruct));
        assert_eq!(FrameKind::parse("JUMP"), None);
    }
}

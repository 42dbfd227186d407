//! The on-disk trace document: a call-tracer tree under `trace` plus receipt logs under `logs`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{renumber, CallFrame, FrameKind, IngestError, LogEntry, TxRecord};
use crate::primitives::{decode_hex, encode_hex, keccak256, quantity, Address, TxHash, Wei, B256};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_hash: Option<TxHash>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_number: Option<u64>,
    #[serde(default)]
    pub trace: Option<RawFrame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logs: Option<Vec<RawReceiptLog>>,
}

/// A frame as emitted by the `callTracer`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawFrame {
    #[serde(rename = "type")]
    pub kind: String,
    pub from: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub logs: Vec<RawFrameLog>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub calls: Vec<RawFrame>,
}

/// A log attached to a frame by `callTracer` with `withLog: true`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawFrameLog {
    pub address: String,
    #[serde(default)]
    pub topics: Vec<String>,
    #[serde(default)]
    pub data: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RawReceiptLog {
    pub address: String,
    #[serde(default)]
    pub topics: Vec<String>,
    #[serde(default)]
    pub data: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_index: Option<String>,
}

fn malformed(msg: impl Into<String>) -> IngestError {
    IngestError::MalformedTrace(msg.into())
}

fn parse_address(text: &str) -> Result<Address, IngestError> {
    text.parse().map_err(|e| malformed(format!("{e}")))
}

fn parse_bytes(text: Option<&str>) -> Result<Vec<u8>, IngestError> {
    match text {
        None | Some("") => Ok(Vec::new()),
        Some(t) => decode_hex(t).map_err(|e| malformed(format!("{e}"))),
    }
}

fn parse_topics(raw: &[String]) -> Result<(Option<B256>, Vec<B256>), IngestError> {
    let mut topics = raw
        .iter()
        .map(|t| t.parse::<B256>().map_err(|e| malformed(format!("{e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if topics.is_empty() {
        return Ok((None, topics));
    }
    let first = topics.remove(0);
    Ok((Some(first), topics))
}

fn convert_frame<'a>(raw: &'a RawFrame, frame_logs: &mut Vec<Vec<(usize, &'a RawFrameLog)>>) -> Result<CallFrame, IngestError> {
    let kind = FrameKind::parse(&raw.kind).ok_or_else(|| malformed(format!("unknown frame type {:?}", raw.kind)))?;
    let caller = parse_address(&raw.from)?;
    let callee = match raw.to.as_deref() {
        Some(t) if !t.is_empty() => parse_address(t)?,
        _ if matches!(kind, FrameKind::SelfDestruct | FrameKind::Create | FrameKind::Create2) => Address::ZERO,
        _ => return Err(malformed(format!("{} frame without `to`", kind.as_str()))),
    };
    let value = match raw.value.as_deref() {
        None | Some("") => Wei::ZERO,
        Some(v) => v.parse().map_err(|e| malformed(format!("{e}")))?,
    };
    let input = parse_bytes(raw.input.as_deref())?;

    let slot = frame_logs.len();
    frame_logs.push(Vec::new());
    let mut with_pos = Vec::with_capacity(raw.logs.len());
    for log in &raw.logs {
        let pos = match log.position.as_deref() {
            Some(p) => quantity::parse(p).map_err(malformed)? as usize,
            None => raw.calls.len(),
        };
        with_pos.push((pos, log));
    }
    frame_logs[slot] = with_pos;

    let children = raw
        .calls
        .iter()
        .map(|c| convert_frame(c, frame_logs))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CallFrame {
        kind,
        caller,
        callee,
        input,
        value,
        depth: 0,
        order: 0,
        reverted: raw.error.is_some(),
        children,
    })
}

/// Frame-attached logs in execution order, skipping reverted subtrees.
fn executed_frame_logs<'a>(
    root: &CallFrame,
    frame_logs: &[Vec<(usize, &'a RawFrameLog)>],
) -> Vec<(usize, usize, &'a RawFrameLog)> {
    fn walk<'a>(
        frame: &CallFrame,
        frame_logs: &[Vec<(usize, &'a RawFrameLog)>],
        out: &mut Vec<(usize, usize, &'a RawFrameLog)>,
    ) {
        if frame.reverted {
            return;
        }
        let logs = &frame_logs[frame.order];
        for i in 0..=frame.children.len() {
            for (pos, log) in logs.iter().filter(|(p, _)| *p == i || (i == frame.children.len() && *p > i)) {
                out.push((frame.order, *pos, *log));
            }
            if let Some(child) = frame.children.get(i) {
                walk(child, frame_logs, out);
            }
        }
    }
    let mut out = Vec::new();
    walk(root, frame_logs, &mut out);
    out
}

fn receipt_logs(raw: &[RawReceiptLog]) -> Result<Vec<LogEntry>, IngestError> {
    let mut logs = Vec::with_capacity(raw.len());
    for (i, log) in raw.iter().enumerate() {
        let (topic0, topics_rest) = parse_topics(&log.topics)?;
        let log_index = match log.log_index.as_deref() {
            Some(ix) => quantity::parse(ix).map_err(malformed)?,
            None => i as u64,
        };
        logs.push(LogEntry {
            emitter: parse_address(&log.address)?,
            topic0,
            topics_rest,
            data: parse_bytes(log.data.as_deref())?,
            log_index,
            frame: None,
            position: None,
        });
    }
    logs.sort_by_key(|l| l.log_index);
    Ok(logs)
}

/// Normalizes a parsed document. `fallback_hash` is used when the document carries no `tx_hash`.
pub fn parse_trace_document(doc: &TraceDocument, fallback_hash: TxHash) -> Result<TxRecord, IngestError> {
    let raw_root = doc.trace.as_ref().ok_or(IngestError::EmptyTrace)?;
    let mut frame_logs = Vec::new();
    let mut root = convert_frame(raw_root, &mut frame_logs)?;
    // convert_frame pushes slots in pre-order, so slot index == pre-order index
    renumber(&mut root);
    let executed = executed_frame_logs(&root, &frame_logs);

    let mut logs = match &doc.logs {
        Some(raw) => receipt_logs(raw)?,
        None => {
            let mut logs = Vec::with_capacity(executed.len());
            for (i, (_, _, log)) in executed.iter().enumerate() {
                let (topic0, topics_rest) = parse_topics(&log.topics)?;
                logs.push(LogEntry {
                    emitter: parse_address(&log.address)?,
                    topic0,
                    topics_rest,
                    data: parse_bytes(log.data.as_deref())?,
                    log_index: i as u64,
                    frame: None,
                    position: None,
                });
            }
            logs
        }
    };

    // attribute receipt logs to frames only when the two sequences agree exactly
    let agrees = executed.len() == logs.len()
        && executed.iter().zip(&logs).all(|((_, _, raw), log)| {
            parse_address(&raw.address).ok() == Some(log.emitter)
                && raw.topics.first().and_then(|t| t.parse::<B256>().ok()) == log.topic0
        });
    if agrees {
        for ((frame, pos, _), log) in executed.iter().zip(logs.iter_mut()) {
            log.frame = Some(*frame);
            log.position = Some(*pos);
        }
    }

    let record = TxRecord {
        tx_hash: doc.tx_hash.unwrap_or(fallback_hash),
        chain_id: doc.chain_id.unwrap_or(0),
        block_number: doc.block_number.unwrap_or(0),
        sender: root.caller,
        root,
        logs,
    };
    record.validate()?;
    Ok(record)
}

/// Parses raw file bytes. Documents without a `tx_hash` are identified by the keccak of their bytes.
pub fn read_trace_bytes(bytes: &[u8]) -> Result<TxRecord, IngestError> {
    let doc: TraceDocument = serde_json::from_slice(bytes).map_err(|e| malformed(e.to_string()))?;
    parse_trace_document(&doc, B256(keccak256(bytes)))
}

pub fn load_trace_file(path: impl AsRef<Path>) -> Result<TxRecord, IngestError> {
    let bytes = fs::read(path.as_ref())?;
    read_trace_bytes(&bytes)
}

fn frame_to_raw(frame: &CallFrame, logs_by_frame: &[Vec<&LogEntry>]) -> RawFrame {
    let to = match frame.kind {
        FrameKind::SelfDestruct | FrameKind::Create | FrameKind::Create2 if frame.callee == Address::ZERO => None,
        _ => Some(frame.callee.to_string()),
    };
    RawFrame {
        kind: frame.kind.as_str().to_string(),
        from: frame.caller.to_string(),
        to,
        input: Some(encode_hex(&frame.input)),
        value: Some(frame.value.to_string()),
        error: frame.reverted.then(|| "execution reverted".to_string()),
        logs: logs_by_frame[frame.order]
            .iter()
            .map(|log| RawFrameLog {
                address: log.emitter.to_string(),
                topics: log.topics().map(|t| t.to_string()).collect(),
                data: Some(encode_hex(&log.data)),
                position: Some(format!("{:#x}", log.position.unwrap_or(frame.children.len()))),
            })
            .collect(),
        calls: frame.children.iter().map(|c| frame_to_raw(c, logs_by_frame)).collect(),
    }
}

/// Converts a record back into its on-disk document.
pub fn to_document(record: &TxRecord) -> TraceDocument {
    let mut logs_by_frame: Vec<Vec<&LogEntry>> = vec![Vec::new(); record.frame_count()];
    for log in &record.logs {
        if let Some(f) = log.frame {
            logs_by_frame[f].push(log);
        }
    }
    TraceDocument {
        tx_hash: Some(record.tx_hash),
        chain_id: Some(record.chain_id),
        block_number: Some(record.block_number),
        trace: Some(frame_to_raw(&record.root, &logs_by_frame)),
        logs: Some(
            record
                .logs
                .iter()
                .map(|log| RawReceiptLog {
                    address: log.emitter.to_string(),
                    topics: log.topics().map(|t| t.to_string()).collect(),
                    data: Some(encode_hex(&log.data)),
                    log_index: Some(format!("{:#x}", log.log_index)),
                })
                .collect(),
        ),
    }
}

pub fn write_trace_file(record: &TxRecord, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let text = serde_json::to_string_pretty(&to_document(record)).map_err(|e| malformed(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::Selector;

    const TOKEN_TRANSFER: &str = r#"{
      "trace": {
        "type": "CALL",
        "from": "0x1111111111111111111111111111111111111111",
        "to": "0x2222222222222222222222222222222222222222",
        "input": "0xa9059cbb0000000000000000000000003333333333333333333333333333333333333333000000000000000000000000000000000000000000000000000000000000000a",
        "value": "0x0"
      },
      "logs": []
    }"#;

    #[test]
    fn token_transfer_selector_is_first_four_input_bytes() {
        let rec = read_trace_bytes(TOKEN_TRANSFER.as_bytes()).unwrap();
        assert_eq!(rec.root.selector(), Some(Selector::of_signature("transfer(address,uint256)")));
        assert_eq!(rec.frame_count(), 1);
        assert!(rec.logs.is_empty());
    }

    #[test]
    fn nested_calls_get_depths() {
        let doc = r#"{"trace": {"type":"CALL","from":"0x1111111111111111111111111111111111111111",
            "to":"0x2222222222222222222222222222222222222222","input":"0x",
            "calls":[
              {"type":"CALL","from":"0x2222222222222222222222222222222222222222","to":"0x3333333333333333333333333333333333333333","input":"0x"},
              {"type":"STATICCALL","from":"0x2222222222222222222222222222222222222222","to":"0x4444444444444444444444444444444444444444"}
            ]}, "logs": []}"#;
        let rec = read_trace_bytes(doc.as_bytes()).unwrap();
        let depths: Vec<usize> = rec.frames().map(|f| f.depth).collect();
        assert_eq!(depths, vec![0, 1, 1]);
        assert_eq!(rec.sender, "0x1111111111111111111111111111111111111111".parse().unwrap());
    }

    #[test]
    fn missing_trace_is_empty() {
        assert!(matches!(read_trace_bytes(br#"{"logs": []}"#), Err(IngestError::EmptyTrace)));
        assert!(matches!(read_trace_bytes(br#"{"trace": null}"#), Err(IngestError::EmptyTrace)));
    }

    #[test]
    fn schema_violations_are_malformed() {
        for doc in [
            r#"not json"#,
            r#"{"trace": {"type":"JUMP","from":"0x1111111111111111111111111111111111111111","to":"0x1111111111111111111111111111111111111111"}}"#,
            r#"{"trace": {"type":"CALL","from":"0x11","to":"0x1111111111111111111111111111111111111111"}}"#,
            r#"{"trace": {"type":"CALL","from":"0x1111111111111111111111111111111111111111"}}"#,
            r#"{"trace": {"type":"CALL","from":"0x1111111111111111111111111111111111111111","to":"0x1111111111111111111111111111111111111111","input":"0xzz"}}"#,
        ] {
            assert!(matches!(read_trace_bytes(doc.as_bytes()), Err(IngestError::MalformedTrace(_))), "{doc}");
        }
    }

    #[test]
    fn frame_logs_attribute_receipt_logs() {
        let doc = r#"{"trace": {"type":"CALL","from":"0x1111111111111111111111111111111111111111",
            "to":"0x2222222222222222222222222222222222222222","input":"0x",
            "logs":[{"address":"0x2222222222222222222222222222222222222222","topics":["0x00000000000000000000000000000000000000000000000000000000000000aa"],"data":"0x","position":"0x1"}],
            "calls":[
              {"type":"CALL","from":"0x2222222222222222222222222222222222222222","to":"0x3333333333333333333333333333333333333333","input":"0x",
               "logs":[{"address":"0x3333333333333333333333333333333333333333","topics":["0x00000000000000000000000000000000000000000000000000000000000000bb"],"data":"0x","position":"0x0"}]}
            ]},
            "logs": [
              {"address":"0x3333333333333333333333333333333333333333","topics":["0x00000000000000000000000000000000000000000000000000000000000000bb"],"data":"0x","logIndex":"0x4"},
              {"address":"0x2222222222222222222222222222222222222222","topics":["0x00000000000000000000000000000000000000000000000000000000000000aa"],"data":"0x","logIndex":"0x5"}
            ]}"#;
        let rec = read_trace_bytes(doc.as_bytes()).unwrap();
        assert_eq!(rec.logs[0].frame, Some(1));
        assert_eq!(rec.logs[1].frame, Some(0));
        assert_eq!(rec.logs[0].log_index, 4);
    }

    #[test]
    fn mismatched_frame_logs_leave_logs_unattributed() {
        let doc = r#"{"trace": {"type":"CALL","from":"0x1111111111111111111111111111111111111111",
            "to":"0x2222222222222222222222222222222222222222",
            "logs":[{"address":"0x2222222222222222222222222222222222222222","topics":[],"data":"0x"}]},
            "logs": [
              {"address":"0x3333333333333333333333333333333333333333","topics":[],"data":"0x","logIndex":"0x0"}
            ]}"#;
        let rec = read_trace_bytes(doc.as_bytes()).unwrap();
        assert_eq!(rec.logs[0].frame, None);
    }

    #[test]
    fn selfdestruct_without_beneficiary_uses_zero_address() {
        let doc = r#"{"trace": {"type":"CALL","from":"0x1111111111111111111111111111111111111111",
            "to":"0x2222222222222222222222222222222222222222",
            "calls":[{"type":"SELFDESTRUCT","from":"0x2222222222222222222222222222222222222222"}]}}"#;
        let rec = read_trace_bytes(doc.as_bytes()).unwrap();
        assert_eq!(rec.root.children[0].callee, Address::ZERO);
        assert_eq!(rec.root.children[0].kind, FrameKind::SelfDestruct);
    }

    #[test]
    fn reverted_frames_are_kept_and_flagged() {
        let doc = r#"{"trace": {"type":"CALL","from":"0x1111111111111111111111111111111111111111",
            "to":"0x2222222222222222222222222222222222222222",
            "calls":[{"type":"CALL","from":"0x2222222222222222222222222222222222222222","to":"0x3333333333333333333333333333333333333333","error":"execution reverted"}]}}"#;
        let rec = read_trace_bytes(doc.as_bytes()).unwrap();
        assert_eq!(rec.frame_count(), 2);
        assert!(rec.root.children[0].reverted);
    }

    #[test]
    fn transfer_logs_become_token_transfers() {
        let doc = r#"{"trace": {"type":"CALL","from":"0x1111111111111111111111111111111111111111","to":"0x2222222222222222222222222222222222222222"},
          "logs":[{"address":"0x2222222222222222222222222222222222222222",
            "topics":["0xddf252ad1be2c89b69c2b068fc378daa952ba7f163c4a11628f55a4df523b3ef",
                      "0x0000000000000000000000001111111111111111111111111111111111111111",
                      "0x0000000000000000000000003333333333333333333333333333333333333333"],
            "data":"0x000000000000000000000000000000000000000000000000000000000000000a","logIndex":"0x0"}]}"#;
        let rec = read_trace_bytes(doc.as_bytes()).unwrap();
        let transfers = rec.token_transfers();
        assert_eq!(transfers.len(), 1);
        assert_eq!(transfers[0].amount, Wei::from_u128(10));
        assert_eq!(transfers[0].to, "0x3333333333333333333333333333333333333333".parse().unwrap());
    }
}

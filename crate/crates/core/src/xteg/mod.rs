//! Cross-chain transaction execution graphs.
//!
//! Vertices are the sender EOA, `(contract, function)` pairs and `(emitter, event)` pairs.
//! Every frame contributes one edge from the function executing in its parent frame to the
//! frame's callee; every log contributes one EMIT edge from the emitting function to the event.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::ingest::{CallFrame, FrameKind, LogEntry, TxRecord};
use crate::motif::Digraph;
use crate::primitives::{Address, Selector, TxHash, B256};

#[derive(Debug, thiserror::Error)]
pub enum XtegError {
    #[error("graph for {0} is not weakly connected")]
    DisconnectedGraph(TxHash),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FunctionKey {
    Selector(Selector),
    /// Calldata shorter than four bytes.
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKey {
    Topic(B256),
    Anonymous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VertexKind {
    Eoa(Address),
    ContractFunction(Address, FunctionKey),
    LogEvent(Address, EventKey),
}

impl VertexKind {
    pub fn tag(&self) -> &'static str {
        match self {
            VertexKind::Eoa(_) => "EOA",
            VertexKind::ContractFunction(..) => "FN",
            VertexKind::LogEvent(..) => "LOG",
        }
    }

    pub fn address(&self) -> Address {
        match self {
            VertexKind::Eoa(a) | VertexKind::ContractFunction(a, _) | VertexKind::LogEvent(a, _) => *a,
        }
    }
}

impl fmt::Display for VertexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexKind::Eoa(a) => write!(f, "EOA {a}"),
            VertexKind::ContractFunction(a, FunctionKey::Selector(s)) => write!(f, "FN {a}:{s}"),
            VertexKind::ContractFunction(a, FunctionKey::Fallback) => write!(f, "FN {a}:fallback"),
            VertexKind::LogEvent(a, EventKey::Topic(t)) => write!(f, "LOG {a}:{t}"),
            VertexKind::LogEvent(a, EventKey::Anonymous) => write!(f, "LOG {a}:anonymous"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeKind {
    Call,
    StaticCall,
    DelegateCall,
    CallCode,
    Create,
    Create2,
    SelfDestruct,
    Emit,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Call => "CALL",
            EdgeKind::StaticCall => "STATICCALL",
            EdgeKind::DelegateCall => "DELEGATECALL",
            EdgeKind::CallCode => "CALLCODE",
            EdgeKind::Create => "CREATE",
            EdgeKind::Create2 => "CREATE2",
            EdgeKind::SelfDestruct => "SELFDESTRUCT",
            EdgeKind::Emit => "EMIT",
        }
    }
}

impl From<FrameKind> for EdgeKind {
    fn from(kind: FrameKind) -> Self {
        match kind {
            FrameKind::Call => EdgeKind::Call,
            FrameKind::StaticCall => EdgeKind::StaticCall,
            FrameKind::DelegateCall => EdgeKind::DelegateCall,
            FrameKind::CallCode => EdgeKind::CallCode,
            FrameKind::Create => EdgeKind::Create,
            FrameKind::Create2 => EdgeKind::Create2,
            FrameKind::SelfDestruct => EdgeKind::SelfDestruct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: usize,
    pub kind: VertexKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct XtegEdge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
    /// Position of the first occurrence in execution order.
    pub order: usize,
    pub multiplicity: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Xteg {
    pub tx_hash: TxHash,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<XtegEdge>,
}

/// Accumulates vertices and merged edges in first-appearance order.
#[derive(Debug, Default)]
pub struct XtegBuilder {
    vertices: Vec<Vertex>,
    vertex_ids: HashMap<VertexKind, usize>,
    edges: Vec<XtegEdge>,
    edge_ids: HashMap<(usize, usize, EdgeKind), usize>,
    next_order: usize,
}

impl XtegBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(&mut self, kind: VertexKind) -> usize {
        if let Some(id) = self.vertex_ids.get(&kind) {
            return *id;
        }
        let id = self.vertices.len();
        self.vertices.push(Vertex { id, kind });
        self.vertex_ids.insert(kind, id);
        id
    }

    pub fn edge(&mut self, src: usize, dst: usize, kind: EdgeKind) {
        let order = self.next_order;
        self.next_order += 1;
        match self.edge_ids.get(&(src, dst, kind)) {
            Some(ix) => self.edges[*ix].multiplicity += 1,
            None => {
                self.edge_ids.insert((src, dst, kind), self.edges.len());
                self.edges.push(XtegEdge { src, dst, kind, order, multiplicity: 1 });
            }
        }
    }

    pub fn finish(self, tx_hash: TxHash) -> Xteg {
        Xteg { tx_hash, vertices: self.vertices, edges: self.edges }
    }
}

fn callee_vertex(frame: &CallFrame, sender: Address) -> VertexKind {
    if frame.callee == sender {
        VertexKind::Eoa(sender)
    } else {
        let key = frame.selector().map(FunctionKey::Selector).unwrap_or(FunctionKey::Fallback);
        VertexKind::ContractFunction(frame.callee, key)
    }
}

fn log_vertex(log: &LogEntry) -> VertexKind {
    VertexKind::LogEvent(log.emitter, log.topic0.map(EventKey::Topic).unwrap_or(EventKey::Anonymous))
}

/// Frame that emitted `log`: the traced attribution when present, otherwise the deepest frame
/// whose callee is the emitter (earliest in pre-order), otherwise the root.
fn emitting_frame(frames: &[&CallFrame], log: &LogEntry) -> usize {
    if let Some(f) = log.frame {
        return f;
    }
    frames
        .iter()
        .filter(|f| f.callee == log.emitter && f.kind != FrameKind::SelfDestruct)
        .max_by(|a, b| a.depth.cmp(&b.depth).then(b.order.cmp(&a.order)))
        .map(|f| f.order)
        .unwrap_or(0)
}

/// Builds the execution graph of one transaction.
pub fn build_xteg(record: &TxRecord) -> Result<Xteg, XtegError> {
    let frames: Vec<&CallFrame> = record.frames().collect();
    let mut logs_by_frame: Vec<Vec<&LogEntry>> = vec![Vec::new(); frames.len()];
    for log in &record.logs {
        logs_by_frame[emitting_frame(&frames, log)].push(log);
    }
    for logs in &mut logs_by_frame {
        logs.sort_by_key(|l| l.log_index);
    }

    let mut b = XtegBuilder::new();
    let sender = b.vertex(VertexKind::Eoa(record.sender));
    // (frame, vertex of the function executing in its parent)
    let mut stack: Vec<(&CallFrame, usize)> = vec![(&record.root, sender)];
    while let Some((frame, parent)) = stack.pop() {
        let callee = b.vertex(callee_vertex(frame, record.sender));
        b.edge(parent, callee, frame.kind.into());
        for log in &logs_by_frame[frame.order] {
            let event = b.vertex(log_vertex(log));
            b.edge(callee, event, EdgeKind::Emit);
        }
        stack.extend(frame.children.iter().rev().map(|c| (c, callee)));
    }
    let g = b.finish(record.tx_hash);
    if !g.is_weakly_connected() {
        return Err(XtegError::DisconnectedGraph(record.tx_hash));
    }
    Ok(g)
}

impl Xteg {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Merged edge count.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edge occurrences before merging.
    pub fn raw_edge_count(&self) -> usize {
        self.edges.iter().map(|e| e.multiplicity as usize).sum()
    }

    pub fn log_count(&self) -> usize {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Emit).map(|e| e.multiplicity as usize).sum()
    }

    pub fn has_edge_kind(&self, kind: EdgeKind) -> bool {
        self.edges.iter().any(|e| e.kind == kind)
    }

    pub fn is_weakly_connected(&self) -> bool {
        let n = self.vertices.len();
        if n == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.src].push(e.dst);
            adj[e.dst].push(e.src);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }

    /// Directed simple graph over the same vertex ids: kinds and multiplicities dropped, no self-loops.
    pub fn to_simple_digraph(&self) -> Digraph {
        let mut arcs: Vec<(usize, usize)> =
            self.edges.iter().filter(|e| e.src != e.dst).map(|e| (e.src, e.dst)).collect();
        arcs.sort_unstable();
        arcs.dedup();
        Digraph::from_sorted_arcs(self.vertices.len(), arcs)
    }

    /// Writes a vertex table followed by `src dst kind order multiplicity` edge lines.
    pub fn write_dump(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "# xteg {}", self.tx_hash)?;
        writeln!(w, "# vertices: id kind")?;
        for v in &self.vertices {
            writeln!(w, "{} {}", v.id, v.kind)?;
        }
        writeln!(w, "# edges: src dst kind order multiplicity")?;
        for e in &self.edges {
            writeln!(w, "{} {} {} {} {}", e.src, e.dst, e.kind.as_str(), e.order, e.multiplicity)?;
        }
        Ok(())
    }
}

use super::{renumber, CallFrame, FrameKind, LogEntry, TxRecord};
use crate::primitives::{Address, TxHash, Wei, B256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameId(usize);

impl FrameId {
    pub const ROOT: FrameId = FrameId(0);
}

struct Node {
    frame: CallFrame,
    children: Vec<usize>,
}

struct PendingLog {
    frame: usize,
    position: usize,
    log: LogEntry,
}

/// Assembles a [`TxRecord`] call by call, in execution order.
pub struct RecordBuilder {
    sender: Address,
    nodes: Vec<Node>,
    logs: Vec<PendingLog>,
}

impl RecordBuilder {
    pub fn new(sender: Address, kind: FrameKind, to: Address, input: Vec<u8>, value: Wei) -> Self {
        let root = CallFrame {
            kind,
            caller: sender,
            callee: to,
            input,
            value,
            depth: 0,
            order: 0,
            reverted: false,
            children: Vec::new(),
        };
        Self { sender, nodes: vec![Node { frame: root, children: Vec::new() }], logs: Vec::new() }
    }

    pub fn callee(&self, frame: FrameId) -> Address {
        self.nodes[frame.0].frame.callee
    }

    /// Adds a subcall made by the code executing in `parent`.
    pub fn call(&mut self, parent: FrameId, kind: FrameKind, to: Address, input: Vec<u8>, value: Wei) -> FrameId {
        let id = self.nodes.len();
        let caller = self.nodes[parent.0].frame.callee;
        self.nodes.push(Node {
            frame: CallFrame {
                kind,
                caller,
                callee: to,
                input,
                value,
                depth: 0,
                order: 0,
                reverted: false,
                children: Vec::new(),
            },
            children: Vec::new(),
        });
        self.nodes[parent.0].children.push(id);
        FrameId(id)
    }

    pub fn revert(&mut self, frame: FrameId) {
        self.nodes[frame.0].frame.reverted = true;
    }

    /// Emits a log from the contract executing in `frame`.
    pub fn emit(&mut self, frame: FrameId, topics: Vec<B256>, data: Vec<u8>) {
        let emitter = self.nodes[frame.0].frame.callee;
        let mut topics = topics.into_iter();
        let log = LogEntry {
            emitter,
            topic0: topics.next(),
            topics_rest: topics.collect(),
            data,
            log_index: 0,
            frame: None,
            position: None,
        };
        let position = self.nodes[frame.0].children.len();
        self.logs.push(PendingLog { frame: frame.0, position, log });
    }

    /// Logs are numbered in execution order: a log emitted while `frame` had `p` children runs
    /// after the `p`-th child subtree. Logs inside reverted subtrees are dropped, as in a receipt.
    pub fn build(self, tx_hash: TxHash, chain_id: u64, block_number: u64) -> TxRecord {
        let RecordBuilder { sender, nodes, logs } = self;
        let mut logs_of: Vec<Vec<PendingLog>> = (0..nodes.len()).map(|_| Vec::new()).collect();
        for pending in logs {
            logs_of[pending.frame].push(pending);
        }
        let mut executed = Vec::new();
        fn run(ix: usize, dead: bool, nodes: &[Node], logs_of: &mut [Vec<PendingLog>], out: &mut Vec<PendingLog>) {
            let dead = dead || nodes[ix].frame.reverted;
            let mut pending = std::mem::take(&mut logs_of[ix]).into_iter().peekable();
            for p in 0..=nodes[ix].children.len() {
                while let Some(log) = pending.next_if(|l| l.position == p) {
                    if !dead {
                        out.push(log);
                    }
                }
                if let Some(child) = nodes[ix].children.get(p) {
                    run(*child, dead, nodes, logs_of, out);
                }
            }
        }
        run(0, false, &nodes, &mut logs_of, &mut executed);

        let mut slots: Vec<Option<Node>> = nodes.into_iter().map(Some).collect();
        fn assemble(ix: usize, slots: &mut [Option<Node>], visit: &mut Vec<usize>) -> CallFrame {
            let node = slots[ix].take().expect("each frame appears once");
            let mut frame = node.frame;
            visit.push(ix);
            frame.children = node.children.iter().map(|c| assemble(*c, slots, visit)).collect();
            frame
        }
        // arena index in pre-order visit sequence
        let mut visit = Vec::new();
        let mut root = assemble(0, &mut slots, &mut visit);
        renumber(&mut root);
        let mut order_of = vec![0usize; visit.len()];
        for (preorder, arena) in visit.iter().enumerate() {
            order_of[*arena] = preorder;
        }
        let logs = executed
            .into_iter()
            .enumerate()
            .map(|(i, pending)| LogEntry {
                log_index: i as u64,
                frame: Some(order_of[pending.frame]),
                position: Some(pending.position),
                ..pending.log
            })
            .collect();
        TxRecord { tx_hash, chain_id, block_number, sender, root, logs }
    }
}

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ingest::LogEntry;
use crate::primitives::B256;
use crate::xteg::Xteg;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub n_vertices: usize,
    /// Merged edges; multiplicity is ignored.
    pub n_edges: usize,
    pub n_logs: usize,
    pub density: f64,
}

/// `2|E| / (|V|(|V|-1))`, 0 below two vertices. Exceeds 1 on dense directed graphs.
pub fn density(n_vertices: usize, n_edges: usize) -> f64 {
    if n_vertices < 2 {
        return 0.0;
    }
    2.0 * n_edges as f64 / (n_vertices as f64 * (n_vertices as f64 - 1.0))
}

pub fn graph_stats(g: &Xteg) -> GraphStats {
    let (n_vertices, n_edges) = (g.vertex_count(), g.edge_count());
    GraphStats { n_vertices, n_edges, n_logs: g.log_count(), density: density(n_vertices, n_edges) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Deposit,
    Withdrawal,
    Unknown,
}

impl Direction {
    pub fn value(self) -> f64 {
        match self {
            Direction::Deposit => 1.0,
            Direction::Withdrawal => 0.0,
            Direction::Unknown => 0.5,
        }
    }
}

/// Event topics that mark a transaction as the deposit or the withdrawal leg.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureConfig {
    pub deposit: BTreeSet<B256>,
    pub withdrawal: BTreeSet<B256>,
}

pub const DEPOSIT_EVENTS: [&str; 2] = ["Deposit(address,uint256,uint256)", "Lock(address,uint256)"];
pub const WITHDRAWAL_EVENTS: [&str; 2] = ["Withdrawal(address,uint256,uint256)", "Unlock(address,uint256)"];

impl Default for SignatureConfig {
    fn default() -> Self {
        Self {
            deposit: DEPOSIT_EVENTS.iter().map(|s| B256::of_signature(s)).collect(),
            withdrawal: WITHDRAWAL_EVENTS.iter().map(|s| B256::of_signature(s)).collect(),
        }
    }
}

pub fn direction_flag(logs: &[LogEntry], config: &SignatureConfig) -> Direction {
    let topics = || logs.iter().filter_map(|l| l.topic0);
    let deposit = topics().any(|t| config.deposit.contains(&t));
    let withdrawal = topics().any(|t| config.withdrawal.contains(&t));
    match (deposit, withdrawal) {
        (true, false) => Direction::Deposit,
        (false, true) => Direction::Withdrawal,
        _ => Direction::Unknown,
    }
}

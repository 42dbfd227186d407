//! Directed three-node motif census.
//!
//! Every vertex triple of a simple digraph induces exactly one of sixteen isomorphism
//! classes (the directed triad census). [`motif_census_matrix`] counts them from
//! intersections of the bidirectional and unidirectional adjacency parts;
//! [`triad_census_bruteforce`] classifies every triple and serves as the oracle.

mod brute;
mod catalog;
mod census;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::xteg::Xteg;

pub use brute::{classify_triple, triad_census_bruteforce, BRUTE_FORCE_MAX_VERTICES};
pub use catalog::{catalog_table, TriadClass};
pub use census::motif_census_matrix;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MotifError {
    #[error("self-loop at vertex {0}")]
    SelfLoopPresent(usize),
    #[error("repeated arc {0} -> {1}")]
    MultiEdgePresent(usize, usize),
    #[error("arc {0} -> {1} references a vertex outside 0..{2}")]
    VertexOutOfRange(usize, usize, usize),
    #[error("brute-force census supports at most {max} vertices, got {got}")]
    GraphTooLarge { got: usize, max: usize },
}

/// Directed graph on vertices `0..n` given by its arc list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    arcs: Vec<(usize, usize)>,
}

impl Digraph {
    /// Unvalidated arc list; the census functions reject loops and repeated arcs.
    pub fn new(n: usize, arcs: Vec<(usize, usize)>) -> Self {
        Self { n, arcs }
    }

    pub(crate) fn from_sorted_arcs(n: usize, arcs: Vec<(usize, usize)>) -> Self {
        Self { n, arcs }
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    /// Applies `perm` (old id -> new id) to every arc.
    pub fn relabel(&self, perm: &[usize]) -> Digraph {
        Digraph { n: self.n, arcs: self.arcs.iter().map(|&(a, b)| (perm[a], perm[b])).collect() }
    }

    pub(crate) fn validate(&self) -> Result<(), MotifError> {
        let mut sorted = self.arcs.clone();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(MotifError::MultiEdgePresent(w[0].0, w[0].1));
            }
        }
        for &(a, b) in &sorted {
            if a >= self.n || b >= self.n {
                return Err(MotifError::VertexOutOfRange(a, b, self.n));
            }
            if a == b {
                return Err(MotifError::SelfLoopPresent(a));
            }
        }
        Ok(())
    }
}

/// Triad-class counts, indexed in [`TriadClass::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct LocalFeature {
    pub counts: [u64; 16],
}

impl LocalFeature {
    pub const DIM: usize = 16;

    pub fn count(&self, class: TriadClass) -> u64 {
        self.counts[class.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Sum over the classes whose underlying undirected graph is connected.
    pub fn connected_total(&self) -> u64 {
        TriadClass::ALL.iter().filter(|c| c.is_connected()).map(|c| self.count(*c)).sum()
    }

    pub fn to_scalars<S: Scalar>(&self) -> [S; 16] {
        self.counts.map(S::from_count)
    }
}

pub fn choose3(n: usize) -> u64 {
    let n = n as u64;
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 6
    }
}

/// Simplifies the graph and runs the matrix census.
pub fn local_feature(g: &Xteg) -> Result<LocalFeature, MotifError> {
    motif_census_matrix(&g.to_simple_digraph())
}

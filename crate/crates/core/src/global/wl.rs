use std::collections::BTreeMap;
use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::xteg::Xteg;

/// Rooted-subtree labels of every vertex at every relabeling round, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WlDocument {
    tokens: Vec<String>,
}

pub(crate) fn stable_hash(text: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(text.as_bytes());
    h.finish()
}

impl WlDocument {
    pub fn from_tokens(mut tokens: Vec<String>) -> Self {
        tokens.sort_unstable();
        Self { tokens }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Content address of the token multiset.
    pub fn content_key(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        hex::encode(&h.finalize()[..16])
    }

    pub fn counts(&self) -> BTreeMap<&str, usize> {
        let mut out = BTreeMap::new();
        for t in &self.tokens {
            *out.entry(t.as_str()).or_insert(0) += 1;
        }
        out
    }
}

/// Weisfeiler-Lehman relabeling over in- and out-neighborhoods with edge kinds.
///
/// Round 0 labels are the vertex kind tag plus the sorted incident edge kinds, e.g.
/// `FN[in:CALL,out:CALL,out:EMIT]`. Round `k` labels are `wl{k}:<hash>` of the previous label
/// and the sorted `(kind, neighbor label)` lists. Addresses never enter a label.
pub fn wl_document(g: &Xteg, iterations: usize) -> WlDocument {
    let n = g.vertex_count();
    let mut incident: Vec<Vec<String>> = vec![Vec::new(); n];
    for e in &g.edges {
        incident[e.src].push(format!("out:{}", e.kind.as_str()));
        incident[e.dst].push(format!("in:{}", e.kind.as_str()));
    }
    let mut labels: Vec<String> = g
        .vertices
        .iter()
        .map(|v| {
            let inc = &mut incident[v.id];
            inc.sort_unstable();
            format!("{}[{}]", v.kind.tag(), inc.join(","))
        })
        .collect();

    let mut tokens = Vec::with_capacity(n * (iterations + 1));
    tokens.extend(labels.iter().cloned());
    for round in 1..=iterations {
        let mut ins: Vec<Vec<String>> = vec![Vec::new(); n];
        let mut outs: Vec<Vec<String>> = vec![Vec::new(); n];
        for e in &g.edges {
            outs[e.src].push(format!("{}>{}", e.kind.as_str(), labels[e.dst]));
            ins[e.dst].push(format!("{}<{}", e.kind.as_str(), labels[e.src]));
        }
        let next: Vec<String> = (0..n)
            .map(|v| {
                ins[v].sort_unstable();
                outs[v].sort_unstable();
                let canonical = format!("{}|{}|{}", labels[v], ins[v].join(";"), outs[v].join(";"));
                format!("wl{round}:{:016x}", stable_hash(&canonical))
            })
            .collect();
        tokens.extend(next.iter().cloned());
        labels = next;
    }
    WlDocument::from_tokens(tokens)
}

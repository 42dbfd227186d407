use std::fmt::Write;

use serde::{Deserialize, Serialize};

/// The sixteen directed triad classes, `M1..M16` in this order.
///
/// Names follow the mutual/asymmetric/null dyad counts with a D(own)/U(p)/C(yclic)/T(ransitive)
/// suffix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TriadClass {
    T003,
    T012,
    T102,
    T021D,
    T021U,
    T021C,
    T111D,
    T111U,
    T030T,
    T030C,
    T201,
    T120D,
    T120U,
    T120C,
    T210,
    T300,
}

impl TriadClass {
    pub const ALL: [TriadClass; 16] = [
        TriadClass::T003,
        TriadClass::T012,
        TriadClass::T102,
        TriadClass::T021D,
        TriadClass::T021U,
        TriadClass::T021C,
        TriadClass::T111D,
        TriadClass::T111U,
        TriadClass::T030T,
        TriadClass::T030C,
        TriadClass::T201,
        TriadClass::T120D,
        TriadClass::T120U,
        TriadClass::T120C,
        TriadClass::T210,
        TriadClass::T300,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            TriadClass::T003 => "003",
            TriadClass::T012 => "012",
            TriadClass::T102 => "102",
            TriadClass::T021D => "021D",
            TriadClass::T021U => "021U",
            TriadClass::T021C => "021C",
            TriadClass::T111D => "111D",
            TriadClass::T111U => "111U",
            TriadClass::T030T => "030T",
            TriadClass::T030C => "030C",
            TriadClass::T201 => "201",
            TriadClass::T120D => "120D",
            TriadClass::T120U => "120U",
            TriadClass::T120C => "120C",
            TriadClass::T210 => "210",
            TriadClass::T300 => "300",
        }
    }

    /// A representative arc list on vertices {0, 1, 2}.
    pub fn canonical_arcs(self) -> &'static [(usize, usize)] {
        match self {
            TriadClass::T003 => &[],
            TriadClass::T012 => &[(0, 1)],
            TriadClass::T102 => &[(0, 1), (1, 0)],
            TriadClass::T021D => &[(0, 1), (0, 2)],
            TriadClass::T021U => &[(1, 0), (2, 0)],
            TriadClass::T021C => &[(0, 1), (1, 2)],
            TriadClass::T111D => &[(0, 1), (1, 0), (2, 1)],
            TriadClass::T111U => &[(0, 1), (1, 0), (1, 2)],
            TriadClass::T030T => &[(0, 1), (0, 2), (1, 2)],
            TriadClass::T030C => &[(0, 1), (1, 2), (2, 0)],
            TriadClass::T201 => &[(0, 1), (1, 0), (1, 2), (2, 1)],
            TriadClass::T120D => &[(0, 1), (0, 2), (1, 2), (2, 1)],
            TriadClass::T120U => &[(1, 0), (1, 2), (2, 0), (2, 1)],
            TriadClass::T120C => &[(0, 1), (0, 2), (1, 2), (2, 0)],
            TriadClass::T210 => &[(0, 1), (0, 2), (1, 0), (1, 2), (2, 1)],
            TriadClass::T300 => &[(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)],
        }
    }

    /// Number of vertex pairs joined by at least one arc.
    pub fn connected_pairs(self) -> usize {
        let arcs = self.canonical_arcs();
        [(0, 1), (0, 2), (1, 2)]
            .iter()
            .filter(|&&(a, b)| arcs.contains(&(a, b)) || arcs.contains(&(b, a)))
            .count()
    }

    pub fn is_connected(self) -> bool {
        self.connected_pairs() >= 2
    }
}

/// Markdown reference table of the catalog, as shipped in `docs/motifs.md`.
pub fn catalog_table() -> String {
    let mut out = String::from("| Motif | Class | Arcs on {0,1,2} |\n|---|---|---|\n");
    for (i, class) in TriadClass::ALL.iter().enumerate() {
        let arcs: Vec<String> = class.canonical_arcs().iter().map(|(a, b)| format!("{a}→{b}")).collect();
        let arcs = if arcs.is_empty() { "(none)".to_string() } else { arcs.join(", ") };
        writeln!(out, "| M{} | {} | {} |", i + 1, class.name(), arcs).unwrap();
    }
    out
}

use super::{Digraph, LocalFeature, MotifError, TriadClass};

pub const BRUTE_FORCE_MAX_VERTICES: usize = 64;

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn code(arcs: impl Iterator<Item = (usize, usize)>) -> u16 {
    arcs.fold(0u16, |acc, (a, b)| acc | 1 << (a * 3 + b))
}

/// Smallest arc code over all relabelings of {0,1,2}.
fn canonical(arcs: &[(usize, usize)]) -> u16 {
    PERMS.iter().map(|p| code(arcs.iter().map(|&(a, b)| (p[a], p[b])))).min().expect("six permutations")
}

fn class_table() -> [Option<TriadClass>; 512] {
    let mut table = [None; 512];
    for class in TriadClass::ALL {
        table[canonical(class.canonical_arcs()) as usize] = Some(class);
    }
    table
}

/// Class of the subgraph induced on `(a, b, c)` by `has_arc`.
pub fn classify_triple(has_arc: impl Fn(usize, usize) -> bool, a: usize, b: usize, c: usize) -> TriadClass {
    let verts = [a, b, c];
    let mut arcs = Vec::with_capacity(6);
    for i in 0..3 {
        for j in 0..3 {
            if i != j && has_arc(verts[i], verts[j]) {
                arcs.push((i, j));
            }
        }
    }
    thread_local! {
        static TABLE: [Option<TriadClass>; 512] = class_table();
    }
    let key = canonical(&arcs) as usize;
    TABLE.with(|t| t[key]).expect("every three-vertex digraph has a class")
}

/// Classifies every vertex triple directly. Exponential blowup is avoided by the size guard.
pub fn triad_census_bruteforce(g: &Digraph) -> Result<LocalFeature, MotifError> {
    let n = g.vertex_count();
    if n > BRUTE_FORCE_MAX_VERTICES {
        return Err(MotifError::GraphTooLarge { got: n, max: BRUTE_FORCE_MAX_VERTICES });
    }
    g.validate()?;
    let mut rows = vec![0u64; n];
    for &(a, b) in g.arcs() {
        rows[a] |= 1 << b;
    }
    let has_arc = |a: usize, b: usize| rows[a] >> b & 1 == 1;
    let mut out = LocalFeature::default();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                out.counts[classify_triple(has_arc, a, b, c).index()] += 1;
            }
        }
    }
    Ok(out)
}

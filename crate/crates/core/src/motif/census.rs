use super::{choose3, Digraph, LocalFeature, MotifError, TriadClass};

/// Sorted neighbor lists of the decomposition A = B + U, B = A ∧ Aᵀ.
struct Parts {
    /// Unidirectional out-neighbors (rows of U).
    u_out: Vec<Vec<usize>>,
    /// Unidirectional in-neighbors (rows of Uᵀ).
    u_in: Vec<Vec<usize>>,
    /// Bidirectional neighbors (rows of B).
    b: Vec<Vec<usize>>,
}

impl Parts {
    fn new(g: &Digraph) -> Self {
        let n = g.vertex_count();
        let mut out = vec![Vec::new(); n];
        for &(a, c) in g.arcs() {
            out[a].push(c);
        }
        for row in &mut out {
            row.sort_unstable();
        }
        let has = |a: usize, c: usize| out[a].binary_search(&c).is_ok();
        let mut u_out = vec![Vec::new(); n];
        let mut u_in = vec![Vec::new(); n];
        let mut b = vec![Vec::new(); n];
        for a in 0..n {
            for &c in &out[a] {
                if has(c, a) {
                    b[a].push(c);
                } else {
                    u_out[a].push(c);
                    u_in[c].push(a);
                }
            }
        }
        for row in &mut u_in {
            row.sort_unstable();
        }
        Self { u_out, u_in, b }
    }
}

fn intersect(a: &[usize], b: &[usize]) -> u64 {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Entries `(XY)_ik` of the six products used by the census, for one ordered pair.
#[derive(Default, Clone, Copy)]
struct Products {
    uu: u64,
    uut: u64,
    utu: u64,
    bb: u64,
    bu: u64,
    but: u64,
}

impl std::ops::AddAssign for Products {
    fn add_assign(&mut self, o: Self) {
        self.uu += o.uu;
        self.uut += o.uut;
        self.utu += o.utu;
        self.bb += o.bb;
        self.bu += o.bu;
        self.but += o.but;
    }
}

fn exact_div(total: u64, by: u64) -> u64 {
    debug_assert_eq!(total % by, 0, "census term {total} not divisible by {by}");
    total / by
}

/// Triad census via adjacency-product entries.
///
/// Closed triads are read off `(XY) ⊙ Z` with `X, Y, Z ∈ {B, U, Uᵀ}`; open triads are the
/// full wedge sums minus trace and closed parts; the one-dyad and empty classes follow by
/// inclusion–exclusion against `|U|(n-2)`, `|M|(n-2)` and `C(n, 3)`.
pub fn motif_census_matrix(g: &Digraph) -> Result<LocalFeature, MotifError> {
    g.validate()?;
    let n = g.vertex_count();
    let p = Parts::new(g);

    // closed sums over ordered pairs (i, k) joined by any arc
    let mut closed = Products::default();
    let (mut t300, mut t210, mut t120d, mut t120u, mut t120c, mut t030t, mut t030c) = (0u64, 0, 0, 0, 0, 0, 0);
    for i in 0..n {
        let pairs = p.u_out[i]
            .iter()
            .map(|&k| (k, 'u'))
            .chain(p.u_in[i].iter().map(|&k| (k, 't')))
            .chain(p.b[i].iter().map(|&k| (k, 'b')));
        for (k, kind) in pairs {
            let e = Products {
                uu: intersect(&p.u_out[i], &p.u_in[k]),
                uut: intersect(&p.u_out[i], &p.u_out[k]),
                utu: intersect(&p.u_in[i], &p.u_in[k]),
                bb: intersect(&p.b[i], &p.b[k]),
                bu: intersect(&p.b[i], &p.u_in[k]),
                but: intersect(&p.b[i], &p.u_out[k]),
            };
            closed += e;
            match kind {
                'b' => {
                    t300 += e.bb;
                    t120u += e.uut;
                    t120d += e.utu;
                    t120c += e.uu;
                }
                'u' => {
                    t210 += e.bb;
                    t030t += e.uu;
                }
                _ => t030c += e.uu,
            }
        }
    }
    let t300 = exact_div(t300, 6);
    let t120u = exact_div(t120u, 2);
    let t120d = exact_div(t120d, 2);
    let t030c = exact_div(t030c, 3);

    // all wedges: sum_ik (XY)_ik = sum_j colsum_X(j) * rowsum_Y(j)
    let mut total = Products::default();
    for j in 0..n {
        let (ind, outd, bd) = (p.u_in[j].len() as u64, p.u_out[j].len() as u64, p.b[j].len() as u64);
        total += Products { uu: ind * outd, uut: ind * ind, utu: outd * outd, bb: bd * bd, bu: bd * outd, but: bd * ind };
    }
    let asym: u64 = p.u_out.iter().map(|r| r.len() as u64).sum();
    let mutual_ordered: u64 = p.b.iter().map(|r| r.len() as u64).sum();
    let mutual = mutual_ordered / 2;
    // diagonal entries: (UUᵀ)_ii = (UᵀU)_ii summed = |U|, (BB)_ii summed = 2|M|
    let open = Products {
        uu: total.uu - closed.uu,
        uut: total.uut - asym - closed.uut,
        utu: total.utu - asym - closed.utu,
        bb: total.bb - mutual_ordered - closed.bb,
        bu: total.bu - closed.bu,
        but: total.but - closed.but,
    };
    let t021c = open.uu;
    let t021u = exact_div(open.uut, 2);
    let t021d = exact_div(open.utu, 2);
    let t201 = exact_div(open.bb, 2);
    let t111u = open.bu;
    let t111d = open.but;

    let rest = n.saturating_sub(2) as u64;
    let t012 = asym * rest
        - (2 * (t021d + t021u + t021c) + t111d + t111u + 3 * (t030t + t030c) + 2 * (t120d + t120u + t120c) + t210);
    let t102 = mutual * rest - (2 * t201 + t111d + t111u + t120d + t120u + t120c + 2 * t210 + 3 * t300);

    let mut counts = [0u64; 16];
    for (class, value) in [
        (TriadClass::T012, t012),
        (TriadClass::T102, t102),
        (TriadClass::T021D, t021d),
        (TriadClass::T021U, t021u),
        (TriadClass::T021C, t021c),
        (TriadClass::T111D, t111d),
        (TriadClass::T111U, t111u),
        (TriadClass::T030T, t030t),
        (TriadClass::T030C, t030c),
        (TriadClass::T201, t201),
        (TriadClass::T120D, t120d),
        (TriadClass::T120U, t120u),
        (TriadClass::T120C, t120c),
        (TriadClass::T210, t210),
        (TriadClass::T300, t300),
    ] {
        counts[class.index()] = value;
    }
    let nonempty: u64 = counts.iter().sum();
    counts[TriadClass::T003.index()] = choose3(n) - nonempty;
    Ok(LocalFeature { counts })
}

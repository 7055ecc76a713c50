//! The twisting differential, per graph and as sparse matrices between graded
//! bases.
//!
//! All three parts are gluing surgeries against the two smallest graphs: the
//! one-edge white-black graph (boundary pendant insertions and white-vertex
//! splittings) and the one-edge all-black graph (black-vertex splittings).
//! Orientations concatenate outer-first. The paper-level prefactors are
//! +1, -(-1)^{|G|} and -(-1)^{|G|}/2; the half on the black splitting cancels
//! the two orderings of each unordered split.

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::basis::{enumerate, enumerate_full, EnumLimits, GradedBasis};
use crate::canonical::{FormalSum, Signature};
use crate::linalg::{IntMatrix, ScalarPolicy};
use crate::ribbon::{build, RibbonGraph};
use crate::surgery::{compose_one, glue, GluePoint, OrbitSource};
use crate::{CoreError, Result};

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Raw differential terms: every glued outcome with its doubled integer
/// coefficient (so the black-splitting half stays integral). Shared by the
/// formal-sum and matrix paths.
fn d_twist_raw(
    g: &RibbonGraph,
    trivalent_only: bool,
    mut emit: impl FnMut(RibbonGraph, i64),
) -> Result<()> {
    let parity = if g.degree().rem_euclid(2) == 0 { 1i64 } else { -1 };
    let pendant = build::white_black_edge(g.d);

    // (i) a univalent black vertex at every corner of every boundary walk.
    // In the trivalent regime these cancel identically against the empty and
    // near-empty splittings below, so they are skipped along with those.
    if !trivalent_only {
        for i in 0..g.m() {
            for (term, dsign) in compose_one(&pendant, 0, g, i)? {
                emit(term, 2 * dsign as i64);
            }
        }
    }

    // (ii) split each white vertex, new black joined by a new edge. The
    // pendant's boundary walk is (white slot, black slot); in the trivalent
    // regime only splittings leaving the new black at least trivalent survive.
    for j in 0..g.n() {
        let minima = if trivalent_only { vec![0, 2] } else { vec![] };
        let glued = glue(g, &pendant, &[GluePoint {
            outer_vertex: g.white[j],
            inner_boundary: pendant.boundary[0],
            slot_minima: minima,
        }])?;
        let shift = g.num_half_edges();
        for gl in glued {
            let mut term = gl.graph;
            let mut white = g.white.clone();
            white[j] = shift + pendant.white[0];
            term.white = white;
            let mut boundary = vec![usize::MAX; g.m()];
            for (oi, src) in gl.orbit_sources.iter().enumerate() {
                match src {
                    OrbitSource::Outer(lbl) => boundary[*lbl] = gl.orbits[oi][0],
                    OrbitSource::Inner(_) => unreachable!("pendant boundary is consumed"),
                }
            }
            term.boundary = boundary;
            emit(term, -2 * parity * gl.sign as i64);
        }
    }

    // (iii) split each black vertex; ordered splittings carry the paper's 1/2
    let edge_graph = build::from_rotations(g.d, &[vec![0], vec![1]], &[(0, 1)], &[], &[0]);
    for v in g.black_reps() {
        let minima = if trivalent_only { vec![2, 2] } else { vec![] };
        let glued = glue(g, &edge_graph, &[GluePoint {
            outer_vertex: v,
            inner_boundary: edge_graph.boundary[0],
            slot_minima: minima,
        }])?;
        for gl in glued {
            let mut term = gl.graph;
            term.white = g.white.clone();
            let mut boundary = vec![usize::MAX; g.m()];
            for (oi, src) in gl.orbit_sources.iter().enumerate() {
                match src {
                    OrbitSource::Outer(lbl) => boundary[*lbl] = gl.orbits[oi][0],
                    OrbitSource::Inner(_) => unreachable!("edge graph boundary is consumed"),
                }
            }
            term.boundary = boundary;
            emit(term, -parity * gl.sign as i64);
        }
    }
    Ok(())
}

/// The twisting differential of a single graph, as a formal sum one degree up.
pub fn d_twist(g: &RibbonGraph) -> Result<FormalSum> {
    let report = g.validate();
    if !report.is_valid() {
        return Err(CoreError::InvalidGraph(report.violations.join("; ")));
    }
    let sig = Signature::of(g)?;
    let target = sig.shifted(sig.degree + 1);
    let mut acc: BTreeMap<crate::canonical::CanonicalKey, i64> = BTreeMap::new();
    d_twist_raw(g, false, |term, doubled| {
        let form = crate::canonical::canonicalize_unchecked(&term);
        if form.is_zero {
            return;
        }
        let v = doubled * form.sign as i64;
        let e = acc.entry(form.key).or_insert(0);
        *e += v;
        if *e == 0 {
            // leave zero entries; pruned below
        }
    })?;
    let mut out = FormalSum::empty_of(target);
    for (key, doubled) in acc {
        if doubled != 0 {
            debug_assert!(doubled % 2 == 0, "black-splitting halves must pair up");
            out.add_key(key, ratio(doubled, 2), target)?;
        }
    }
    Ok(out)
}

/// Differential of a whole sum.
pub fn d_twist_sum(s: &FormalSum) -> Result<FormalSum> {
    s.flat_map(|g| d_twist(g))
}

/// Sparse matrix of the differential between two graded bases: column j holds
/// d of source graph j expressed in the target basis.
#[derive(Clone, Debug)]
pub struct DifferentialMatrix {
    pub source: Signature,
    pub target: Signature,
    pub matrix: IntMatrix,
    pub source_count: usize,
    pub target_count: usize,
}

pub fn assemble(source: &GradedBasis, target: &GradedBasis) -> Result<DifferentialMatrix> {
    let s = source.sig;
    let t = target.sig;
    if (s.d, s.m, s.n, s.genus) != (t.d, t.m, t.n, t.genus) || t.degree != s.degree + 1 {
        return Err(CoreError::SignatureMismatch(format!(
            "cannot assemble {s} -> {t}"
        )));
    }
    // only the net sub-properad terms when both sides live in the regime
    let trivalent = source.regime_trivalent && target.regime_trivalent;
    let columns: Vec<Vec<(usize, i64)>> = source
        .keys
        .par_iter()
        .map(|key| -> Result<Vec<(usize, i64)>> {
            let g = crate::canonical::decode(key)?;
            // accumulate per canonical key so cancelling terms (the univalent
            // and bivalent black creations) disappear before the membership check
            let mut acc: BTreeMap<crate::canonical::CanonicalKey, i64> = BTreeMap::new();
            d_twist_raw(&g, trivalent, |term, doubled| {
                let form = crate::canonical::canonicalize_unchecked(&term);
                if form.is_zero {
                    return;
                }
                *acc.entry(form.key).or_insert(0) += doubled * form.sign as i64;
            })?;
            let mut col = Vec::new();
            for (k, v) in acc {
                if v == 0 {
                    continue;
                }
                debug_assert!(v % 2 == 0);
                match target.index_of(&k) {
                    Some(row) => col.push((row, v / 2)),
                    None => {
                        return Err(CoreError::MissingTarget(format!(
                            "image term of a {s} basis graph missing from {t} basis"
                        )))
                    }
                }
            }
            Ok(col)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut matrix = IntMatrix::new(target.len(), source.len());
    for (j, col) in columns.into_iter().enumerate() {
        for (row, v) in col {
            matrix.push(row, j, v);
        }
    }
    Ok(DifferentialMatrix {
        source: s,
        target: t,
        matrix,
        source_count: source.len(),
        target_count: target.len(),
    })
}

/// Serialization of a differential matrix: a header binding the two bases
/// (their signatures and counts), then one `row col numerator denominator`
/// line per entry. Bit-exact round trip.
#[derive(Serialize, Deserialize)]
struct MatrixHeader {
    source: Signature,
    target: Signature,
    rows: usize,
    cols: usize,
    nnz: usize,
}

impl DifferentialMatrix {
    pub fn to_triplet_text(&self) -> String {
        let header = MatrixHeader {
            source: self.source,
            target: self.target,
            rows: self.matrix.rows,
            cols: self.matrix.cols,
            nnz: self.matrix.nnz(),
        };
        let mut out = serde_json::to_string(&header).unwrap();
        out.push('\n');
        let mut entries = self.matrix.entries.clone();
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        for (r, c, v) in entries {
            out.push_str(&format!("{} {} {} 1\n", r, c, v));
        }
        out
    }

    pub fn from_triplet_text(text: &str) -> Result<DifferentialMatrix> {
        let mut lines = text.lines();
        let header: MatrixHeader = serde_json::from_str(
            lines.next().ok_or_else(|| CoreError::Decode("empty matrix file".into()))?,
        )
        .map_err(|e| CoreError::Decode(e.to_string()))?;
        let mut matrix = IntMatrix::new(header.rows, header.cols);
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let mut next = || -> Result<String> {
                it.next()
                    .map(str::to_string)
                    .ok_or_else(|| CoreError::Decode(format!("bad triplet line: {line}")))
            };
            let r: usize = next()?.parse().map_err(|_| CoreError::Decode("bad row".into()))?;
            let c: usize = next()?.parse().map_err(|_| CoreError::Decode("bad col".into()))?;
            let num: i64 = next()?.parse().map_err(|_| CoreError::Decode("bad numer".into()))?;
            let den: i64 = next()?.parse().map_err(|_| CoreError::Decode("bad denom".into()))?;
            if den != 1 {
                return Err(CoreError::Decode("differential entries are integral".into()));
            }
            matrix.push(r, c, num);
        }
        if matrix.nnz() != header.nnz {
            return Err(CoreError::Decode("entry count mismatch".into()));
        }
        Ok(DifferentialMatrix {
            source: header.source,
            target: header.target,
            source_count: header.cols,
            target_count: header.rows,
            matrix,
        })
    }
}

/// Top edge count of the trivalent-regime complex: E <= 6g - 6 + 3m + 2n.
pub fn trivalent_max_edges(m: usize, n: usize, genus: usize) -> i64 {
    6 * genus as i64 - 6 + 3 * m as i64 + 2 * n as i64
}

/// Bases for every degree of the (m,n;g) complex at parameter d. In the
/// trivalent regime the complex is finite; the full complex is truncated by
/// the half-edge cap (the returned flag lists uncertifiable degrees).
pub fn graded_bases(
    d: i64,
    m: usize,
    n: usize,
    genus: usize,
    trivalent: bool,
    limits: &EnumLimits,
) -> Result<BTreeMap<i64, GradedBasis>> {
    let shift = d * (2 * genus as i64 - 2 + m as i64 + n as i64);
    let e_max = if trivalent {
        trivalent_max_edges(m, n, genus).min(limits.max_half_edges as i64 / 2)
    } else {
        limits.max_half_edges as i64 / 2
    };
    let mut out = BTreeMap::new();
    for e in 0..=e_max.max(0) {
        let degree = e - shift;
        let sig = Signature { d, m, n, genus, degree };
        let basis = if trivalent { enumerate(&sig, limits)? } else { enumerate_full(&sig, limits)? };
        out.insert(degree, basis);
    }
    Ok(out)
}

/// Full cohomology table for one (d, m, n, g) family.
pub fn cohomology_table(
    d: i64,
    m: usize,
    n: usize,
    genus: usize,
    trivalent: bool,
    limits: &EnumLimits,
    policy: &ScalarPolicy,
) -> Result<crate::linalg::CohomologyTable> {
    let bases = graded_bases(d, m, n, genus, trivalent, limits)?;
    let mut dims = BTreeMap::new();
    let mut basis_dims = BTreeMap::new();
    let mut verified = BTreeMap::new();
    let mut gaps = Vec::new();
    let degrees: Vec<i64> = bases.keys().copied().collect();
    let mut ranks: BTreeMap<i64, (usize, String)> = BTreeMap::new();
    for &k in &degrees {
        let src = &bases[&k];
        basis_dims.insert(k, src.len());
        if src.is_empty() {
            ranks.insert(k, (0, "empty".into()));
            continue;
        }
        match bases.get(&(k + 1)) {
            Some(tgt) => {
                let dm = assemble(src, tgt)?;
                ranks.insert(k, dm.matrix.rank_verified(policy)?);
            }
            None => {
                // top of the truncation: rank unknown unless the complex ends
                if trivalent {
                    ranks.insert(k, (0, "top".into()));
                } else {
                    gaps.push(k);
                }
            }
        }
    }
    for &k in &degrees {
        let dim_k = bases[&k].len();
        let rank_k = match ranks.get(&k) {
            Some((r, _)) => *r,
            None => {
                gaps.push(k);
                continue;
            }
        };
        let rank_prev = degrees
            .iter()
            .find(|&&p| p == k - 1)
            .and_then(|p| ranks.get(p))
            .map(|(r, _)| *r)
            .unwrap_or(0);
        if gaps.contains(&k) {
            continue;
        }
        let h = dim_k - rank_k - rank_prev;
        dims.insert(k, h);
        let how = ranks.get(&k).map(|(_, s)| s.clone()).unwrap_or_default();
        verified.insert(k, how);
    }
    gaps.sort_unstable();
    gaps.dedup();
    Ok(crate::linalg::CohomologyTable {
        d,
        m,
        n,
        genus,
        dims,
        basis_dims,
        scalar_domain: if policy.certify_rational { "Q".into() } else { "Z/p".into() },
        verified,
        trivalent_regime: trivalent,
        gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::canonicalize;
    use crate::ribbon::Orientation;
    use num_traits::One;

    fn one() -> BigRational {
        <BigRational as One>::one()
    }

    #[test]
    fn bracket_is_a_cocycle() {
        let g = build::bracket_graph(0);
        let d = d_twist(&g).unwrap();
        assert!(d.is_zero(), "white-white edge must be closed, got {} terms", d.len());
    }

    #[test]
    fn white_loop_differential_is_two_loop_stems() {
        // d(loop at white 1) = loop-stem(a) + loop-stem(b), both labellings,
        // both with coefficient +1 in the orientation where the new edge
        // comes last.
        let g = build::white_loop(0, false);
        let d = d_twist(&g).unwrap();
        assert_eq!(d.len(), 2, "expected exactly the two loop-stem classes");
        let mut expected = FormalSum::zero();
        for swap in [false, true] {
            let mut ls = build::loop_stem(0, swap);
            // loop edge first, stem edge last: edge ids are 0 (stem) and 1 (loop)
            ls.orientation = Orientation::Even { edges: vec![1, 0] };
            expected.add_graph(&ls, &one()).unwrap();
        }
        assert_eq!(d, expected);
    }

    #[test]
    fn white_black_edge_closed_after_cancellation() {
        // all three parts act; univalent/bivalent creations must cancel down
        // to the surviving terms and d^2 = 0 on it
        let g = build::white_black_edge(0);
        let d1 = d_twist(&g).unwrap();
        let d2 = d_twist_sum(&d1).unwrap();
        assert!(d2.is_zero(), "d^2 != 0: {} terms", d2.len());
    }

    #[test]
    fn d_squared_zero_on_small_graphs() {
        for g in [
            build::white_loop(0, false),
            build::loop_stem(0, false),
            build::loop_stem(0, true),
            build::theta(0, [0, 1, 2]),
            build::bracket_graph(0),
            build::white_black_edge(0),
        ] {
            let d1 = d_twist(&g).unwrap();
            let d2 = d_twist_sum(&d1).unwrap();
            assert!(d2.is_zero(), "d^2 != 0 on {:?}: {} terms", g, d2.len());
        }
    }

    #[test]
    fn d_squared_zero_odd_parameter() {
        for g in [
            build::white_loop(1, false),
            build::loop_stem(1, false),
            build::theta(1, [0, 1, 2]),
            build::theta(3, [0, 1, 2]),
            build::bracket_graph(3),
        ] {
            let d1 = d_twist(&g).unwrap();
            let d2 = d_twist_sum(&d1).unwrap();
            assert!(d2.is_zero(), "d^2 != 0 (odd d) on {:?}: {} terms", g, d2.len());
        }
    }

    #[test]
    fn trivalent_closure() {
        // d of a >=3-regime graph stays in the regime after cancellation
        for g in [build::loop_stem(0, false), build::theta(0, [0, 1, 2])] {
            assert!(g.in_trivalent_regime());
            let d = d_twist(&g).unwrap();
            for (key, _) in d.terms() {
                let rep = crate::canonical::decode(key).unwrap();
                assert!(
                    rep.in_trivalent_regime(),
                    "differential left the trivalent regime"
                );
            }
        }
    }

    #[test]
    fn equivariance_under_boundary_relabelling() {
        let g = build::loop_stem(0, false);
        let d_then_swap = d_twist(&g).unwrap().permute_boundary_labels(&[1, 0]).unwrap();
        let swap_then_d = d_twist_sum(
            &FormalSum::singleton(&g.permute_boundary_labels(&[1, 0]), one()).unwrap(),
        )
        .unwrap();
        assert_eq!(d_then_swap, swap_then_d);
    }

    #[test]
    fn degree_raised_by_one() {
        let g = build::loop_stem(0, false);
        let d = d_twist(&g).unwrap();
        let sig = d.signature().unwrap();
        assert_eq!(sig.degree, g.degree() + 1);
        assert_eq!(sig.m, 2);
        assert_eq!(sig.n, 1);
        assert_eq!(sig.genus, 0);
    }

    #[test]
    fn matrix_round_trip() {
        let g = build::white_loop(0, false);
        let d = d_twist(&g).unwrap();
        let sig_src = Signature::of(&g).unwrap();
        let sig_tgt = d.signature().unwrap();
        let src = GradedBasis::from_graphs(sig_src, vec![g.clone()]).unwrap();
        let tgt_reps: Vec<RibbonGraph> = d
            .reps()
            .unwrap()
            .into_iter()
            .map(|(rep, _)| rep)
            .collect();
        let tgt = GradedBasis::from_graphs(sig_tgt, tgt_reps).unwrap();
        let dm = assemble(&src, &tgt).unwrap();
        let text = dm.to_triplet_text();
        let back = DifferentialMatrix::from_triplet_text(&text).unwrap();
        assert_eq!(back.to_triplet_text(), text);
        assert_eq!(back.matrix, dm.matrix);
    }

    #[test]
    fn restricted_assembly_matches_full() {
        // the trivalent-regime shortcut must produce the same matrix as the
        // full term set followed by cancellation
        use crate::basis::enumerate;
        for (m, n, genus, degree) in [(2usize, 1usize, 0usize, 2i64), (3, 0, 0, 2), (1, 3, 0, 2), (2, 0, 1, 3)] {
            let sig = Signature { d: 0, m, n, genus, degree };
            let src_b = enumerate(&sig, &crate::basis::EnumLimits::default()).unwrap();
            let tgt_b = enumerate(&sig.shifted(degree + 1), &crate::basis::EnumLimits::default()).unwrap();
            if src_b.is_empty() {
                continue;
            }
            let fast = assemble(&src_b, &tgt_b).unwrap();
            let mut slow_src = src_b.clone();
            let mut slow_tgt = tgt_b.clone();
            slow_src.regime_trivalent = false;
            slow_tgt.regime_trivalent = false;
            let slow = assemble(&slow_src, &slow_tgt).unwrap();
            let mut a = fast.matrix.entries.clone();
            let mut b = slow.matrix.entries.clone();
            a.sort_unstable();
            b.sort_unstable();
            assert_eq!(a, b, "restricted and full assembly differ at {sig}");
        }
    }

    #[test]
    fn differential_keys_are_canonical() {
        let g = build::theta(0, [0, 1, 2]);
        let d = d_twist(&g).unwrap();
        for (key, _) in d.terms() {
            let rep = crate::canonical::decode(key).unwrap();
            let form = canonicalize(&rep).unwrap();
            assert_eq!(&form.key, key);
            assert_eq!(form.sign, 1);
        }
    }
}

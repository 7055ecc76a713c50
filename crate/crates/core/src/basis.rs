//! Exhaustive enumeration of canonical basis graphs per signature.
//!
//! Strategy: fix the valence data (an ordered tuple for the labelled white
//! vertices, a descending multiset for the black ones), lay half-edges out as
//! consecutive blocks with the standard rotation per vertex, and enumerate the
//! pairing `tau` by backtracking. Rotation symmetry is spent by forcing the
//! first touch of a fresh vertex onto its first dart, and identical black
//! vertices are used in index order; residual duplicates are removed by the
//! canonical form. Boundary labels are distributed afterwards.

use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};

use crate::canonical::{canonicalize_unchecked, CanonicalKey, Signature};
use crate::ribbon::{Orientation, RibbonGraph};
use crate::{CoreError, Result};

/// Explicit resource caps. `max_half_edges` bounds 2E.
#[derive(Clone, Copy, Debug)]
pub struct EnumLimits {
    pub max_half_edges: usize,
    pub max_basis: usize,
}

impl Default for EnumLimits {
    fn default() -> Self {
        EnumLimits { max_half_edges: 48, max_basis: 4_000_000 }
    }
}

/// The canonical generators of one signature, in canonical-encoding order.
/// Only the sorted keys are stored; representatives decode on demand.
#[derive(Clone, Debug)]
pub struct GradedBasis {
    pub sig: Signature,
    pub keys: Vec<CanonicalKey>,
    /// True when this is a valence->=3-regime basis (lets the differential
    /// assembly drop the identically-cancelling sub-trivalent terms).
    pub regime_trivalent: bool,
}

impl GradedBasis {
    pub fn empty(sig: Signature) -> GradedBasis {
        GradedBasis { sig, keys: vec![], regime_trivalent: false }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn index_of(&self, key: &CanonicalKey) -> Option<usize> {
        self.keys.binary_search(key).ok()
    }

    /// Canonical representative of basis element `i` (canonical orientation,
    /// sign +1).
    pub fn rep(&self, i: usize) -> RibbonGraph {
        crate::canonical::decode(&self.keys[i]).expect("canonical key decodes")
    }

    pub fn reps(&self) -> impl Iterator<Item = RibbonGraph> + '_ {
        self.keys.iter().map(|k| crate::canonical::decode(k).expect("canonical key decodes"))
    }

    /// Build a basis from explicit graphs (dedups, drops zero graphs, sorts).
    pub fn from_graphs(sig: Signature, graphs: Vec<RibbonGraph>) -> Result<GradedBasis> {
        let mut keys = BTreeSet::new();
        for g in graphs {
            if Signature::of(&g)? != sig {
                return Err(CoreError::SignatureMismatch(format!(
                    "graph signature {} differs from basis {sig}",
                    Signature::of(&g)?
                )));
            }
            let form = canonicalize_unchecked(&g);
            if !form.is_zero {
                keys.insert(form.key);
            }
        }
        Ok(GradedBasis { sig, keys: keys.into_iter().collect(), regime_trivalent: false })
    }

    /// Serialize as JSON lines (one graph per line) prefixed by a manifest.
    pub fn to_jsonl(&self) -> String {
        let manifest = serde_json::json!({
            "signature": self.sig,
            "count": self.len(),
            "trivalent": self.regime_trivalent,
        });
        let mut out = manifest.to_string();
        out.push('\n');
        for rep in self.reps() {
            out.push_str(&serde_json::to_string(&rep).unwrap());
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<GradedBasis> {
        let mut lines = text.lines();
        let manifest: serde_json::Value = serde_json::from_str(
            lines.next().ok_or_else(|| CoreError::Decode("empty basis file".into()))?,
        )
        .map_err(|e| CoreError::Decode(e.to_string()))?;
        let sig: Signature = serde_json::from_value(manifest["signature"].clone())
            .map_err(|e| CoreError::Decode(e.to_string()))?;
        let mut graphs = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let g: RibbonGraph =
                serde_json::from_str(line).map_err(|e| CoreError::Decode(e.to_string()))?;
            graphs.push(g);
        }
        let mut basis = GradedBasis::from_graphs(sig, graphs)?;
        basis.regime_trivalent = manifest["trivalent"].as_bool().unwrap_or(false);
        let count = manifest["count"].as_u64().unwrap_or(0) as usize;
        if basis.len() != count {
            return Err(CoreError::Decode(format!(
                "basis manifest says {count} graphs, file holds {}",
                basis.len()
            )));
        }
        Ok(basis)
    }
}

/// Counts implied by a signature, or None when no graph can exist.
fn frame(sig: &Signature, black_min: usize) -> Option<(usize, usize, usize)> {
    let e = sig.num_edges()?;
    if e == 0 {
        return None; // every vertex needs a half-edge and m >= 1 needs an edge
    }
    let v = sig.num_vertices()?;
    if v < sig.n {
        return None;
    }
    let black = v - sig.n;
    if 2 * e < black_min * black + sig.n {
        return None;
    }
    if sig.m == 0 {
        return None;
    }
    Some((e, v, black))
}

/// Descending partitions of `total` into `count` parts within [lo, hi].
fn partitions_desc(total: usize, count: usize, lo: usize, hi: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(total: usize, count: usize, lo: usize, hi: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if count == 0 {
            if total == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let max = hi.min(total);
        if max * count < total || lo * count > total {
            return;
        }
        for part in (lo..=max).rev() {
            cur.push(part);
            rec(total - part, count - 1, lo, part, cur, out);
            cur.pop();
        }
    }
    rec(total, count, lo, hi, &mut Vec::new(), out);
}

/// Ordered tuples of `count` white valences >= 1 summing to `total`.
fn compositions_min1(total: usize, count: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(total: usize, count: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if count == 0 {
            if total == 0 {
                out.push(cur.clone());
            }
            return;
        }
        if total < count {
            return;
        }
        for part in 1..=(total - (count - 1)) {
            cur.push(part);
            rec(total - part, count - 1, cur, out);
            cur.pop();
        }
    }
    if count == 0 {
        if total == 0 {
            out.push(vec![]);
        }
        return;
    }
    rec(total, count, &mut Vec::new(), out);
}

struct Matcher<'a, F: FnMut(&[usize])> {
    start: Vec<usize>,
    vert_of: Vec<usize>,
    is_black: Vec<bool>,
    group: Vec<usize>, // equal-valence black group id; whites get unique ids
    partner: Vec<usize>,
    touched: Vec<usize>, // matched darts per vertex
    sink: &'a mut F,
}

impl<'a, F: FnMut(&[usize])> Matcher<'a, F> {
    fn run(&mut self) {
        let hn = self.partner.len();
        let u = match (0..hn).find(|&h| self.partner[h] == usize::MAX) {
            Some(u) => u,
            None => {
                (self.sink)(&self.partner.clone());
                return;
            }
        };
        for w in u + 1..hn {
            if self.partner[w] != usize::MAX {
                continue;
            }
            let v = self.vert_of[w];
            // matching into u's own vertex (a loop) is always allowed; the
            // fresh-vertex normalizations only apply across vertices
            let uv = self.vert_of[u];
            if v != uv && self.touched[v] == 0 {
                // rotation symmetry: first touch lands on the first dart
                if w != self.start[v] {
                    continue;
                }
                // identical blacks are brought in lowest-index first; u's own
                // vertex is pinned by u and never interchangeable
                if self.is_black[v] {
                    let first_fresh = (0..self.touched.len())
                        .find(|&x| {
                            x != uv && self.group[x] == self.group[v] && self.touched[x] == 0
                        })
                        .unwrap();
                    if v != first_fresh {
                        continue;
                    }
                }
            }
            self.partner[u] = w;
            self.partner[w] = u;
            self.touched[self.vert_of[u]] += 1;
            self.touched[v] += 1;
            self.run();
            self.touched[self.vert_of[u]] -= 1;
            self.touched[v] -= 1;
            self.partner[u] = usize::MAX;
            self.partner[w] = usize::MAX;
        }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    fn heap(k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(cur.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, cur, out);
            if k % 2 == 0 {
                cur.swap(i, k - 1);
            } else {
                cur.swap(0, k - 1);
            }
        }
    }
    heap(n, &mut cur, &mut out);
    out
}

fn enumerate_with_min(sig: &Signature, black_min: usize, limits: &EnumLimits) -> Result<GradedBasis> {
    let (e, _v, black) = match frame(sig, black_min) {
        Some(f) => f,
        None => return Ok(GradedBasis::empty(*sig)),
    };
    if 2 * e > limits.max_half_edges {
        return Err(CoreError::CapExceeded(format!(
            "2E = {} exceeds max_half_edges = {}",
            2 * e,
            limits.max_half_edges
        )));
    }

    // all (white tuple, black partition) valence frames
    let mut frames = Vec::new();
    let total = 2 * e;
    let mut whites = Vec::new();
    // white sums range so that blacks can be filled
    for wsum in sig.n..=total.saturating_sub(black_min * black) {
        whites.clear();
        compositions_min1(wsum, sig.n, &mut whites);
        let bsum = total - wsum;
        let mut blacks = Vec::new();
        partitions_desc(bsum, black, black_min, bsum.max(1), &mut blacks);
        if blacks.is_empty() && !(black == 0 && bsum == 0) {
            continue;
        }
        if black == 0 && bsum != 0 {
            continue;
        }
        for w in &whites {
            if black == 0 {
                frames.push((w.clone(), vec![]));
            } else {
                for b in &blacks {
                    frames.push((w.clone(), b.clone()));
                }
            }
        }
    }

    let label_perms = permutations(sig.m);
    let maps: Vec<BTreeMap<CanonicalKey, RibbonGraph>> = frames
        .par_iter()
        .map(|(wval, bval)| {
            let mut valences: Vec<(usize, bool)> =
                wval.iter().map(|&v| (v, false)).collect();
            valences.extend(bval.iter().map(|&v| (v, true)));
            let nv = valences.len();
            let mut start = Vec::with_capacity(nv);
            let mut vert_of = Vec::new();
            let mut at = 0usize;
            for (vi, &(val, _)) in valences.iter().enumerate() {
                start.push(at);
                for _ in 0..val {
                    vert_of.push(vi);
                }
                at += val;
            }
            let is_black: Vec<bool> = valences.iter().map(|&(_, b)| b).collect();
            // group ids: whites unique; blacks grouped by valence
            let mut group = vec![0usize; nv];
            for (vi, &(val, b)) in valences.iter().enumerate() {
                group[vi] = if b {
                    // group by valence, offset past white ids
                    nv + val
                } else {
                    vi
                };
            }
            let hn = 2 * e;
            let sigma: Vec<usize> = (0..hn)
                .map(|h| {
                    let v = vert_of[h];
                    let val = valences[v].0;
                    start[v] + ((h - start[v]) + 1) % val
                })
                .collect();
            let mut local: BTreeMap<CanonicalKey, RibbonGraph> = BTreeMap::new();
            {
                let mut sink = |partner: &[usize]| {
                    let tau = partner.to_vec();
                    let base = RibbonGraph {
                        d: sig.d,
                        tau,
                        sigma: sigma.clone(),
                        white: (0..sig.n).map(|i| start[i]).collect(),
                        boundary: vec![],
                        orientation: Orientation::Even { edges: vec![] },
                    };
                    if !base.connected() {
                        return;
                    }
                    let orbits = base.boundaries();
                    if orbits.len() != sig.m {
                        return;
                    }
                    let orientation = if sig.d.rem_euclid(2) == 0 {
                        Orientation::Even {
                            edges: base.edges().iter().map(|&(a, _)| a).collect(),
                        }
                    } else {
                        Orientation::Odd {
                            black_order: base.black_reps(),
                            edge_dirs: base.edges(),
                        }
                    };
                    for perm in &label_perms {
                        let mut boundary = vec![0usize; sig.m];
                        for (slot, &orb) in perm.iter().enumerate() {
                            boundary[slot] = orbits[orb][0];
                        }
                        let g = RibbonGraph {
                            boundary,
                            orientation: orientation.clone(),
                            ..base.clone()
                        };
                        let form = canonicalize_unchecked(&g);
                        if !form.is_zero {
                            local.entry(form.key).or_insert(g);
                        }
                    }
                };
                let mut matcher = Matcher {
                    start: start.clone(),
                    vert_of,
                    is_black,
                    group,
                    partner: vec![usize::MAX; hn],
                    touched: vec![0; nv],
                    sink: &mut sink,
                };
                matcher.run();
            }
            local
        })
        .collect();

    let mut keys = BTreeSet::new();
    for m in maps {
        keys.extend(m.into_keys());
        if keys.len() > limits.max_basis {
            return Err(CoreError::CapExceeded(format!(
                "basis for {sig} exceeds max_basis = {}",
                limits.max_basis
            )));
        }
    }
    Ok(GradedBasis {
        sig: *sig,
        keys: keys.into_iter().collect(),
        regime_trivalent: black_min >= 3,
    })
}

/// Basis of the chain gravity regime (black vertices at least trivalent).
pub fn enumerate(sig: &Signature, limits: &EnumLimits) -> Result<GradedBasis> {
    if 2 * sig.genus + sig.m + sig.n < 3 {
        return Ok(GradedBasis::empty(*sig));
    }
    enumerate_with_min(sig, 3, limits)
}

/// Basis of the full twisted complex (black vertices at least univalent).
pub fn enumerate_full(sig: &Signature, limits: &EnumLimits) -> Result<GradedBasis> {
    enumerate_with_min(sig, 1, limits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(d: i64, m: usize, n: usize, genus: usize, degree: i64) -> Signature {
        Signature { d, m, n, genus, degree }
    }

    #[test]
    fn degree_one_gravity_generator() {
        // (d=0, m=1, n=2, g=0, degree=1): exactly the one-edge two-white graph
        let b = enumerate(&sig(0, 1, 2, 0, 1), &EnumLimits::default()).unwrap();
        assert_eq!(b.len(), 1);
        let met = b.rep(0).metrics().unwrap();
        assert_eq!(met.num_edges, 1);
        assert_eq!(met.num_white, 2);
        assert_eq!(met.num_black, 0);
    }

    #[test]
    fn loop_stem_in_degree_two() {
        let b = enumerate(&sig(0, 2, 1, 0, 2), &EnumLimits::default()).unwrap();
        let ls = crate::ribbon::build::loop_stem(0, false);
        let key = crate::canonical::canonicalize(&ls).unwrap().key;
        assert!(b.index_of(&key).is_some(), "loop-plus-stem missing from (2,1;0) degree 2");
    }

    #[test]
    fn theta_in_3_0_degree_3() {
        let b = enumerate(&sig(0, 3, 0, 0, 3), &EnumLimits::default()).unwrap();
        let th = crate::ribbon::build::theta(0, [0, 1, 2]);
        let key = crate::canonical::canonicalize(&th).unwrap().key;
        assert!(b.index_of(&key).is_some());
        // theta plus the three labelled dumbbells
        assert_eq!(b.len(), 4);
    }

    #[test]
    fn unstable_signature_is_empty() {
        assert!(enumerate(&sig(0, 1, 1, 0, 1), &EnumLimits::default()).unwrap().is_empty());
    }

    #[test]
    fn full_has_white_black_edge() {
        let b = enumerate_full(&sig(0, 1, 1, 0, 1), &EnumLimits::default()).unwrap();
        assert_eq!(b.len(), 1, "only the white-black edge lives there");
    }

    #[test]
    fn full_contains_trivalent_basis() {
        for degree in 1..=4 {
            let t = enumerate(&sig(0, 2, 1, 0, degree), &EnumLimits::default()).unwrap();
            let f = enumerate_full(&sig(0, 2, 1, 0, degree), &EnumLimits::default()).unwrap();
            for k in &t.keys {
                assert!(f.index_of(k).is_some(), "trivalent basis not a subset at degree {degree}");
            }
        }
    }

    #[test]
    fn polygons_in_two_zero() {
        // (2,0;0) full complex in degree p: the all-bivalent black polytope
        // with p edges is a generator for odd p; for even p its one-step
        // rotation reverses the orientation, so it is a zero graph
        for p in 1..=4usize {
            let b = enumerate_full(&sig(0, 2, 0, 0, p as i64), &EnumLimits::default()).unwrap();
            let has_polygon = b.reps().any(|g| {
                g.vertices().iter().all(|orb| orb.len() == 2) && g.num_edges() == p
            });
            assert_eq!(has_polygon, p % 2 == 1, "polygon presence wrong at p = {p}");
        }
    }

    #[test]
    fn basis_order_is_canonical() {
        let b = enumerate(&sig(0, 2, 1, 0, 3), &EnumLimits::default()).unwrap();
        let mut sorted = b.keys.clone();
        sorted.sort();
        assert_eq!(sorted, b.keys);
    }

    #[test]
    fn label_permutation_preserves_counts() {
        // S_m x S_n relabelling permutes the basis
        let b12 = enumerate(&sig(0, 1, 2, 0, 2), &EnumLimits::default()).unwrap();
        for rep in b12.reps() {
            let swapped = rep.permute_white_labels(&[1, 0]);
            let key = canonicalize_unchecked(&swapped).key;
            assert!(b12.index_of(&key).is_some());
        }
        let b21 = enumerate(&sig(0, 2, 1, 0, 3), &EnumLimits::default()).unwrap();
        for rep in b21.reps() {
            let swapped = rep.permute_boundary_labels(&[1, 0]);
            let key = canonicalize_unchecked(&swapped).key;
            assert!(b21.index_of(&key).is_some());
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let b = enumerate(&sig(0, 2, 1, 0, 3), &EnumLimits::default()).unwrap();
        let text = b.to_jsonl();
        let back = GradedBasis::from_jsonl(&text).unwrap();
        assert_eq!(back.keys, b.keys);
        assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn cap_errors_are_explicit() {
        let tight = EnumLimits { max_half_edges: 2, max_basis: 10 };
        let err = enumerate(&sig(0, 3, 0, 0, 3), &tight);
        assert!(matches!(err, Err(CoreError::CapExceeded(_))));
    }
}

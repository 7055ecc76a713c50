//! Canonical forms of labelled ribbon graphs, with orientation signs.
//!
//! Two valid graphs are isomorphic (as graphs with labelled white vertices and
//! labelled boundaries) iff their canonical encodings agree. The ribbon
//! structure makes this cheap: once a root half-edge is fixed, a breadth-first
//! numbering through `sigma` and `tau` is forced, so the canonical form is the
//! lexicographic minimum over the label-invariant seed set (all half-edges on
//! boundary 1). Seeds achieving the minimum are exactly the automorphisms; a
//! graph with an automorphism acting by -1 on its orientation is zero.

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::ribbon::{Orientation, RibbonGraph};
use crate::{CoreError, Result};

const ENCODING_VERSION: u8 = 1;

/// Byte encoding uniquely determined by the labelled isomorphism class.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CanonicalKey(#[serde(with = "serde_bytes_hex")] pub Vec<u8>);

impl std::fmt::Debug for CanonicalKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CanonicalKey({})", hex_of(&self.0))
    }
}

fn hex_of(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

// Keys are serialized as hex strings so they can be used as JSON map keys.
mod serde_bytes_hex {
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&super::hex_of(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(de)?;
        if s.len() % 2 != 0 {
            return Err(D::Error::custom("odd hex length"));
        }
        (0..s.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&s[i..i + 2], 16).map_err(D::Error::custom))
            .collect()
    }
}

/// Result of canonicalization.
#[derive(Clone, Debug)]
pub struct CanonicalForm {
    pub key: CanonicalKey,
    /// Sign relating the input orientation to the canonical one. Meaningless
    /// when `is_zero`.
    pub sign: i8,
    /// True iff the graph admits an automorphism acting by -1 on orientations.
    pub is_zero: bool,
}

fn parity<T: Ord + Copy>(seq: &[T]) -> i8 {
    let mut inv = 0usize;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] > seq[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

fn push_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

/// Reusable scratch for canonicalization; one per thread.
struct CanonScratch {
    pos: Vec<u32>,
    queue: Vec<u32>,
    enc: Vec<u8>,
    best: Vec<u8>,
    inv_sigma: Vec<u32>,
    vertex_of: Vec<u32>, // orbit id per half-edge
    orbit_darts: Vec<Vec<u32>>,
    white_orbit: Vec<u32>,
    bdry_walks: Vec<Vec<u32>>,
    seq: Vec<u32>,
}

impl CanonScratch {
    fn new() -> Self {
        CanonScratch {
            pos: Vec::new(),
            queue: Vec::new(),
            enc: Vec::new(),
            best: Vec::new(),
            inv_sigma: Vec::new(),
            vertex_of: Vec::new(),
            orbit_darts: Vec::new(),
            white_orbit: Vec::new(),
            bdry_walks: Vec::new(),
            seq: Vec::new(),
        }
    }
}

thread_local! {
    static SCRATCH: std::cell::RefCell<CanonScratch> = std::cell::RefCell::new(CanonScratch::new());
}

fn orientation_sign_fast(g: &RibbonGraph, s: &mut CanonScratch) -> i8 {
    match &g.orientation {
        Orientation::Even { edges } => {
            s.seq.clear();
            for &e in edges {
                s.seq.push(s.pos[e].min(s.pos[g.tau[e]]));
            }
            parity(&s.seq)
        }
        Orientation::Odd { black_order, edge_dirs } => {
            s.seq.clear();
            for &v in black_order {
                let orb = &s.orbit_darts[s.vertex_of[v] as usize];
                s.seq.push(orb.iter().map(|&h| s.pos[h as usize]).min().unwrap());
            }
            let mut sign = parity(&s.seq);
            for &(a, b) in edge_dirs {
                if s.pos[a] > s.pos[b] {
                    sign = -sign;
                }
            }
            sign
        }
    }
}

/// Canonicalize without re-running full validation (for graphs produced by
/// trusted surgery / enumeration code).
pub fn canonicalize_unchecked(g: &RibbonGraph) -> CanonicalForm {
    assert!(g.m() >= 1, "graphs must have at least one labelled boundary");
    SCRATCH.with(|cell| {
        let s = &mut *cell.borrow_mut();
        let hn = g.num_half_edges();

        s.inv_sigma.clear();
        s.inv_sigma.resize(hn, 0);
        for (h, &sg) in g.sigma.iter().enumerate() {
            s.inv_sigma[sg] = h as u32;
        }
        // vertex orbits
        s.vertex_of.clear();
        s.vertex_of.resize(hn, u32::MAX);
        s.orbit_darts.clear();
        for h in 0..hn {
            if s.vertex_of[h] != u32::MAX {
                continue;
            }
            let id = s.orbit_darts.len() as u32;
            let mut orb = Vec::new();
            let mut cur = h;
            loop {
                s.vertex_of[cur] = id;
                orb.push(cur as u32);
                cur = g.sigma[cur];
                if cur == h {
                    break;
                }
            }
            s.orbit_darts.push(orb);
        }
        s.white_orbit.clear();
        for &w in &g.white {
            s.white_orbit.push(s.vertex_of[w]);
        }
        // boundary walks per label (walk order)
        s.bdry_walks.clear();
        for &b in &g.boundary {
            let mut walk = Vec::new();
            let mut cur = b;
            loop {
                walk.push(cur as u32);
                cur = s.inv_sigma[g.tau[cur]] as usize;
                if cur == b {
                    break;
                }
            }
            s.bdry_walks.push(walk);
        }

        let seeds = s.bdry_walks[0].clone();
        let mut best_sign = 0i8;
        let mut have_best = false;
        let mut is_zero = false;
        for &seed in &seeds {
            // BFS numbering from the seed via sigma then tau
            s.pos.clear();
            s.pos.resize(hn, u32::MAX);
            s.queue.clear();
            s.pos[seed as usize] = 0;
            s.queue.push(seed);
            let mut next = 1u32;
            let mut qi = 0usize;
            while qi < s.queue.len() {
                let h = s.queue[qi] as usize;
                qi += 1;
                for nb in [g.sigma[h], g.tau[h]] {
                    if s.pos[nb] == u32::MAX {
                        s.pos[nb] = next;
                        next += 1;
                        s.queue.push(nb as u32);
                    }
                }
            }
            debug_assert_eq!(next as usize, hn, "graph must be connected");

            // encode through this numbering; order[new] = old is s.queue? No:
            // BFS pushes in discovery order, so queue[i] is the dart numbered i.
            s.enc.clear();
            s.enc.push(ENCODING_VERSION);
            s.enc.extend_from_slice(&g.d.to_le_bytes());
            push_u32(&mut s.enc, g.m());
            push_u32(&mut s.enc, g.n());
            push_u32(&mut s.enc, hn);
            for i in 0..hn {
                let old = s.queue[i] as usize;
                push_u32(&mut s.enc, s.pos[g.sigma[old]] as usize);
            }
            for i in 0..hn {
                let old = s.queue[i] as usize;
                push_u32(&mut s.enc, s.pos[g.tau[old]] as usize);
            }
            for &orb_id in &s.white_orbit {
                let rep = s.orbit_darts[orb_id as usize]
                    .iter()
                    .map(|&h| s.pos[h as usize])
                    .min()
                    .unwrap();
                push_u32(&mut s.enc, rep as usize);
            }
            for walk in &s.bdry_walks {
                let rep = walk.iter().map(|&h| s.pos[h as usize]).min().unwrap();
                push_u32(&mut s.enc, rep as usize);
            }

            if !have_best || s.enc < s.best {
                std::mem::swap(&mut s.best, &mut s.enc);
                best_sign = orientation_sign_fast(g, s);
                have_best = true;
                is_zero = false;
            } else if s.enc == s.best {
                if orientation_sign_fast(g, s) != best_sign {
                    is_zero = true;
                }
            }
        }
        CanonicalForm {
            key: CanonicalKey(s.best.clone()),
            sign: best_sign,
            is_zero,
        }
    })
}

/// Canonicalize a graph. Errors if the graph is invalid.
pub fn canonicalize(g: &RibbonGraph) -> Result<CanonicalForm> {
    let report = g.validate();
    if !report.is_valid() {
        return Err(CoreError::InvalidGraph(report.violations.join("; ")));
    }
    Ok(canonicalize_unchecked(g))
}

/// Rebuild the canonical representative graph from its encoding. The decoded
/// graph carries the canonical orientation, so
/// `canonicalize(&decode(&k)?)? == (k, +1)`.
pub fn decode(key: &CanonicalKey) -> Result<RibbonGraph> {
    let buf = &key.0;
    let fail = |m: &str| CoreError::Decode(m.to_string());
    if buf.len() < 21 || buf[0] != ENCODING_VERSION {
        return Err(fail("bad header"));
    }
    let d = i64::from_le_bytes(buf[1..9].try_into().unwrap());
    let rd_u32 = |off: usize| -> usize {
        u32::from_le_bytes(buf[off..off + 4].try_into().unwrap()) as usize
    };
    let m = rd_u32(9);
    let n = rd_u32(13);
    let hn = rd_u32(17);
    let need = 21 + 4 * (2 * hn + m + n);
    if buf.len() != need {
        return Err(fail("bad length"));
    }
    let mut off = 21;
    let mut take = |count: usize| -> Vec<usize> {
        let v = (0..count).map(|i| rd_u32(off + 4 * i)).collect();
        off += 4 * count;
        v
    };
    let sigma = take(hn);
    let tau = take(hn);
    let white = take(n);
    let boundary = take(m);
    let tmp = RibbonGraph {
        d,
        tau: tau.clone(),
        sigma: sigma.clone(),
        white: white.clone(),
        boundary: boundary.clone(),
        orientation: Orientation::Even { edges: vec![] },
    };
    let orientation = if d.rem_euclid(2) == 0 {
        Orientation::Even { edges: tmp.edges().iter().map(|&(a, _)| a).collect() }
    } else {
        Orientation::Odd { black_order: tmp.black_reps(), edge_dirs: tmp.edges() }
    };
    let g = RibbonGraph { d, tau, sigma, white, boundary, orientation };
    let report = g.validate();
    if !report.is_valid() {
        return Err(CoreError::Decode(report.violations.join("; ")));
    }
    Ok(g)
}

/// Signature (d, m, n, g, degree) shared by all terms of a sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub d: i64,
    pub m: usize,
    pub n: usize,
    pub genus: usize,
    pub degree: i64,
}

impl Signature {
    pub fn of(g: &RibbonGraph) -> Result<Signature> {
        let met = g.metrics()?;
        Ok(Signature {
            d: g.d,
            m: met.num_boundaries,
            n: met.num_white,
            genus: met.genus,
            degree: met.degree,
        })
    }

    /// Edge count implied by this signature: `degree + d(2g-2+m+n)`.
    pub fn num_edges(&self) -> Option<usize> {
        let e = self.degree + self.d * (2 * self.genus as i64 - 2 + self.m as i64 + self.n as i64);
        (e >= 0).then_some(e as usize)
    }

    /// Vertex count implied: `E + 2 - 2g - m`.
    pub fn num_vertices(&self) -> Option<usize> {
        let e = self.num_edges()? as i64;
        let v = e + 2 - 2 * self.genus as i64 - self.m as i64;
        (v >= 1).then_some(v as usize)
    }

    pub fn shifted(&self, degree: i64) -> Signature {
        Signature { degree, ..*self }
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "(d={}, m={}, n={}, g={}, deg={})",
            self.d, self.m, self.n, self.genus, self.degree
        )
    }
}

/// Finite linear combination of canonical graphs with exact rational
/// coefficients. No stored coefficient is zero; no stored key is a zero graph;
/// all terms share one signature.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FormalSum {
    sig: Option<Signature>,
    terms: BTreeMap<CanonicalKey, BigRational>,
}

impl FormalSum {
    pub fn zero() -> FormalSum {
        FormalSum::default()
    }

    /// Empty sum carrying an explicit grading.
    pub fn empty_of(sig: Signature) -> FormalSum {
        FormalSum { sig: Some(sig), terms: BTreeMap::new() }
    }

    pub fn signature(&self) -> Option<Signature> {
        self.sig
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&CanonicalKey, &BigRational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, key: &CanonicalKey) -> BigRational {
        self.terms.get(key).cloned().unwrap_or_else(BigRational::zero)
    }

    fn check_sig(&mut self, sig: Signature) -> Result<()> {
        match self.sig {
            None => {
                self.sig = Some(sig);
                Ok(())
            }
            Some(s) if s == sig => Ok(()),
            Some(s) => Err(CoreError::SignatureMismatch(format!("{s} vs {sig}"))),
        }
    }

    /// Add `coeff` times the (not necessarily canonical) graph `g`.
    pub fn add_graph(&mut self, g: &RibbonGraph, coeff: &BigRational) -> Result<()> {
        if coeff.is_zero() {
            return Ok(());
        }
        self.check_sig(Signature::of(g)?)?;
        let form = canonicalize_unchecked(g);
        if form.is_zero {
            return Ok(());
        }
        let signed = if form.sign > 0 { coeff.clone() } else { -coeff.clone() };
        let entry = self.terms.entry(form.key).or_insert_with(BigRational::zero);
        *entry += signed;
        if entry.is_zero() {
            // remove cancelled term
            let key = self
                .terms
                .iter()
                .find(|(_, v)| v.is_zero())
                .map(|(k, _)| k.clone())
                .unwrap();
            self.terms.remove(&key);
        }
        Ok(())
    }

    pub fn singleton(g: &RibbonGraph, coeff: BigRational) -> Result<FormalSum> {
        let mut s = FormalSum::zero();
        s.add_graph(g, &coeff)?;
        // Keep the signature even if the graph was a zero graph, so that sums
        // of zero graphs still carry their grading.
        if s.sig.is_none() {
            s.sig = Some(Signature::of(g)?);
        }
        Ok(s)
    }

    pub fn add_key(&mut self, key: CanonicalKey, coeff: BigRational, sig: Signature) -> Result<()> {
        if coeff.is_zero() {
            return Ok(());
        }
        self.check_sig(sig)?;
        let entry = self.terms.entry(key.clone()).or_insert_with(BigRational::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
        Ok(())
    }

    pub fn add(&self, other: &FormalSum) -> Result<FormalSum> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &FormalSum) -> Result<()> {
        if let Some(sig) = other.sig {
            if !other.terms.is_empty() {
                self.check_sig(sig)?;
            } else if self.sig.is_none() {
                self.sig = Some(sig);
            }
        }
        for (k, v) in &other.terms {
            let entry = self.terms.entry(k.clone()).or_insert_with(BigRational::zero);
            *entry += v;
            if entry.is_zero() {
                self.terms.remove(k);
            }
        }
        Ok(())
    }

    pub fn scale(&self, c: &BigRational) -> FormalSum {
        if c.is_zero() {
            return FormalSum { sig: self.sig, terms: BTreeMap::new() };
        }
        FormalSum {
            sig: self.sig,
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
        }
    }

    pub fn neg(&self) -> FormalSum {
        FormalSum {
            sig: self.sig,
            terms: self.terms.iter().map(|(k, v)| (k.clone(), -v.clone())).collect(),
        }
    }

    pub fn sub(&self, other: &FormalSum) -> Result<FormalSum> {
        self.add(&other.neg())
    }

    /// Decode every term, returning (representative graph, coefficient).
    pub fn reps(&self) -> Result<Vec<(RibbonGraph, BigRational)>> {
        self.terms
            .iter()
            .map(|(k, v)| Ok((decode(k)?, v.clone())))
            .collect()
    }

    /// Apply a graph->sum map linearly.
    pub fn flat_map(&self, f: impl Fn(&RibbonGraph) -> Result<FormalSum>) -> Result<FormalSum> {
        let mut out = FormalSum::zero();
        for (k, c) in &self.terms {
            let g = decode(k)?;
            out.add_assign(&f(&g)?.scale(c))?;
        }
        Ok(out)
    }

    /// Act by a permutation on boundary labels (new label of old j+1 is
    /// perm[j]+1), re-canonicalizing every term.
    pub fn permute_boundary_labels(&self, perm: &[usize]) -> Result<FormalSum> {
        let mut out = FormalSum::zero();
        out.sig = self.sig;
        for (k, c) in &self.terms {
            let g = decode(k)?.permute_boundary_labels(perm);
            out.add_graph(&g, c)?;
        }
        Ok(out)
    }

    /// Act by a permutation on white labels.
    pub fn permute_white_labels(&self, perm: &[usize]) -> Result<FormalSum> {
        let mut out = FormalSum::zero();
        out.sig = self.sig;
        for (k, c) in &self.terms {
            let g = decode(k)?.permute_white_labels(perm);
            out.add_graph(&g, c)?;
        }
        Ok(out)
    }

    /// Largest absolute numerator/denominator, for diagnostics.
    pub fn max_coeff_magnitude(&self) -> BigRational {
        self.terms
            .values()
            .map(|v| v.abs())
            .max()
            .unwrap_or_else(BigRational::zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ribbon::build;
    use num_traits::One;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    fn one() -> BigRational {
        BigRational::one()
    }

    #[test]
    fn relabel_invariance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for g in [
            build::theta(0, [0, 1, 2]),
            build::loop_stem(0, false),
            build::white_loop(0, true),
            build::theta(1, [2, 0, 1]),
        ] {
            let base = canonicalize(&g).unwrap();
            let hn = g.num_half_edges();
            for _ in 0..200 {
                let mut perm: Vec<usize> = (0..hn).collect();
                perm.shuffle(&mut rng);
                let h = g.relabel_half_edges(&perm);
                let form = canonicalize(&h).unwrap();
                assert_eq!(form.key, base.key);
                assert_eq!(form.is_zero, base.is_zero);
                // relabelling carries orientation along entry-wise
                if !form.is_zero {
                    assert_eq!(form.sign, base.sign);
                }
            }
        }
    }

    #[test]
    fn edge_transposition_flips_sign() {
        let g = build::theta(0, [0, 1, 2]);
        let mut h = g.clone();
        if let Orientation::Even { edges } = &mut h.orientation {
            edges.swap(0, 1);
        }
        let a = canonicalize(&g).unwrap();
        let b = canonicalize(&h).unwrap();
        assert_eq!(a.key, b.key);
        assert!(!a.is_zero);
        assert_eq!(a.sign, -b.sign);
    }

    #[test]
    fn odd_d_direction_flip_flips_sign() {
        let g = build::theta(1, [0, 1, 2]);
        let mut h = g.clone();
        if let Orientation::Odd { edge_dirs, .. } = &mut h.orientation {
            let (a, b) = edge_dirs[0];
            edge_dirs[0] = (b, a);
        }
        let a = canonicalize(&g).unwrap();
        let b = canonicalize(&h).unwrap();
        assert_eq!(a.key, b.key);
        if !a.is_zero {
            assert_eq!(a.sign, -b.sign);
        }
    }

    #[test]
    fn double_edge_is_zero_even_d() {
        // two black vertices joined by two parallel edges; its edge swap is an
        // orientation-reversing automorphism at even d
        let g = build::from_rotations(
            0,
            &[vec![0, 1], vec![2, 3]],
            &[(0, 2), (1, 3)],
            &[],
            &[0, 1],
        );
        assert!(g.validate().is_valid(), "{:?}", g.validate().violations);
        let form = canonicalize(&g).unwrap();
        assert!(form.is_zero);
        // and at odd d it is zero as well (black swap times two flips)
        let g1 = build::from_rotations(
            1,
            &[vec![0, 1], vec![2, 3]],
            &[(0, 2), (1, 3)],
            &[],
            &[0, 1],
        );
        let form1 = canonicalize(&g1).unwrap();
        assert!(form1.is_zero);
    }

    #[test]
    fn labelled_tree_not_zero() {
        let g = build::bracket_graph(0);
        assert!(!canonicalize(&g).unwrap().is_zero);
    }

    #[test]
    fn decode_round_trip() {
        for g in [
            build::theta(0, [0, 1, 2]),
            build::loop_stem(0, true),
            build::theta(3, [0, 1, 2]),
        ] {
            let form = canonicalize(&g).unwrap();
            if form.is_zero {
                continue;
            }
            let rep = decode(&form.key).unwrap();
            let again = canonicalize(&rep).unwrap();
            assert_eq!(again.key, form.key);
            assert_eq!(again.sign, 1, "canonical representative has sign +1");
        }
    }

    #[test]
    fn cancellation() {
        let g = build::theta(0, [0, 1, 2]);
        let mut s = FormalSum::zero();
        s.add_graph(&g, &one()).unwrap();
        let mut flipped = g.clone();
        if let Orientation::Even { edges } = &mut flipped.orientation {
            edges.swap(0, 1);
        }
        s.add_graph(&flipped, &one()).unwrap();
        assert!(s.is_zero());
    }

    #[test]
    fn signature_mismatch_rejected() {
        let mut s = FormalSum::zero();
        s.add_graph(&build::theta(0, [0, 1, 2]), &one()).unwrap();
        let err = s.add_graph(&build::bracket_graph(0), &one());
        assert!(err.is_err());
    }

    #[test]
    fn loop_stem_labelings_differ() {
        let a = canonicalize(&build::loop_stem(0, false)).unwrap();
        let b = canonicalize(&build::loop_stem(0, true)).unwrap();
        assert_ne!(a.key, b.key, "no automorphism swaps the two boundaries");
    }

    #[test]
    fn theta_labelings_all_proportional() {
        // the theta fatgraph automorphisms realize S3 on boundary labels with
        // the sign character, so all six labelled thetas share one key
        let keys: Vec<_> = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ]
        .iter()
        .map(|&b| canonicalize(&build::theta(0, b)).unwrap())
        .collect();
        for k in &keys {
            assert!(!k.is_zero);
            assert_eq!(k.key, keys[0].key);
        }
        // transposition = odd edge permutation = sign flip
        assert_eq!(keys[1].sign, -keys[0].sign);
        // 3-cycle = even
        assert_eq!(keys[3].sign, keys[0].sign);
    }
}

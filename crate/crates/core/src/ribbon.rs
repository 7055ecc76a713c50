//! Half-edge representation of twisted ribbon graphs.
//!
//! A ribbon graph is a triple (H, tau, sigma): `tau` is a fixed-point-free
//! involution on the half-edge set whose orbits are the edges, and `sigma` is a
//! permutation whose orbits are the vertices; the cycle of `sigma` through a
//! vertex is the cyclic (counterclockwise) order of half-edges there.
//! Boundaries are the orbits of `sigma^{-1} . tau`. Vertices are either black
//! (unlabelled, degree `d`) or white (labelled 1..n); boundaries are labelled
//! 1..m. Genus is `1 + (E - V - B)/2`.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;

use crate::{CoreError, Result};

/// Orientation datum. Which variant is populated depends on the parity of the
/// family parameter `d`: an ordering of the edges for even `d`, an ordering of
/// the black vertices plus a direction on each edge for odd `d`.
///
/// Edges are identified by the smaller half-edge index of their pair; black
/// vertices by the smallest half-edge in their sigma-orbit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Even { edges: Vec<usize> },
    Odd { black_order: Vec<usize>, edge_dirs: Vec<(usize, usize)> },
}

impl Orientation {
    pub fn is_even(&self) -> bool {
        matches!(self, Orientation::Even { .. })
    }
}

/// A twisted ribbon graph with labelled white vertices and boundaries.
///
/// `white[i]` is some half-edge attached to the white vertex labelled `i+1`;
/// `boundary[j]` is some half-edge on the boundary labelled `j+1`. All other
/// vertices are black. Values are immutable after construction; every
/// operation on them is a pure function.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RibbonGraph {
    pub d: i64,
    pub tau: Vec<usize>,
    pub sigma: Vec<usize>,
    pub white: Vec<usize>,
    pub boundary: Vec<usize>,
    pub orientation: Orientation,
}

/// Counts and derived gradings of a valid graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub num_edges: usize,
    pub num_black: usize,
    pub num_white: usize,
    pub num_boundaries: usize,
    pub genus: usize,
    pub degree: i64,
}

/// Everything `validate` found wrong with a graph. Empty means valid.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl RibbonGraph {
    /// Number of half-edges.
    pub fn num_half_edges(&self) -> usize {
        self.tau.len()
    }

    pub fn num_edges(&self) -> usize {
        self.tau.len() / 2
    }

    /// Number of labelled white vertices.
    pub fn n(&self) -> usize {
        self.white.len()
    }

    /// Number of labelled boundaries.
    pub fn m(&self) -> usize {
        self.boundary.len()
    }

    /// The sigma-orbit through `h`, starting at `h`.
    pub fn vertex_orbit(&self, h: usize) -> Vec<usize> {
        let mut orbit = vec![h];
        let mut cur = self.sigma[h];
        while cur != h {
            orbit.push(cur);
            cur = self.sigma[cur];
        }
        orbit
    }

    /// Smallest half-edge in the sigma-orbit of `h`; used as the vertex id.
    pub fn vertex_rep(&self, h: usize) -> usize {
        self.vertex_orbit(h).into_iter().min().unwrap()
    }

    /// All vertex orbits, sorted by their representative.
    pub fn vertices(&self) -> Vec<Vec<usize>> {
        let hn = self.num_half_edges();
        let mut seen = vec![false; hn];
        let mut out = Vec::new();
        for h in 0..hn {
            if !seen[h] {
                let orbit = self.vertex_orbit(h);
                for &x in &orbit {
                    seen[x] = true;
                }
                out.push(orbit);
            }
        }
        out
    }

    /// White label (1-based) of the vertex containing `h`, if it is white.
    pub fn white_label(&self, h: usize) -> Option<usize> {
        let rep = self.vertex_rep(h);
        self.white
            .iter()
            .position(|&w| self.vertex_rep(w) == rep)
            .map(|i| i + 1)
    }

    pub fn is_black(&self, h: usize) -> bool {
        self.white_label(h).is_none()
    }

    /// Representatives (min half-edge) of the black vertices, ascending.
    pub fn black_reps(&self) -> Vec<usize> {
        let whites: Vec<usize> = self.white.iter().map(|&w| self.vertex_rep(w)).collect();
        self.vertices()
            .into_iter()
            .map(|orb| orb.into_iter().min().unwrap())
            .filter(|rep| !whites.contains(rep))
            .collect()
    }

    /// Successor along the boundary walk: `sigma^{-1}(tau(h))`.
    pub fn boundary_next(&self, h: usize) -> usize {
        let t = self.tau[h];
        // sigma^{-1}(t): walk the cycle of t.
        let mut prev = t;
        let mut cur = self.sigma[t];
        while cur != t {
            prev = cur;
            cur = self.sigma[cur];
        }
        prev
    }

    /// The boundary orbit through `h`, in walk order starting at `h`.
    pub fn boundary_walk(&self, h: usize) -> Vec<usize> {
        let inv = self.inverse_sigma();
        let mut walk = vec![h];
        let mut cur = inv[self.tau[h]];
        while cur != h {
            walk.push(cur);
            cur = inv[self.tau[cur]];
        }
        walk
    }

    pub fn inverse_sigma(&self) -> Vec<usize> {
        let mut inv = vec![0; self.sigma.len()];
        for (h, &s) in self.sigma.iter().enumerate() {
            inv[s] = h;
        }
        inv
    }

    /// All boundary orbits in walk order, sorted by their smallest half-edge.
    pub fn boundaries(&self) -> Vec<Vec<usize>> {
        let hn = self.num_half_edges();
        let inv = self.inverse_sigma();
        let mut seen = vec![false; hn];
        let mut out = Vec::new();
        for h in 0..hn {
            if !seen[h] {
                let mut walk = vec![h];
                seen[h] = true;
                let mut cur = inv[self.tau[h]];
                while cur != h {
                    seen[cur] = true;
                    walk.push(cur);
                    cur = inv[self.tau[cur]];
                }
                out.push(walk);
            }
        }
        out
    }

    /// Edge pairs `(min, max)` sorted by edge id (= min half-edge).
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for h in 0..self.num_half_edges() {
            let t = self.tau[h];
            if h < t {
                out.push((h, t));
            }
        }
        out
    }

    /// True when sigma and tau connect all half-edges into one component.
    /// A graph with no half-edges counts as connected only if it is empty.
    pub fn connected(&self) -> bool {
        let hn = self.num_half_edges();
        if hn == 0 {
            return true;
        }
        let mut seen = vec![false; hn];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(h) = stack.pop() {
            for nb in [self.sigma[h], self.tau[h]] {
                if !seen[nb] {
                    seen[nb] = true;
                    stack.push(nb);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Check every structural invariant; returns the full list of violations.
    pub fn validate(&self) -> ValidationReport {
        let mut violations: Vec<String> = Vec::new();
        let hn = self.num_half_edges();
        macro_rules! bad {
            ($($t:tt)*) => { violations.push(format!($($t)*)) };
        }
        macro_rules! done {
            () => { return ValidationReport { violations } };
        }

        if hn % 2 != 0 {
            bad!("odd number of half-edges: {hn}");
        }
        if self.sigma.len() != hn {
            bad!(
                "sigma has length {} but tau has length {hn}",
                self.sigma.len()
            );
            done!();
        }
        for h in 0..hn {
            if self.tau[h] >= hn || self.sigma[h] >= hn {
                bad!("half-edge index out of range at {h}");
                done!();
            }
        }
        for h in 0..hn {
            if self.tau[self.tau[h]] != h {
                bad!("tau not an involution at {h}");
            }
            if self.tau[h] == h {
                bad!("tau not fixed-point-free at {h}");
            }
        }
        let mut hit = vec![false; hn];
        for &s in &self.sigma {
            if hit[s] {
                bad!("sigma not a bijection: {s} hit twice");
                done!();
            }
            hit[s] = true;
        }
        if !self.connected() {
            bad!("not connected");
        }

        // White labels must name pairwise distinct vertices.
        let mut white_reps = Vec::new();
        for (i, &w) in self.white.iter().enumerate() {
            if w >= hn {
                bad!("white label {} points at missing half-edge {w}", i + 1);
                done!();
            }
            let rep = self.vertex_rep(w);
            if white_reps.contains(&rep) {
                bad!("white label {} repeats a vertex", i + 1);
            }
            white_reps.push(rep);
        }

        // Boundary labels must name pairwise distinct boundary orbits, and all
        // orbits must be labelled.
        let orbits = self.boundaries();
        if orbits.len() != self.boundary.len() {
            bad!(
                "graph has {} boundaries but {} labels",
                orbits.len(),
                self.boundary.len()
            );
        }
        let mut seen_orbit = Vec::new();
        for (j, &b) in self.boundary.iter().enumerate() {
            if b >= hn {
                bad!("boundary label {} points at missing half-edge {b}", j + 1);
                done!();
            }
            let idx = orbits.iter().position(|orb| orb.contains(&b)).unwrap();
            if seen_orbit.contains(&idx) {
                bad!("boundary label {} repeats an orbit", j + 1);
            }
            seen_orbit.push(idx);
        }

        // Orientation variant must match the parity of d and cover exactly the
        // edges / black vertices present.
        match &self.orientation {
            Orientation::Even { edges } => {
                if self.d.rem_euclid(2) != 0 {
                    bad!("even orientation datum on odd-d graph");
                }
                let mut expect: Vec<usize> = self.edges().iter().map(|&(a, _)| a).collect();
                let mut got = edges.clone();
                expect.sort_unstable();
                got.sort_unstable();
                if expect != got {
                    bad!("edge ordering does not enumerate the edges");
                }
            }
            Orientation::Odd { black_order, edge_dirs } => {
                if self.d.rem_euclid(2) != 1 {
                    bad!("odd orientation datum on even-d graph");
                }
                let mut expect = self.black_reps();
                let mut got = black_order.clone();
                expect.sort_unstable();
                got.sort_unstable();
                if expect != got {
                    bad!("black ordering does not enumerate the black vertices");
                }
                let mut exp_edges: Vec<(usize, usize)> = self.edges();
                let mut got_edges: Vec<(usize, usize)> = edge_dirs
                    .iter()
                    .map(|&(a, b)| (a.min(b), a.max(b)))
                    .collect();
                exp_edges.sort_unstable();
                got_edges.sort_unstable();
                if exp_edges != got_edges {
                    bad!("edge directions do not enumerate the edges");
                }
                for &(a, b) in edge_dirs {
                    if a >= hn || b >= hn || self.tau[a] != b {
                        bad!("edge direction ({a},{b}) is not an edge");
                    }
                }
            }
        }

        // Genus integrality.
        if violations.is_empty() {
            let e = self.num_edges() as i64;
            let v = self.vertices().len() as i64;
            let b = self.boundaries().len() as i64;
            let twice = e - v - b + 2;
            if twice % 2 != 0 || twice < 0 {
                bad!("genus formula fails: E={e} V={v} B={b}");
            }
        }
        ValidationReport { violations }
    }

    /// Valence-regime check: every black vertex at least trivalent, every
    /// white vertex at least univalent.
    pub fn in_trivalent_regime(&self) -> bool {
        let whites: Vec<usize> = self.white.iter().map(|&w| self.vertex_rep(w)).collect();
        for orbit in self.vertices() {
            let rep = *orbit.iter().min().unwrap();
            let min = if whites.contains(&rep) { 1 } else { 3 };
            if orbit.len() < min {
                return false;
            }
        }
        true
    }

    /// Counts, genus and cohomological degree. Errors if the graph is invalid.
    pub fn metrics(&self) -> Result<GraphMetrics> {
        let report = self.validate();
        if !report.is_valid() {
            return Err(CoreError::InvalidGraph(report.violations.join("; ")));
        }
        let num_edges = self.num_edges();
        let num_white = self.n();
        let num_vertices = self.vertices().len();
        let num_black = num_vertices - num_white;
        let num_boundaries = self.boundaries().len();
        let genus =
            (num_edges as i64 - num_vertices as i64 - num_boundaries as i64 + 2) / 2;
        debug_assert!(genus >= 0);
        Ok(GraphMetrics {
            num_edges,
            num_black,
            num_white,
            num_boundaries,
            genus: genus as usize,
            degree: self.degree(),
        })
    }

    /// Cohomological degree: `(1-d)*E + d*#black`.
    pub fn degree(&self) -> i64 {
        let e = self.num_edges() as i64;
        let black = (self.vertices().len() - self.n()) as i64;
        (1 - self.d) * e + self.d * black
    }

    /// Rebuild the graph with half-edges renamed by `perm` (perm[old] = new).
    /// Orientation data is carried along entry-wise, so the sign of the
    /// relabelled graph relative to the original is the identity.
    pub fn relabel_half_edges(&self, perm: &[usize]) -> RibbonGraph {
        let hn = self.num_half_edges();
        assert_eq!(perm.len(), hn);
        let mut tau = vec![0; hn];
        let mut sigma = vec![0; hn];
        for h in 0..hn {
            tau[perm[h]] = perm[self.tau[h]];
            sigma[perm[h]] = perm[self.sigma[h]];
        }
        let orientation = match &self.orientation {
            Orientation::Even { edges } => Orientation::Even {
                edges: edges
                    .iter()
                    .map(|&e| perm[e].min(perm[self.tau[e]]))
                    .collect(),
            },
            Orientation::Odd { black_order, edge_dirs } => {
                // Black ids must be recomputed as orbit minima in the new names.
                let tmp = RibbonGraph {
                    d: self.d,
                    tau: tau.clone(),
                    sigma: sigma.clone(),
                    white: self.white.iter().map(|&w| perm[w]).collect(),
                    boundary: self.boundary.iter().map(|&b| perm[b]).collect(),
                    orientation: Orientation::Odd { black_order: vec![], edge_dirs: vec![] },
                };
                Orientation::Odd {
                    black_order: black_order.iter().map(|&v| tmp.vertex_rep(perm[v])).collect(),
                    edge_dirs: edge_dirs.iter().map(|&(a, b)| (perm[a], perm[b])).collect(),
                }
            }
        };
        RibbonGraph {
            d: self.d,
            tau,
            sigma,
            white: self.white.iter().map(|&w| perm[w]).collect(),
            boundary: self.boundary.iter().map(|&b| perm[b]).collect(),
            orientation,
        }
    }

    /// Act on boundary labels: new label of old label `j+1` is `perm[j]+1`.
    pub fn permute_boundary_labels(&self, perm: &[usize]) -> RibbonGraph {
        assert_eq!(perm.len(), self.m());
        let mut boundary = vec![0; self.m()];
        for (old, &h) in self.boundary.iter().enumerate() {
            boundary[perm[old]] = h;
        }
        RibbonGraph { boundary, ..self.clone() }
    }

    /// Act on white labels: new label of old label `i+1` is `perm[i]+1`.
    pub fn permute_white_labels(&self, perm: &[usize]) -> RibbonGraph {
        assert_eq!(perm.len(), self.n());
        let mut white = vec![0; self.n()];
        for (old, &h) in self.white.iter().enumerate() {
            white[perm[old]] = h;
        }
        RibbonGraph { white, ..self.clone() }
    }
}

// The JSON wire format is fixed: {"d", "tau", "sigma", "white": {label: rep},
// "boundary": {label: rep}, "orientation": {"edges": [...]} or
// {"black_order": [...], "edge_dirs": [[h, h'], ...]}}.
#[derive(Serialize, Deserialize)]
struct WireGraph {
    d: i64,
    tau: Vec<usize>,
    sigma: Vec<usize>,
    white: BTreeMap<String, usize>,
    boundary: BTreeMap<String, usize>,
    orientation: WireOrientation,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WireOrientation {
    Even { edges: Vec<usize> },
    Odd { black_order: Vec<usize>, edge_dirs: Vec<(usize, usize)> },
}

impl Serialize for RibbonGraph {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let label_map = |v: &[usize]| {
            v.iter()
                .enumerate()
                .map(|(i, &h)| ((i + 1).to_string(), h))
                .collect::<BTreeMap<_, _>>()
        };
        let wire = WireGraph {
            d: self.d,
            tau: self.tau.clone(),
            sigma: self.sigma.clone(),
            white: label_map(&self.white),
            boundary: label_map(&self.boundary),
            orientation: match &self.orientation {
                Orientation::Even { edges } => WireOrientation::Even { edges: edges.clone() },
                Orientation::Odd { black_order, edge_dirs } => WireOrientation::Odd {
                    black_order: black_order.clone(),
                    edge_dirs: edge_dirs.clone(),
                },
            },
        };
        wire.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for RibbonGraph {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let wire = WireGraph::deserialize(de)?;
        let unmap = |m: &BTreeMap<String, usize>, what: &str| {
            let mut v = vec![0usize; m.len()];
            for (k, &h) in m {
                let idx: usize = k
                    .parse()
                    .map_err(|_| D::Error::custom(format!("bad {what} label {k}")))?;
                if idx == 0 || idx > m.len() {
                    return Err(D::Error::custom(format!("{what} label {k} out of range")));
                }
                v[idx - 1] = h;
            }
            Ok(v)
        };
        Ok(RibbonGraph {
            d: wire.d,
            tau: wire.tau,
            sigma: wire.sigma,
            white: unmap(&wire.white, "white")?,
            boundary: unmap(&wire.boundary, "boundary")?,
            orientation: match wire.orientation {
                WireOrientation::Even { edges } => Orientation::Even { edges },
                WireOrientation::Odd { black_order, edge_dirs } => {
                    Orientation::Odd { black_order, edge_dirs }
                }
            },
        })
    }
}

/// Convenience constructors for the small graphs used throughout.
pub mod build {
    use super::*;

    fn even_orientation(tau: &[usize]) -> Orientation {
        let edges = (0..tau.len()).filter(|&h| h < tau[h]).collect();
        Orientation::Even { edges }
    }

    /// Assemble a graph from vertex rotations. `rotations[k]` is the cyclic
    /// order of half-edges at vertex k; `whites` and `boundaries` pick label
    /// representatives. Orientation defaults to the sorted even-d datum.
    pub fn from_rotations(
        d: i64,
        rotations: &[Vec<usize>],
        tau_pairs: &[(usize, usize)],
        whites: &[usize],
        boundaries: &[usize],
    ) -> RibbonGraph {
        let hn: usize = rotations.iter().map(|r| r.len()).sum();
        let mut sigma = vec![usize::MAX; hn];
        for rot in rotations {
            for (i, &h) in rot.iter().enumerate() {
                sigma[h] = rot[(i + 1) % rot.len()];
            }
        }
        let mut tau = vec![usize::MAX; hn];
        for &(a, b) in tau_pairs {
            tau[a] = b;
            tau[b] = a;
        }
        let orientation = if d.rem_euclid(2) == 0 {
            even_orientation(&tau)
        } else {
            let g = RibbonGraph {
                d,
                tau: tau.clone(),
                sigma: sigma.clone(),
                white: whites.to_vec(),
                boundary: boundaries.to_vec(),
                orientation: Orientation::Odd { black_order: vec![], edge_dirs: vec![] },
            };
            Orientation::Odd {
                black_order: g.black_reps(),
                edge_dirs: g.edges(),
            }
        };
        RibbonGraph {
            d,
            tau,
            sigma,
            white: whites.to_vec(),
            boundary: boundaries.to_vec(),
            orientation,
        }
    }

    /// Single edge joining white 1 and white 2; one boundary. The Lie bracket
    /// generator image, degree `1-d`.
    pub fn bracket_graph(d: i64) -> RibbonGraph {
        from_rotations(d, &[vec![0], vec![1]], &[(0, 1)], &[0, 1], &[0])
    }

    /// Single edge joining white 1 and a black vertex; one boundary.
    pub fn white_black_edge(d: i64) -> RibbonGraph {
        from_rotations(d, &[vec![0], vec![1]], &[(0, 1)], &[0], &[0])
    }

    /// Loop at white vertex 1, two boundaries: `boundary_labels = (x, y)`
    /// puts label x-bar on the orbit {0} and y-bar on {1}.
    pub fn white_loop(d: i64, swap: bool) -> RibbonGraph {
        let b = if swap { vec![1, 0] } else { vec![0, 1] };
        from_rotations(d, &[vec![0, 1]], &[(0, 1)], &[0], &b)
    }

    /// Loop at a black vertex plus a stem down to white 1 (the cobracket
    /// cocycle shape): black rotation (stem, p, q), tau pairs the loop (p,q)
    /// and the stem with the white half-edge.
    ///
    /// Boundaries: {p} (the short side of the loop) and the long walk. With
    /// `swap = false` label 1-bar goes on the short orbit.
    pub fn loop_stem(d: i64, swap: bool) -> RibbonGraph {
        // half-edges: 0 stem at black, 1,2 loop at black, 3 at white
        let rot = vec![vec![0, 1, 2], vec![3]];
        let taus = [(1, 2), (0, 3)];
        // boundary orbits: walk from 1: tau(1)=2, sigma^{-1}(2)=1 -> {1};
        // walk from 0: {0,3,2} say. Representatives: 1 (short), 0 (long).
        let b = if swap { vec![0, 1] } else { vec![1, 0] };
        from_rotations(d, &rot, &taus, &[3], &b)
    }

    /// Theta graph: two vertices joined by three parallel edges, genus 0,
    /// three boundaries. Colors per `white` reps; all-black by default.
    pub fn theta(d: i64, boundaries: [usize; 3]) -> RibbonGraph {
        // P = (0,1,2), Q = (3,5,4), tau = (03)(14)(25)
        // boundary orbits: (0,4), (1,5), (2,3) -- reps 0, 1, 2.
        from_rotations(
            d,
            &[vec![0, 1, 2], vec![3, 5, 4]],
            &[(0, 3), (1, 4), (2, 5)],
            &[],
            &boundaries,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_has_three_boundaries() {
        let g = build::theta(0, [0, 1, 2]);
        assert!(g.validate().is_valid(), "{:?}", g.validate().violations);
        let m = g.metrics().unwrap();
        assert_eq!(m.num_edges, 3);
        assert_eq!(m.num_boundaries, 3);
        assert_eq!(m.genus, 0);
        assert_eq!(m.degree, 3);
    }

    #[test]
    fn one_boundary_theta_has_genus_one() {
        // Same vertices, both rotations aligned: one boundary.
        let g = build::from_rotations(
            0,
            &[vec![0, 1, 2], vec![3, 4, 5]],
            &[(0, 3), (1, 4), (2, 5)],
            &[],
            &[0],
        );
        let m = g.metrics().unwrap();
        assert_eq!(m.num_boundaries, 1);
        assert_eq!(m.genus, 1);
    }

    #[test]
    fn single_edge_one_boundary() {
        let g = build::bracket_graph(0);
        let m = g.metrics().unwrap();
        assert_eq!(m.num_boundaries, 1);
        assert_eq!(m.genus, 0);
        assert_eq!(m.degree, 1);
    }

    #[test]
    fn tau_fixed_point_reported() {
        let mut g = build::bracket_graph(0);
        g.tau = vec![0, 1];
        let rep = g.validate();
        assert!(rep
            .violations
            .iter()
            .any(|v| v.contains("fixed-point-free")));
    }

    #[test]
    fn disconnected_reported() {
        // two disjoint loops at two white vertices
        let g = build::from_rotations(
            0,
            &[vec![0, 1], vec![2, 3]],
            &[(0, 1), (2, 3)],
            &[0, 2],
            &[0, 1, 2, 3],
        );
        let rep = g.validate();
        assert!(rep.violations.iter().any(|v| v.contains("connected")));
    }

    #[test]
    fn loop_stem_shape() {
        let g = build::loop_stem(0, false);
        assert!(g.validate().is_valid(), "{:?}", g.validate().violations);
        let m = g.metrics().unwrap();
        assert_eq!(m.num_edges, 2);
        assert_eq!(m.num_black, 1);
        assert_eq!(m.num_white, 1);
        assert_eq!(m.num_boundaries, 2);
        assert_eq!(m.genus, 0);
        assert_eq!(m.degree, 2);
    }

    #[test]
    fn euler_identity_on_samples() {
        for g in [
            build::theta(0, [0, 1, 2]),
            build::bracket_graph(0),
            build::white_loop(0, false),
            build::loop_stem(0, false),
        ] {
            let m = g.metrics().unwrap();
            let v = m.num_black + m.num_white;
            assert_eq!(
                2_i64 - 2 * m.genus as i64,
                v as i64 - m.num_edges as i64 + m.num_boundaries as i64
            );
            assert_eq!(g.num_half_edges(), 2 * m.num_edges);
        }
    }

    #[test]
    fn json_round_trip() {
        let g = build::loop_stem(0, true);
        let s = serde_json::to_string(&g).unwrap();
        let back: RibbonGraph = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
        // spot-check the wire shape
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert!(v.get("tau").is_some());
        assert!(v["white"].is_object());
        assert!(v["orientation"].get("edges").is_some());
    }

    #[test]
    fn json_round_trip_odd() {
        let g = build::theta(1, [0, 1, 2]);
        let s = serde_json::to_string(&g).unwrap();
        let back: RibbonGraph = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert!(v["orientation"].get("black_order").is_some());
    }
}

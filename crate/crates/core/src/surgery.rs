//! Boundary-into-vertex gluing surgery.
//!
//! All compositions and all terms of the twisting differential are instances
//! of one move: delete a vertex v of the outer graph, and re-attach its
//! half-edges to the vertices along a boundary walk of the inner graph, in
//! every way that matches the cyclic order at v against the walk order.
//! Orientations concatenate outer-first; nothing else about the two graphs
//! changes (no half-edge is created or destroyed).

use crate::ribbon::{Orientation, RibbonGraph};
use crate::{CoreError, Result};

/// A single glue point: the outer vertex is named by any half-edge on it, the
/// inner boundary by any half-edge on its walk.
#[derive(Clone, Debug)]
pub struct GluePoint {
    pub outer_vertex: usize,
    pub inner_boundary: usize,
    /// Per-slot minimum block sizes along the inner boundary walk, starting
    /// at `inner_boundary`. Empty means unconstrained.
    pub slot_minima: Vec<usize>,
}

impl GluePoint {
    pub fn new(outer_vertex: usize, inner_boundary: usize) -> GluePoint {
        GluePoint { outer_vertex, inner_boundary, slot_minima: vec![] }
    }
}

/// One glued outcome, before label assignment.
pub struct Glued {
    pub graph: RibbonGraph, // white/boundary labels left empty
    /// -1 when deleting a black outer vertex required moving it past an odd
    /// number of black vertices in the outer ordering.
    pub sign: i8,
    /// For each boundary orbit of `graph` (in `boundaries()` order): the outer
    /// boundary index it continues, or the inner boundary index.
    pub orbit_sources: Vec<OrbitSource>,
    /// The boundary orbits themselves, aligned with `orbit_sources`.
    pub orbits: Vec<Vec<usize>>,
    pub shift: usize, // inner half-edge h became h + shift
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrbitSource {
    Outer(usize),
    Inner(usize),
}

/// All weak compositions of `k` into `slots` parts.
fn compositions(k: usize, slots: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; slots];
    fn rec(rem: usize, idx: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if idx == cur.len() - 1 {
            cur[idx] = rem;
            out.push(cur.clone());
            return;
        }
        for take in 0..=rem {
            cur[idx] = take;
            rec(rem - take, idx + 1, cur, out);
        }
    }
    if slots == 0 {
        if k == 0 {
            out.push(vec![]);
        }
        return out;
    }
    rec(k, 0, &mut cur, &mut out);
    out
}

/// Cyclic-order-preserving placements of `items` (cyclic sequence) into
/// `slots` linear positions: a rotation of the items plus a weak composition.
/// `minima[s]` is a lower bound on the block size at slot s (all zero when
/// unconstrained).
fn placements(items: &[usize], minima: &[usize]) -> Vec<Vec<Vec<usize>>> {
    let k = items.len();
    let num_slots = minima.len();
    assert!(k >= 1, "glued vertices have at least one half-edge");
    let mut out = Vec::new();
    if minima.iter().sum::<usize>() > k {
        return out;
    }
    for c in 0..k {
        let rotated: Vec<usize> = (0..k).map(|i| items[(c + i) % k]).collect();
        for comp in compositions(k, num_slots) {
            if comp.iter().zip(minima).any(|(&got, &min)| got < min) {
                continue;
            }
            let mut per_slot = vec![Vec::new(); num_slots];
            let mut at = 0;
            for (s, &cnt) in comp.iter().enumerate() {
                per_slot[s] = rotated[at..at + cnt].to_vec();
                at += cnt;
            }
            out.push(per_slot);
        }
    }
    out
}

/// Core surgery. Returns one `Glued` per choice of placements at every glue
/// point. Points must name pairwise distinct outer vertices and pairwise
/// distinct inner boundaries. With no points the result is the disjoint union
/// (a bookkeeping intermediate, not itself a properad element).
pub fn glue(outer: &RibbonGraph, inner: &RibbonGraph, points: &[GluePoint]) -> Result<Vec<Glued>> {
    if outer.d != inner.d {
        return Err(CoreError::ArityMismatch(format!(
            "d parameters differ: {} vs {}",
            outer.d, inner.d
        )));
    }
    let shift = outer.num_half_edges();
    let hn = shift + inner.num_half_edges();

    let glued_reps: Vec<usize> = points.iter().map(|p| outer.vertex_rep(p.outer_vertex)).collect();
    {
        let mut seen = glued_reps.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != points.len() {
            return Err(CoreError::ArityMismatch("glue points repeat an outer vertex".into()));
        }
    }

    // Base sigma/tau of the union, with glued vertices' entries left dangling.
    let mut tau = vec![0usize; hn];
    let mut sigma_base = vec![usize::MAX; hn];
    for h in 0..shift {
        tau[h] = outer.tau[h];
        sigma_base[h] = outer.sigma[h];
    }
    for h in 0..inner.num_half_edges() {
        tau[shift + h] = shift + inner.tau[h];
        sigma_base[shift + h] = shift + inner.sigma[h];
    }
    let mut item_lists = Vec::new();
    let mut walks = Vec::new();
    for p in points {
        let items = outer.vertex_orbit(p.outer_vertex);
        for &x in &items {
            sigma_base[x] = usize::MAX; // to be reattached
        }
        let walk: Vec<usize> = inner
            .boundary_walk(p.inner_boundary)
            .into_iter()
            .map(|h| h + shift)
            .collect();
        item_lists.push(items);
        walks.push(walk);
    }

    // Outer boundary index per outer half-edge; inner likewise.
    let outer_bdry_of = boundary_index_map(outer);
    let inner_bdry_of = boundary_index_map(inner);
    let consumed: Vec<usize> = points.iter().map(|p| inner_bdry_of[p.inner_boundary]).collect();

    // Orientation concatenation (outer first) with black-deletion sign.
    let (orientation0, deletion_sign) =
        concat_orientation(outer, inner, shift, &glued_reps)?;

    // Cartesian product of placements across glue points.
    let mut all = vec![Vec::new()];
    for ((items, walk), point) in item_lists.iter().zip(&walks).zip(points) {
        let minima = if point.slot_minima.is_empty() {
            vec![0; walk.len()]
        } else {
            assert_eq!(point.slot_minima.len(), walk.len());
            point.slot_minima.clone()
        };
        let p = placements(items, &minima);
        let mut next = Vec::with_capacity(all.len() * p.len());
        for partial in &all {
            for choice in &p {
                let mut ext: Vec<Vec<Vec<usize>>> = partial.clone();
                ext.push(choice.clone());
                next.push(ext);
            }
        }
        all = next;
    }

    let mut out = Vec::new();
    for assignment in all {
        let mut sigma = sigma_base.clone();
        for (pi, per_slot) in assignment.iter().enumerate() {
            for (si, block) in per_slot.iter().enumerate() {
                if block.is_empty() {
                    continue;
                }
                let slot = walks[pi][si];
                // chain slot -> block[0] -> ... -> block[last] -> sigma(slot)
                let old_next = sigma[slot];
                sigma[slot] = block[0];
                for w in block.windows(2) {
                    sigma[w[0]] = w[1];
                }
                sigma[*block.last().unwrap()] = old_next;
            }
        }
        debug_assert!(sigma.iter().all(|&s| s != usize::MAX));

        let mut graph = RibbonGraph {
            d: outer.d,
            tau: tau.clone(),
            sigma,
            white: vec![],
            boundary: vec![],
            orientation: orientation0.clone(),
        };
        normalize_black_order(&mut graph);

        let orbits = graph.boundaries();
        let expect = outer.m() + inner.m() - points.len();
        assert_eq!(
            orbits.len(),
            expect,
            "gluing must produce m_outer + m_inner - #points boundaries"
        );
        let mut orbit_sources = Vec::with_capacity(orbits.len());
        for orbit in orbits.iter() {
            orbit_sources.push(classify_orbit(
                orbit,
                shift,
                &outer_bdry_of,
                &inner_bdry_of,
                &consumed,
            ));
        }
        // every boundary on either side must be continued exactly once
        debug_assert!({
            let mut seen_outer = vec![0usize; outer.m()];
            let mut seen_inner = vec![0usize; inner.m()];
            for s in &orbit_sources {
                match s {
                    OrbitSource::Outer(i) => seen_outer[*i] += 1,
                    OrbitSource::Inner(j) => seen_inner[*j] += 1,
                }
            }
            seen_outer.iter().all(|&c| c == 1)
                && seen_inner
                    .iter()
                    .enumerate()
                    .all(|(j, &c)| if consumed.contains(&j) { c == 0 } else { c == 1 })
        });

        out.push(Glued { graph, sign: deletion_sign, orbit_sources, orbits, shift });
    }
    Ok(out)
}

fn boundary_index_map(g: &RibbonGraph) -> Vec<usize> {
    let mut map = vec![usize::MAX; g.num_half_edges()];
    for (idx, &b) in g.boundary.iter().enumerate() {
        for h in g.boundary_walk(b) {
            map[h] = idx;
        }
    }
    map
}

fn classify_orbit(
    orbit: &[usize],
    shift: usize,
    outer_bdry_of: &[usize],
    inner_bdry_of: &[usize],
    consumed: &[usize],
) -> OrbitSource {
    // An untouched inner boundary keeps its orbit verbatim.
    for &h in orbit {
        if h >= shift {
            let j = inner_bdry_of[h - shift];
            if !consumed.contains(&j) {
                return OrbitSource::Inner(j);
            }
        }
    }
    // Otherwise the orbit continues exactly one outer boundary.
    let mut label = None;
    for &h in orbit {
        if h < shift {
            let i = outer_bdry_of[h];
            match label {
                None => label = Some(i),
                Some(prev) => assert_eq!(
                    prev, i,
                    "glued orbit mixes two outer boundaries; insertion convention broken"
                ),
            }
        }
    }
    OrbitSource::Outer(label.expect("glued orbit carries no source boundary"))
}

fn concat_orientation(
    outer: &RibbonGraph,
    inner: &RibbonGraph,
    shift: usize,
    glued_reps: &[usize],
) -> Result<(Orientation, i8)> {
    match (&outer.orientation, &inner.orientation) {
        (Orientation::Even { edges: a }, Orientation::Even { edges: b }) => {
            let mut edges = a.clone();
            edges.extend(b.iter().map(|&e| e + shift));
            Ok((Orientation::Even { edges }, 1))
        }
        (
            Orientation::Odd { black_order: a, edge_dirs: da },
            Orientation::Odd { black_order: b, edge_dirs: db },
        ) => {
            // Deleted black vertices are moved to the back (collecting a sign)
            // and dropped.
            let deleted: Vec<usize> = glued_reps
                .iter()
                .copied()
                .filter(|r| a.contains(r))
                .collect();
            let mut sign = 1i8;
            let mut order = Vec::with_capacity(a.len());
            let mut behind = 0usize;
            for &v in a.iter().rev() {
                if deleted.contains(&v) {
                    if behind % 2 == 1 {
                        sign = -sign;
                    }
                } else {
                    order.push(v);
                    behind += 1;
                }
            }
            order.reverse();
            order.extend(b.iter().map(|&v| v + shift));
            let mut edge_dirs = da.clone();
            edge_dirs.extend(db.iter().map(|&(x, y)| (x + shift, y + shift)));
            Ok((Orientation::Odd { black_order: order, edge_dirs }, sign))
        }
        _ => Err(CoreError::ArityMismatch("orientation parities differ".into())),
    }
}

/// Orientation lists carry vertex representatives; after surgery a vertex may
/// have gained a smaller half-edge, so re-normalize.
fn normalize_black_order(g: &mut RibbonGraph) {
    if let Orientation::Odd { black_order, .. } = &g.orientation {
        let fixed: Vec<usize> = black_order.iter().map(|&v| g.vertex_rep(v)).collect();
        g.orientation = match &g.orientation {
            Orientation::Odd { edge_dirs, .. } => {
                Orientation::Odd { black_order: fixed, edge_dirs: edge_dirs.clone() }
            }
            _ => unreachable!(),
        };
    }
}

/// Properadic partial composition: insert boundary `j` (0-based) of `inner`
/// into white vertex `i` (0-based) of `outer`. Boundary labels splice inner's
/// at position j, white labels splice inner's at position i. Returns all
/// redistribution outcomes with the deletion sign (always +1 here).
pub fn compose_one(
    outer: &RibbonGraph,
    i: usize,
    inner: &RibbonGraph,
    j: usize,
) -> Result<Vec<(RibbonGraph, i8)>> {
    if i >= outer.n() {
        return Err(CoreError::ArityMismatch(format!(
            "outer has {} white vertices, asked for {}",
            outer.n(),
            i + 1
        )));
    }
    if j >= inner.m() {
        return Err(CoreError::ArityMismatch(format!(
            "inner has {} boundaries, asked for {}",
            inner.m(),
            j + 1
        )));
    }
    let point = GluePoint::new(outer.white[i], inner.boundary[j]);
    let glued = glue(outer, inner, &[point])?;
    let shift = outer.num_half_edges();
    let mut out = Vec::with_capacity(glued.len());
    for gl in glued {
        let mut graph = gl.graph;
        // whites: outer 1..i-1, inner 1..n_i, outer i+1..
        let mut white = Vec::with_capacity(outer.n() + inner.n() - 1);
        white.extend_from_slice(&outer.white[..i]);
        white.extend(inner.white.iter().map(|&w| w + shift));
        white.extend_from_slice(&outer.white[i + 1..]);
        // boundaries: inner 1..j-1, outer 1..m_o, inner j+1..
        let mut boundary = vec![usize::MAX; outer.m() + inner.m() - 1];
        for (oi, src) in gl.orbit_sources.iter().enumerate() {
            let label = match *src {
                OrbitSource::Inner(jj) if jj < j => jj,
                OrbitSource::Inner(jj) => jj + outer.m() - 1,
                OrbitSource::Outer(ii) => j + ii,
            };
            boundary[label] = gl.orbits[oi][0];
        }
        graph.white = white;
        graph.boundary = boundary;
        out.push((graph, gl.sign));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ribbon::build;

    #[test]
    fn compositions_count() {
        assert_eq!(compositions(3, 2).len(), 4);
        assert_eq!(compositions(0, 3).len(), 1);
        assert_eq!(compositions(2, 1), vec![vec![2]]);
    }

    #[test]
    fn placements_count() {
        // k items into L slots: k * C(k+L-1, L-1)
        assert_eq!(placements(&[7], &[0, 0, 0]).len(), 3);
        assert_eq!(placements(&[4, 9], &[0, 0]).len(), 6);
        // minima prune
        assert_eq!(placements(&[4, 9], &[2, 2]).len(), 0);
        assert_eq!(placements(&[4, 9, 11], &[0, 2]).len(), 3 + 3);
    }

    #[test]
    fn bracket_into_bracket() {
        // composing the one-edge graph into a white vertex of the one-edge
        // graph gives path graphs on three whites
        let b = build::bracket_graph(0);
        let results = compose_one(&b, 0, &b, 0).unwrap();
        // white vertex 1 has one half-edge, inner boundary walk has length 2
        assert_eq!(results.len(), 2);
        for (g, sign) in &results {
            assert_eq!(*sign, 1);
            assert!(g.validate().is_valid(), "{:?}", g.validate().violations);
            let met = g.metrics().unwrap();
            assert_eq!(met.num_white, 3);
            assert_eq!(met.num_boundaries, 1);
            assert_eq!(met.genus, 0);
        }
    }

    #[test]
    fn loop_into_bracket_boundary_counts() {
        // every redistribution outcome must have m_o + m_i - 1 boundaries
        let lp = build::white_loop(0, false);
        let b = build::bracket_graph(0);
        let results = compose_one(&lp, 0, &b, 0).unwrap();
        assert_eq!(results.len(), 6);
        for (g, _) in &results {
            assert!(g.validate().is_valid(), "{:?}", g.validate().violations);
            assert_eq!(g.metrics().unwrap().num_boundaries, 2);
        }
    }

    #[test]
    fn trivalent_white_composition_boundaries() {
        // a valence-3 white vertex distributes over a longer walk; counts must
        // hold for every placement (this pins the insertion orientation)
        let star = build::from_rotations(
            0,
            &[vec![0, 1, 2], vec![3], vec![4], vec![5]],
            &[(0, 3), (1, 4), (2, 5)],
            &[0, 3, 4, 5],
            &[0],
        );
        assert!(star.validate().is_valid());
        let theta_w = build::from_rotations(
            0,
            &[vec![0, 1, 2], vec![3, 5, 4]],
            &[(0, 3), (1, 4), (2, 5)],
            &[0],
            &[1, 2, 0],
        );
        assert!(theta_w.validate().is_valid());
        let results = compose_one(&star, 0, &theta_w, 0).unwrap();
        assert!(!results.is_empty());
        for (g, _) in &results {
            assert!(g.validate().is_valid(), "{:?}", g.validate().violations);
            let met = g.metrics().unwrap();
            assert_eq!(met.num_boundaries, star.m() + theta_w.m() - 1);
            assert_eq!(met.genus, 0, "genus additivity");
        }
    }

    #[test]
    fn genus_additivity_with_genus_one_inner() {
        let one_bdry_theta = build::from_rotations(
            0,
            &[vec![0, 1, 2], vec![3, 4, 5]],
            &[(0, 3), (1, 4), (2, 5)],
            &[],
            &[0],
        );
        assert_eq!(one_bdry_theta.metrics().unwrap().genus, 1);
        let star = build::from_rotations(
            0,
            &[vec![0, 1], vec![2], vec![3]],
            &[(0, 2), (1, 3)],
            &[0, 2, 3],
            &[0],
        );
        let results = compose_one(&star, 0, &one_bdry_theta, 0).unwrap();
        for (g, _) in &results {
            assert!(g.validate().is_valid());
            let met = g.metrics().unwrap();
            assert_eq!(met.genus, 1);
            assert_eq!(met.num_boundaries, 1);
        }
    }
}

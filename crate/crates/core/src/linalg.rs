//! Exact sparse linear algebra: rank, kernel, solve and cohomology dimensions
//! over arbitrary-precision rationals and prime fields.
//!
//! Elimination is plain sparse Gaussian elimination with Markowitz pivot
//! selection (minimal fill-in estimate, ties broken by smallest coefficient
//! size). No floating point anywhere.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use rayon::prelude::*;

use crate::{CoreError, Result};

/// Exact field scalar.
pub trait Scalar: Clone + PartialEq + std::fmt::Debug + Send + Sync {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Pivot preference; smaller is better. Used only as a tie-break.
    fn magnitude(&self) -> u64;
}

impl Scalar for BigRational {
    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        <BigRational as One>::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn magnitude(&self) -> u64 {
        (self.numer().bits() + self.denom().bits()) as u64
    }
}

/// Element of Z/p for a word-sized prime (p < 2^31).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Fp {
    pub v: u64,
    pub p: u64,
}

impl Fp {
    pub fn new(v: i64, p: u64) -> Fp {
        Fp { v: v.rem_euclid(p as i64) as u64, p }
    }

    /// Reduce a rational mod p. None when the denominator vanishes mod p
    /// (an unlucky prime for this matrix).
    pub fn from_rational(q: &BigRational, p: u64) -> Option<Fp> {
        let pb = BigInt::from(p);
        let num = ((q.numer() % &pb) + &pb) % &pb;
        let den = ((q.denom() % &pb) + &pb) % &pb;
        let den = den.to_u64().unwrap();
        if den == 0 {
            return None;
        }
        let num = num.to_u64().unwrap();
        Some(Fp { v: num, p }.mul(&Fp { v: den, p }.inv()))
    }

    fn pow(self, mut e: u64) -> Fp {
        let mut base = self;
        let mut acc = Fp { v: 1, p: self.p };
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    pub fn inv(self) -> Fp {
        assert!(self.v != 0, "division by zero in Fp");
        self.pow(self.p - 2)
    }
}

impl Scalar for Fp {
    fn zero() -> Self {
        Fp { v: 0, p: 0 }
    }
    fn one() -> Self {
        Fp { v: 1, p: 0 }
    }
    fn is_zero(&self) -> bool {
        self.v == 0
    }
    fn add(&self, o: &Self) -> Self {
        let p = self.p.max(o.p);
        Fp { v: (self.v + o.v) % p, p }
    }
    fn sub(&self, o: &Self) -> Self {
        let p = self.p.max(o.p);
        Fp { v: (self.v + p - o.v % p) % p, p }
    }
    fn mul(&self, o: &Self) -> Self {
        let p = self.p.max(o.p);
        if self.v == 0 || o.v == 0 {
            return Fp { v: 0, p };
        }
        Fp { v: self.v * o.v % p, p }
    }
    fn div(&self, o: &Self) -> Self {
        let p = self.p.max(o.p);
        self.mul(&Fp { v: o.v, p }.inv())
    }
    fn neg(&self) -> Self {
        if self.v == 0 {
            *self
        } else {
            Fp { v: self.p - self.v, p: self.p }
        }
    }
    fn magnitude(&self) -> u64 {
        1
    }
}

/// Sparse matrix in triplet form; no explicit zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<S> {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, S)>,
}

impl<S: Scalar> SparseMatrix<S> {
    pub fn new(rows: usize, cols: usize) -> Self {
        SparseMatrix { rows, cols, entries: Vec::new() }
    }

    pub fn push(&mut self, r: usize, c: usize, v: S) {
        assert!(r < self.rows && c < self.cols, "entry out of range");
        if !v.is_zero() {
            self.entries.push((r, c, v));
        }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn transpose(&self) -> SparseMatrix<S> {
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            entries: self.entries.iter().map(|(r, c, v)| (*c, *r, v.clone())).collect(),
        }
    }

    /// Exact product other * self? No: `self.mul(&other)` is `self * other`.
    pub fn mul(&self, other: &SparseMatrix<S>) -> SparseMatrix<S> {
        assert_eq!(self.cols, other.rows);
        // rows of self, indexed
        let mut rows_of: Vec<Vec<(usize, S)>> = vec![Vec::new(); self.rows];
        for (r, c, v) in &self.entries {
            rows_of[*r].push((*c, v.clone()));
        }
        let mut rows_of_other: Vec<Vec<(usize, S)>> = vec![Vec::new(); other.rows];
        for (r, c, v) in &other.entries {
            rows_of_other[*r].push((*c, v.clone()));
        }
        let mut out = SparseMatrix::new(self.rows, other.cols);
        for r in 0..self.rows {
            let mut acc: BTreeMap<usize, S> = BTreeMap::new();
            for (k, a) in &rows_of[r] {
                for (c, b) in &rows_of_other[*k] {
                    let e = acc.entry(*c).or_insert_with(S::zero);
                    *e = e.add(&a.mul(b));
                }
            }
            for (c, v) in acc {
                if !v.is_zero() {
                    out.entries.push((r, c, v));
                }
            }
        }
        out
    }

    pub fn apply(&self, x: &[S]) -> Vec<S> {
        assert_eq!(self.cols, x.len());
        let mut out = vec![S::zero(); self.rows];
        for (r, c, v) in &self.entries {
            out[*r] = out[*r].add(&v.mul(&x[*c]));
        }
        out
    }

    pub fn is_zero_matrix(&self) -> bool {
        self.entries.iter().all(|(_, _, v)| v.is_zero())
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> SparseMatrix<T> {
        SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .map(|(r, c, v)| (*r, *c, f(v)))
                .filter(|(_, _, v)| !v.is_zero())
                .collect(),
        }
    }
}

impl SparseMatrix<BigRational> {
    /// Reduce mod p; None if p divides some denominator.
    pub fn mod_p(&self, p: u64) -> Option<SparseMatrix<Fp>> {
        let mut out = SparseMatrix::new(self.rows, self.cols);
        for (r, c, v) in &self.entries {
            let fv = Fp::from_rational(v, p)?;
            if !fv.is_zero() {
                out.entries.push((*r, *c, fv));
            }
        }
        Some(out)
    }
}

/// Integer triplet matrix: the differential matrices are integral, and the
/// word-sized fast path wants plain machine integers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(u32, u32, i64)>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize) -> IntMatrix {
        IntMatrix { rows, cols, entries: Vec::new() }
    }

    pub fn push(&mut self, r: usize, c: usize, v: i64) {
        assert!(r < self.rows && c < self.cols);
        if v != 0 {
            self.entries.push((r as u32, c as u32, v));
        }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero_matrix(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_rational(&self) -> SparseMatrix<BigRational> {
        SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .map(|&(r, c, v)| (r as usize, c as usize, BigRational::from(BigInt::from(v))))
                .collect(),
        }
    }

    /// Exact integer product self * other with overflow checks.
    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows);
        let mut rows_of_other: Vec<Vec<(u32, i64)>> = vec![Vec::new(); other.rows];
        for &(r, c, v) in &other.entries {
            rows_of_other[r as usize].push((c, v));
        }
        let mut rows_of_self: Vec<Vec<(u32, i64)>> = vec![Vec::new(); self.rows];
        for &(r, c, v) in &self.entries {
            rows_of_self[r as usize].push((c, v));
        }
        let mut out = IntMatrix::new(self.rows, other.cols);
        let products: Vec<Vec<(u32, i64)>> = rows_of_self
            .into_par_iter()
            .map(|row| {
                let mut acc: std::collections::HashMap<u32, i64> = std::collections::HashMap::new();
                for (k, a) in row {
                    for &(c, b) in &rows_of_other[k as usize] {
                        let term = a.checked_mul(b).expect("product overflow");
                        let e = acc.entry(c).or_insert(0);
                        *e = e.checked_add(term).expect("sum overflow");
                    }
                }
                let mut v: Vec<(u32, i64)> = acc.into_iter().filter(|&(_, x)| x != 0).collect();
                v.sort_unstable_by_key(|&(c, _)| c);
                v
            })
            .collect();
        for (r, row) in products.into_iter().enumerate() {
            for (c, v) in row {
                out.entries.push((r as u32, c, v));
            }
        }
        out
    }

    /// Rank over Z/p. Two phases: free "peeling" of singleton rows and
    /// columns (no arithmetic, no fill), then Markowitz-style elimination on
    /// the remaining core, re-peeling after every pivot.
    pub fn rank_mod(&self, p: u64) -> usize {
        let verbose = std::env::var("RG_RANK_VERBOSE").is_ok();
        let mut rows: Vec<Vec<(u32, u64)>> = vec![Vec::new(); self.rows];
        for &(r, c, v) in &self.entries {
            let m = v.rem_euclid(p as i64) as u64;
            if m != 0 {
                rows[r as usize].push((c, m));
            }
        }
        for row in rows.iter_mut() {
            row.sort_unstable_by_key(|&(c, _)| c);
        }
        let mut col_count = vec![0u32; self.cols.max(1)];
        for row in &rows {
            for &(c, _) in row {
                col_count[c as usize] += 1;
            }
        }
        // col -> rows appears in (lazily maintained: stale ids possible)
        let mut col_rows: Vec<Vec<u32>> = vec![Vec::new(); self.cols.max(1)];
        for (r, row) in rows.iter().enumerate() {
            for &(c, _) in row {
                col_rows[c as usize].push(r as u32);
            }
        }
        let mut row_done = vec![false; self.rows];
        let mut col_done = vec![false; self.cols.max(1)];
        let mut rank = 0usize;

        // retire a pivot row: its entries leave the active submatrix
        macro_rules! retire_row {
            ($r:expr) => {{
                let rr = $r;
                row_done[rr] = true;
                let old = std::mem::take(&mut rows[rr]);
                for &(c, _) in &old {
                    col_count[c as usize] -= 1;
                }
            }};
        }

        // peeling: singleton columns cost nothing; singleton rows only delete
        // entries in one column of other rows
        let mut peel_queue: Vec<u32> = (0..self.cols as u32).collect();
        let mut singleton_rows: Vec<u32> =
            rows.iter().enumerate().filter(|(_, r)| r.len() == 1).map(|(r, _)| r as u32).collect();
        loop {
            let mut progressed = false;
            while let Some(c) = peel_queue.pop() {
                let c = c as usize;
                if col_done[c] || col_count[c] != 1 {
                    continue;
                }
                // find its single active row
                col_rows[c].retain(|&r| !row_done[r as usize] && rows[r as usize].iter().any(|&(cc, _)| cc as usize == c));
                let Some(&r) = col_rows[c].first() else { continue };
                let r = r as usize;
                rank += 1;
                col_done[c] = true;
                let affected: Vec<u32> = rows[r].iter().map(|&(cc, _)| cc).collect();
                retire_row!(r);
                for cc in affected {
                    if !col_done[cc as usize] && col_count[cc as usize] == 1 {
                        peel_queue.push(cc);
                    }
                }
                progressed = true;
            }
            while let Some(r) = singleton_rows.pop() {
                let r = r as usize;
                if row_done[r] || rows[r].len() != 1 {
                    continue;
                }
                let (c, _) = rows[r][0];
                let c = c as usize;
                if col_done[c] {
                    continue;
                }
                rank += 1;
                col_done[c] = true;
                retire_row!(r);
                // delete the c-entries of every other active row
                let victims = std::mem::take(&mut col_rows[c]);
                for vr in victims {
                    let vr = vr as usize;
                    if row_done[vr] {
                        continue;
                    }
                    if let Some(pos) = rows[vr].iter().position(|&(cc, _)| cc as usize == c) {
                        rows[vr].remove(pos);
                        col_count[c] -= 1;
                        match rows[vr].len() {
                            0 => {}
                            1 => singleton_rows.push(vr as u32),
                            _ => {}
                        }
                        for &(cc, _) in rows[vr].iter() {
                            if col_count[cc as usize] == 1 {
                                peel_queue.push(cc);
                            }
                        }
                    }
                }
                progressed = true;
            }
            if !progressed {
                break;
            }
            // re-scan for singletons created indirectly
            peel_queue.extend(
                (0..self.cols as u32).filter(|&c| !col_done[c as usize] && col_count[c as usize] == 1),
            );
            singleton_rows.extend(
                (0..self.rows as u32)
                    .filter(|&r| !row_done[r as usize] && rows[r as usize].len() == 1),
            );
            if peel_queue.is_empty() && singleton_rows.is_empty() {
                break;
            }
        }
        if verbose {
            let nnz: usize = rows.iter().map(|r| r.len()).sum();
            eprintln!("rank_mod: after peel rank={rank} core nnz={nnz}");
        }

        // Markowitz core
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;
        let mut heap: BinaryHeap<(Reverse<usize>, u32)> = rows
            .iter()
            .enumerate()
            .filter(|(r, row)| !row_done[*r] && !row.is_empty())
            .map(|(r, row)| (Reverse(row.len()), r as u32))
            .collect();
        let mut steps = 0usize;
        while let Some((Reverse(len), r0)) = heap.pop() {
            let r0 = r0 as usize;
            if row_done[r0] || rows[r0].is_empty() {
                continue;
            }
            if rows[r0].len() != len {
                heap.push((Reverse(rows[r0].len()), r0 as u32));
                continue;
            }
            // gather a few shortest-row candidates, pick min Markowitz cost
            let mut cands = vec![r0];
            let mut stash = Vec::new();
            while cands.len() < 8 {
                match heap.pop() {
                    Some((Reverse(l), r)) => {
                        let r = r as usize;
                        if row_done[r] || rows[r].is_empty() {
                            continue;
                        }
                        if rows[r].len() != l {
                            heap.push((Reverse(rows[r].len()), r as u32));
                            continue;
                        }
                        cands.push(r);
                        stash.push(r);
                    }
                    None => break,
                }
            }
            let (pr, pc, cost) = cands
                .iter()
                .map(|&r| {
                    let (c, _) = rows[r]
                        .iter()
                        .copied()
                        .min_by_key(|&(c, _)| (col_count[c as usize], c))
                        .unwrap();
                    let cost =
                        (rows[r].len() as u64 - 1) * (col_count[c as usize] as u64 - 1);
                    (r, c as usize, cost)
                })
                .min_by_key(|&(r, c, cost)| (cost, r, c))
                .unwrap();
            for &r in &stash {
                if r != pr {
                    heap.push((Reverse(rows[r].len()), r as u32));
                }
            }
            if pr != r0 {
                heap.push((Reverse(rows[r0].len()), r0 as u32));
            }
            let _ = cost;

            rank += 1;
            steps += 1;
            col_done[pc] = true;
            let mut pivot_row = std::mem::take(&mut rows[pr]);
            row_done[pr] = true;
            for &(c, _) in &pivot_row {
                col_count[c as usize] -= 1;
            }
            // normalize pivot row
            let pv = pivot_row.iter().find(|&&(c, _)| c as usize == pc).unwrap().1;
            let pinv = fp_inv(pv, p);
            for e in pivot_row.iter_mut() {
                e.1 = mul_mod(e.1, pinv, p);
            }
            let victims = std::mem::take(&mut col_rows[pc]);
            for vr in victims {
                let vr = vr as usize;
                if vr == pr || row_done[vr] {
                    continue;
                }
                let Some(pos) = rows[vr].iter().position(|&(c, _)| c as usize == pc) else {
                    continue;
                };
                let factor = rows[vr][pos].1;
                let old = std::mem::take(&mut rows[vr]);
                for &(c, _) in &old {
                    col_count[c as usize] -= 1;
                }
                let mut merged = Vec::with_capacity(old.len() + pivot_row.len());
                let (mut i, mut j) = (0usize, 0usize);
                while i < old.len() || j < pivot_row.len() {
                    let both = i < old.len()
                        && j < pivot_row.len()
                        && old[i].0 == pivot_row[j].0;
                    if both {
                        let v = (old[i].1 + p - mul_mod(factor, pivot_row[j].1, p)) % p;
                        if v != 0 {
                            merged.push((old[i].0, v));
                        }
                        i += 1;
                        j += 1;
                    } else if j >= pivot_row.len()
                        || (i < old.len() && old[i].0 < pivot_row[j].0)
                    {
                        merged.push(old[i]);
                        i += 1;
                    } else {
                        let v = (p - mul_mod(factor, pivot_row[j].1, p)) % p;
                        if v != 0 {
                            merged.push((pivot_row[j].0, v));
                        }
                        j += 1;
                    }
                }
                for &(c, _) in &merged {
                    col_count[c as usize] += 1;
                    col_rows[c as usize].push(vr as u32);
                }
                let newlen = merged.len();
                rows[vr] = merged;
                if newlen > 0 {
                    heap.push((Reverse(newlen), vr as u32));
                }
            }
            if verbose && steps % 2000 == 0 {
                let nnz: usize = rows
                    .iter()
                    .enumerate()
                    .filter(|(r, _)| !row_done[*r])
                    .map(|(_, r)| r.len())
                    .sum();
                eprintln!("rank_mod: rank={rank} active nnz={nnz}");
            }
        }
        rank
    }

    /// Rank under the scalar policy. Modular ranks must agree; the rational
    /// rank is computed when requested (or when fewer than two primes are
    /// usable) and is authoritative.
    pub fn rank_verified(&self, policy: &ScalarPolicy) -> Result<(usize, String)> {
        let modular: Vec<(u64, usize)> =
            policy.primes.iter().map(|&p| (p, self.rank_mod(p))).collect();
        let agree = modular.len() >= 2 && modular.windows(2).all(|w| w[0].1 == w[1].1);
        if !policy.certify_rational && agree {
            return Ok((
                modular[0].1,
                format!(
                    "mod[{}]",
                    modular.iter().map(|(p, _)| p.to_string()).collect::<Vec<_>>().join(",")
                ),
            ));
        }
        let rq = rank(&self.to_rational());
        for &(p, rp) in &modular {
            if rp > rq {
                return Err(CoreError::InvalidGraph(format!(
                    "rank mod {p} exceeds rational rank: {rp} > {rq}"
                )));
            }
        }
        Ok((rq, "Q".to_string()))
    }
}

fn fp_inv(v: u64, p: u64) -> u64 {
    pow_mod(v, p - 2, p)
}

/// Internal elimination state: rows as sorted maps plus column occupancy.
struct Elim<S> {
    rows: Vec<BTreeMap<usize, S>>,
    col_rows: Vec<BTreeSet<usize>>,
    row_active: Vec<bool>,
    col_active: Vec<bool>,
    pivots: Vec<(usize, usize)>,
}

impl<S: Scalar> Elim<S> {
    fn new(m: &SparseMatrix<S>) -> Self {
        let mut rows: Vec<BTreeMap<usize, S>> = vec![BTreeMap::new(); m.rows];
        for (r, c, v) in &m.entries {
            let e = rows[*r].entry(*c).or_insert_with(S::zero);
            *e = e.add(v);
        }
        for row in rows.iter_mut() {
            row.retain(|_, v| !v.is_zero());
        }
        let mut col_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m.cols];
        for (r, row) in rows.iter().enumerate() {
            for &c in row.keys() {
                col_rows[c].insert(r);
            }
        }
        Elim {
            rows,
            col_rows,
            row_active: vec![true; m.rows],
            col_active: vec![true; m.cols],
            pivots: Vec::new(),
        }
    }

    /// Markowitz pivot: minimize (nnz(row)-1)*(nnz(col)-1), tie-break by
    /// scalar magnitude, then by position for determinism.
    fn pick_pivot(&self) -> Option<(usize, usize)> {
        let mut best: Option<(u64, u64, usize, usize)> = None;
        for (r, row) in self.rows.iter().enumerate() {
            if !self.row_active[r] || row.is_empty() {
                continue;
            }
            let rcount = row.len() as u64;
            for (&c, v) in row {
                if !self.col_active[c] {
                    continue;
                }
                let ccount = self.col_rows[c].len() as u64;
                let cost = (rcount - 1) * (ccount - 1);
                let key = (cost, v.magnitude(), r, c);
                if best.map_or(true, |b| key < b) {
                    best = Some(key);
                }
            }
        }
        best.map(|(_, _, r, c)| (r, c))
    }

    fn eliminate(&mut self) {
        while let Some((pr, pc)) = self.pick_pivot() {
            self.pivots.push((pr, pc));
            let pivot_val = self.rows[pr][&pc].clone();
            let victims: Vec<usize> = self
                .col_rows[pc]
                .iter()
                .copied()
                .filter(|&r| r != pr && self.row_active[r])
                .collect();
            let pivot_row: Vec<(usize, S)> =
                self.rows[pr].iter().map(|(c, v)| (*c, v.clone())).collect();
            for r in victims {
                let factor = self.rows[r][&pc].div(&pivot_val);
                for (c, pv) in &pivot_row {
                    let sub = factor.mul(pv);
                    let cur = self.rows[r].remove(c).unwrap_or_else(S::zero);
                    let nv = cur.sub(&sub);
                    if nv.is_zero() {
                        self.col_rows[*c].remove(&r);
                    } else {
                        self.rows[r].insert(*c, nv);
                        self.col_rows[*c].insert(r);
                    }
                }
            }
            self.row_active[pr] = false;
            self.col_active[pc] = false;
            for &c in self.rows[pr].keys() {
                self.col_rows[c].remove(&pr);
            }
        }
    }
}

/// Exact rank.
pub fn rank<S: Scalar>(m: &SparseMatrix<S>) -> usize {
    let mut e = Elim::new(m);
    e.eliminate();
    e.pivots.len()
}

/// Solve M x = b exactly; None when inconsistent. Free variables are zero.
pub fn solve<S: Scalar>(m: &SparseMatrix<S>, b: &[S]) -> Option<Vec<S>> {
    assert_eq!(b.len(), m.rows);
    // augmented column at index m.cols, excluded from pivoting
    let mut aug = SparseMatrix::new(m.rows, m.cols + 1);
    aug.entries = m.entries.clone();
    for (r, v) in b.iter().enumerate() {
        if !v.is_zero() {
            aug.entries.push((r, m.cols, v.clone()));
        }
    }
    let mut e = Elim::new(&aug);
    e.col_active[m.cols] = false; // never pivot on b
    e.eliminate();
    // rows left with only the augmented entry mean inconsistency
    for (r, row) in e.rows.iter().enumerate() {
        if e.row_active[r] && !row.is_empty() {
            if row.len() == 1 && row.contains_key(&m.cols) {
                return None;
            }
        }
    }
    // back-substitute in reverse pivot order
    let mut x = vec![S::zero(); m.cols];
    for &(pr, pc) in e.pivots.iter().rev() {
        let row = &e.rows[pr];
        let mut acc = row.get(&m.cols).cloned().unwrap_or_else(S::zero);
        for (&c, v) in row {
            if c != pc && c != m.cols {
                acc = acc.sub(&v.mul(&x[c]));
            }
        }
        x[pc] = acc.div(&row[&pc]);
    }
    Some(x)
}

/// Sparse basis of the kernel (column vectors as (index, value) lists),
/// echelonized over the free columns in ascending order.
pub fn kernel_basis<S: Scalar>(m: &SparseMatrix<S>) -> Vec<Vec<(usize, S)>> {
    let mut e = Elim::new(m);
    e.eliminate();
    let pivot_cols: BTreeMap<usize, usize> = e.pivots.iter().map(|&(r, c)| (c, r)).collect();
    // Reduce pivot rows to reduced row-echelon implicitly: for each free column
    // f, solve for pivot variables with x_f = 1, other free vars 0.
    let mut free_cols: Vec<usize> = (0..m.cols).filter(|c| !pivot_cols.contains_key(c)).collect();
    free_cols.sort_unstable();
    let mut basis = Vec::with_capacity(free_cols.len());
    // order pivots so later pivot rows only involve earlier-solved variables:
    // solve in reverse elimination order.
    for &f in &free_cols {
        let mut x: BTreeMap<usize, S> = BTreeMap::new();
        x.insert(f, S::one());
        for &(pr, pc) in e.pivots.iter().rev() {
            let row = &e.rows[pr];
            let mut acc = S::zero();
            for (&c, v) in row {
                if c != pc {
                    if let Some(xv) = x.get(&c) {
                        acc = acc.add(&v.mul(xv));
                    }
                }
            }
            if !acc.is_zero() {
                let val = acc.neg().div(&row[&pc]);
                x.insert(pc, val);
            }
        }
        basis.push(x.into_iter().filter(|(_, v)| !v.is_zero()).collect());
    }
    basis
}

/// Indices of a maximal independent set of columns, ascending (greedy from the
/// left, so the choice is deterministic).
pub fn independent_columns<S: Scalar>(m: &SparseMatrix<S>) -> Vec<usize> {
    // Gaussian elimination on columns in order: keep a set of reduced rows.
    // For graph-complex sizes this O(cols * rank) pass is fine.
    let mut cols_of: Vec<Vec<(usize, S)>> = vec![Vec::new(); m.cols];
    for (r, c, v) in &m.entries {
        cols_of[*c].push((*r, v.clone()));
    }
    let mut reduced: Vec<BTreeMap<usize, S>> = Vec::new(); // each with a lead row
    let mut leads: Vec<usize> = Vec::new();
    let mut picked = Vec::new();
    for c in 0..m.cols {
        let mut vec: BTreeMap<usize, S> = BTreeMap::new();
        for (r, v) in &cols_of[c] {
            let e = vec.entry(*r).or_insert_with(S::zero);
            *e = e.add(v);
        }
        vec.retain(|_, v| !v.is_zero());
        for (red, &lead) in reduced.iter().zip(&leads) {
            if let Some(coef) = vec.get(&lead).cloned() {
                let factor = coef.div(&red[&lead]);
                for (r, v) in red {
                    let cur = vec.remove(r).unwrap_or_else(S::zero);
                    let nv = cur.sub(&factor.mul(v));
                    if !nv.is_zero() {
                        vec.insert(*r, nv);
                    }
                }
            }
        }
        if !vec.is_empty() {
            let lead = *vec.keys().next().unwrap();
            leads.push(lead);
            reduced.push(vec);
            picked.push(c);
        }
    }
    picked
}

/// Deterministic ~30-bit primes drawn from a seeded RNG.
pub fn random_primes(seed: u64, count: usize) -> Vec<u64> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let cand: u64 = rng.gen_range((1 << 29)..(1 << 30)) | 1;
        if is_prime_u64(cand) && !out.contains(&cand) {
            out.push(cand);
        }
    }
    out
}

fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    // deterministic Miller-Rabin for u64 with the standard witness set
    let d = (n - 1) >> (n - 1).trailing_zeros();
    let s = (n - 1).trailing_zeros();
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a % n, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    a %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, a, m);
        }
        a = mul_mod(a, a, m);
        e >>= 1;
    }
    acc
}

/// How ranks get verified.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalarPolicy {
    pub primes: Vec<u64>,
    pub certify_rational: bool,
}

impl ScalarPolicy {
    pub fn from_seed(seed: u64, certify_rational: bool) -> ScalarPolicy {
        ScalarPolicy { primes: random_primes(seed, 2), certify_rational }
    }

    pub fn rational_only() -> ScalarPolicy {
        ScalarPolicy { primes: vec![], certify_rational: true }
    }
}

/// Rank of an integral/rational matrix under the policy. Returns the rank and
/// a descriptor of how it was verified.
pub fn rank_verified(m: &SparseMatrix<BigRational>, policy: &ScalarPolicy) -> Result<(usize, String)> {
    let mut modular: Vec<(u64, usize)> = Vec::new();
    for &p in &policy.primes {
        match m.mod_p(p) {
            Some(mp) => modular.push((p, rank(&mp))),
            None => {
                // unlucky prime: a denominator vanishes mod p
                continue;
            }
        }
    }
    let agree = modular.len() >= 2 && modular.windows(2).all(|w| w[0].1 == w[1].1);
    if !policy.certify_rational && agree {
        let desc = format!(
            "mod[{}]",
            modular.iter().map(|(p, _)| p.to_string()).collect::<Vec<_>>().join(",")
        );
        return Ok((modular[0].1, desc));
    }
    let rq = rank(m);
    for &(p, rp) in &modular {
        if rp > rq {
            return Err(CoreError::InvalidGraph(format!(
                "rank mod {p} exceeds rational rank: {rp} > {rq}"
            )));
        }
    }
    let all_match = modular.iter().all(|&(_, rp)| rp == rq);
    let desc = if modular.is_empty() {
        "Q".to_string()
    } else if all_match {
        format!(
            "Q+mod[{}]",
            modular.iter().map(|(p, _)| p.to_string()).collect::<Vec<_>>().join(",")
        )
    } else {
        "Q (modular mismatch, rational value used)".to_string()
    };
    Ok((rq, desc))
}

/// Cohomology dimensions of one signature family, degree by degree.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CohomologyTable {
    pub d: i64,
    pub m: usize,
    pub n: usize,
    pub genus: usize,
    /// degree -> dimension
    pub dims: BTreeMap<i64, usize>,
    /// degree -> basis dimension
    pub basis_dims: BTreeMap<i64, usize>,
    pub scalar_domain: String,
    pub verified: BTreeMap<i64, String>,
    /// true when the valence->=3 regime was used (complete complex), false for
    /// the full complex truncated by caps
    pub trivalent_regime: bool,
    /// degrees whose dimension could not be certified within caps
    pub gaps: Vec<i64>,
}

impl CohomologyTable {
    pub fn csv(&self) -> String {
        let mut out = String::from("d,m,n,g,degree,dimension,verified\n");
        for (deg, dim) in &self.dims {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.d,
                self.m,
                self.n,
                self.genus,
                deg,
                dim,
                self.verified.get(deg).map(String::as_str).unwrap_or("")
            ));
        }
        out
    }
}

/// Compute H(Tw RGra_d^{>=3}(m,n;g)) (or of the full complex under caps).
/// Lives here per the module map; orchestrates basis + differential.
pub fn cohomology(
    d: i64,
    m: usize,
    n: usize,
    genus: usize,
    trivalent: bool,
    limits: &crate::basis::EnumLimits,
    policy: &ScalarPolicy,
) -> Result<CohomologyTable> {
    crate::differential::cohomology_table(d, m, n, genus, trivalent, limits, policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn rank_zero_and_identity() {
        let z: SparseMatrix<BigRational> = SparseMatrix::new(4, 5);
        assert_eq!(rank(&z), 0);
        let mut id = SparseMatrix::new(3, 3);
        for i in 0..3 {
            id.push(i, i, q(1, 1));
        }
        assert_eq!(rank(&id), 3);
    }

    #[test]
    fn rank_dependent_rows() {
        let mut m = SparseMatrix::new(3, 3);
        m.push(0, 0, q(1, 1));
        m.push(0, 1, q(2, 1));
        m.push(1, 0, q(2, 1));
        m.push(1, 1, q(4, 1));
        m.push(2, 2, q(5, 1));
        assert_eq!(rank(&m), 2);
    }

    #[test]
    fn solve_simple() {
        // x + 2y = 5 ; 3y = 3
        let mut m = SparseMatrix::new(2, 2);
        m.push(0, 0, q(1, 1));
        m.push(0, 1, q(2, 1));
        m.push(1, 1, q(3, 1));
        let x = solve(&m, &[q(5, 1), q(3, 1)]).unwrap();
        assert_eq!(x, vec![q(3, 1), q(1, 1)]);
        // inconsistent
        let mut m2 = SparseMatrix::new(2, 1);
        m2.push(0, 0, q(1, 1));
        m2.push(1, 0, q(1, 1));
        assert!(solve(&m2, &[q(1, 1), q(2, 1)]).is_none());
        // zero system
        let z: SparseMatrix<BigRational> = SparseMatrix::new(2, 2);
        assert_eq!(solve(&z, &[q(0, 1), q(0, 1)]).unwrap(), vec![q(0, 1), q(0, 1)]);
    }

    #[test]
    fn kernel_dimension() {
        // 1x3 matrix [1 1 1]: kernel dim 2, and rank + kernel = cols
        let mut m = SparseMatrix::new(1, 3);
        for c in 0..3 {
            m.push(0, c, q(1, 1));
        }
        let k = kernel_basis(&m);
        assert_eq!(k.len(), 2);
        assert_eq!(rank(&m) + k.len(), 3);
        for v in &k {
            let mut dense = vec![q(0, 1); 3];
            for (i, val) in v {
                dense[*i] = val.clone();
            }
            let img = m.apply(&dense);
            assert!(img.iter().all(|x| Scalar::is_zero(x)));
        }
    }

    #[test]
    fn modular_rank_matches() {
        let mut m = SparseMatrix::new(3, 4);
        m.push(0, 0, q(1, 2));
        m.push(0, 2, q(7, 3));
        m.push(1, 1, q(-4, 1));
        m.push(2, 0, q(1, 1));
        m.push(2, 2, q(14, 3));
        let primes = random_primes(7, 2);
        for p in primes {
            let mp = m.mod_p(p).unwrap();
            assert_eq!(rank(&mp), rank(&m));
        }
    }

    #[test]
    fn independent_columns_picks_leftmost() {
        let mut m = SparseMatrix::new(2, 3);
        m.push(0, 0, q(1, 1));
        m.push(0, 1, q(1, 1)); // col1 = col0
        m.push(1, 0, q(1, 1));
        m.push(1, 1, q(1, 1));
        m.push(1, 2, q(1, 1));
        assert_eq!(independent_columns(&m), vec![0, 2]);
    }

    #[test]
    fn primes_are_prime_and_deterministic() {
        let a = random_primes(11, 3);
        let b = random_primes(11, 3);
        assert_eq!(a, b);
        for p in a {
            assert!(is_prime_u64(p));
            assert!(p > (1 << 16));
        }
    }
}

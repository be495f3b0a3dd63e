//! Equioriented `A_n` quivers: iso-classes of finite-dimensional
//! representations and their coordinate subrepresentations.
//!
//! Vertices are `1..=n` with one arrow `i → i+1`. Every indecomposable is an
//! interval module `[a,b]` (one-dimensional on vertices `a..=b`, identity
//! along the arrows inside, zero outside), so an iso-class is a multiset of
//! intervals. Submodules spanned by subsets of the canonical interval basis
//! are exactly the suffix choices `[c,b] ⊆ [a,b]` per summand; they are the
//! fixed points of the torus rescaling the summands, so integration against
//! Euler characteristic reduces to counting them. All Hall-algebra weights in
//! this crate are such fixed-point counts, hence exact integers.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dimension vector (class in the Grothendieck group), indexed by vertex.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DimVec(pub Vec<u32>);

impl DimVec {
    pub fn zeros(n: usize) -> Self {
        DimVec(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![0; n];
        v[i] = 1;
        DimVec(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    pub fn add(&self, other: &DimVec) -> DimVec {
        DimVec(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Componentwise subtraction, `None` if any component would go negative.
    pub fn checked_sub(&self, other: &DimVec) -> Option<DimVec> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(DimVec)
    }

    pub fn leq(&self, other: &DimVec) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// All nonzero vectors `v` with `v ≤ self` componentwise, ascending.
    pub fn positive_subvectors(&self) -> Vec<DimVec> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; self.0.len()];
        loop {
            // odometer increment
            let mut i = 0;
            loop {
                if i == cur.len() {
                    return out;
                }
                if cur[i] < self.0[i] {
                    cur[i] += 1;
                    for c in cur.iter_mut().take(i) {
                        *c = 0;
                    }
                    break;
                }
                i += 1;
            }
            out.push(DimVec(cur.clone()));
        }
    }

    /// `true` if `self = q·other` for some positive rational `q`.
    pub fn proportional(&self, other: &DimVec) -> bool {
        // cross-multiply all component pairs
        for i in 0..self.0.len() {
            for j in 0..self.0.len() {
                if self.0[i] as u64 * other.0[j] as u64 != self.0[j] as u64 * other.0[i] as u64 {
                    return false;
                }
            }
        }
        true
    }
}

impl fmt::Debug for DimVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for DimVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// An interval `[a,b]` with `1 ≤ a ≤ b ≤ n`, naming an indecomposable.
pub type Interval = (u8, u8);

/// An iso-class of representations: a sorted multiset of intervals.
/// The empty multiset is the zero module.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IsoClass {
    intervals: Vec<Interval>,
}

impl IsoClass {
    pub fn zero() -> Self {
        IsoClass { intervals: vec![] }
    }

    pub fn new(mut intervals: Vec<Interval>) -> Self {
        intervals.sort_unstable();
        IsoClass { intervals }
    }

    pub fn interval(a: u8, b: u8) -> Self {
        debug_assert!(a <= b);
        IsoClass {
            intervals: vec![(a, b)],
        }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_zero(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Nonzero with a single summand.
    pub fn is_indecomposable(&self) -> bool {
        self.intervals.len() == 1
    }

    pub fn total_dim(&self) -> u32 {
        self.intervals
            .iter()
            .map(|&(a, b)| (b - a + 1) as u32)
            .sum()
    }

    pub fn class(&self, n: usize) -> DimVec {
        let mut v = vec![0u32; n];
        for &(a, b) in &self.intervals {
            for i in a..=b {
                v[(i - 1) as usize] += 1;
            }
        }
        DimVec(v)
    }

    pub fn direct_sum(&self, other: &IsoClass) -> IsoClass {
        let mut intervals = self.intervals.clone();
        intervals.extend_from_slice(&other.intervals);
        IsoClass::new(intervals)
    }
}

impl fmt::Debug for IsoClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "0");
        }
        for (i, (a, b)) in self.intervals.iter().enumerate() {
            if i > 0 {
                write!(f, "+")?;
            }
            write!(f, "[{a},{b}]")?;
        }
        Ok(())
    }
}

impl fmt::Display for IsoClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// The equioriented `A_n` quiver, with caches for iso-class enumeration and
/// coordinate-subrepresentation lists (write-once, safe under concurrent
/// reads).
#[derive(Clone)]
pub struct QuiverSpec {
    n: usize,
    caches: Arc<Caches>,
}

#[derive(Default)]
struct Caches {
    classes: RwLock<HashMap<DimVec, Arc<Vec<IsoClass>>>>,
    subreps: RwLock<HashMap<IsoClass, Arc<Vec<(IsoClass, IsoClass)>>>>,
}

impl QuiverSpec {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::domain(format!("quiver rank {n} out of range 1..=64")));
        }
        Ok(QuiverSpec {
            n,
            caches: Arc::new(Caches::default()),
        })
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    /// All intervals `[a,b]`, i.e. the indecomposables, in lexicographic order.
    pub fn all_intervals(&self) -> Vec<Interval> {
        let n = self.n as u8;
        let mut out = Vec::new();
        for a in 1..=n {
            for b in a..=n {
                out.push((a, b));
            }
        }
        out
    }

    /// All iso-classes of the given class, lexicographically ordered.
    pub fn iso_classes(&self, class: &DimVec) -> Arc<Vec<IsoClass>> {
        if let Some(hit) = self.caches.classes.read().unwrap().get(class) {
            return hit.clone();
        }
        let mut out = Vec::new();
        let intervals = self.all_intervals();
        let mut acc: Vec<Interval> = Vec::new();
        self.enum_rec(&intervals, 0, class.clone(), &mut acc, &mut out);
        out.sort();
        let arc = Arc::new(out);
        self.caches
            .classes
            .write()
            .unwrap()
            .insert(class.clone(), arc.clone());
        arc
    }

    fn enum_rec(
        &self,
        intervals: &[Interval],
        idx: usize,
        remaining: DimVec,
        acc: &mut Vec<Interval>,
        out: &mut Vec<IsoClass>,
    ) {
        if remaining.is_zero() {
            out.push(IsoClass::new(acc.clone()));
            return;
        }
        if idx == intervals.len() {
            return;
        }
        let (a, b) = intervals[idx];
        let iv_class = IsoClass::interval(a, b).class(self.n);
        // take k ≥ 0 copies of this interval
        let mut rem = remaining.clone();
        let mut taken = 0;
        loop {
            self.enum_rec(intervals, idx + 1, rem.clone(), acc, out);
            match rem.checked_sub(&iv_class) {
                Some(r) => {
                    rem = r;
                    acc.push((a, b));
                    taken += 1;
                }
                None => break,
            }
        }
        for _ in 0..taken {
            acc.pop();
        }
    }

    /// All iso-classes with `1 ≤ total ≤ d`, grouped lexicographically.
    pub fn iso_classes_up_to(&self, d: u32) -> Vec<IsoClass> {
        let mut out = Vec::new();
        for class in self.classes_up_to(d) {
            out.extend(self.iso_classes(&class).iter().cloned());
        }
        out
    }

    /// All nonzero classes with total ≤ d, ascending.
    pub fn classes_up_to(&self, d: u32) -> Vec<DimVec> {
        fn rec(n: usize, i: usize, d_left: u32, cur: &mut Vec<u32>, out: &mut Vec<DimVec>) {
            if i == n {
                let v = DimVec(cur.clone());
                if !v.is_zero() {
                    out.push(v);
                }
                return;
            }
            for x in 0..=d_left {
                cur.push(x);
                rec(n, i + 1, d_left - x, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(self.n, 0, d, &mut Vec::new(), &mut out);
        out.sort();
        out
    }

    /// All coordinate subrepresentations of `m`: submodules spanned by
    /// subsets of the canonical interval basis, listed as
    /// `(sub iso-class, quotient iso-class)` pairs, one entry per fixed
    /// point (repeats are meaningful — they are Euler-characteristic
    /// weights). Per summand `[a,b]` the choices are the suffixes `[c,b]`,
    /// `a ≤ c ≤ b+1`, with quotient `[a,c−1]`.
    pub fn coordinate_subreps(&self, m: &IsoClass) -> Arc<Vec<(IsoClass, IsoClass)>> {
        if let Some(hit) = self.caches.subreps.read().unwrap().get(m) {
            return hit.clone();
        }
        let summands = m.intervals();
        let k = summands.len();
        let mut out = Vec::new();
        // odometer over per-summand cut positions c ∈ a..=b+1
        let mut cuts: Vec<u8> = summands.iter().map(|&(a, _)| a).collect();
        loop {
            let mut sub = Vec::new();
            let mut quot = Vec::new();
            for (i, &(a, b)) in summands.iter().enumerate() {
                let c = cuts[i];
                if c <= b {
                    sub.push((c, b));
                }
                if c > a {
                    quot.push((a, c - 1));
                }
            }
            out.push((IsoClass::new(sub), IsoClass::new(quot)));
            // increment odometer
            let mut i = 0;
            loop {
                if i == k {
                    let arc = Arc::new(out);
                    self.caches
                        .subreps
                        .write()
                        .unwrap()
                        .insert(m.clone(), arc.clone());
                    return arc;
                }
                if cuts[i] <= summands[i].1 {
                    cuts[i] += 1;
                    for j in 0..i {
                        cuts[j] = summands[j].0;
                    }
                    break;
                }
                i += 1;
            }
        }
    }

    /// Reference oracle: the set of classes of **all** subrepresentations of
    /// `m`, found by exhaustive subspace enumeration over the two-element
    /// field. Existence of a subrepresentation of a given class is
    /// field-independent for Dynkin quivers, so this certifies the
    /// coordinate-subrepresentation enumeration. Exponential in `dim m`;
    /// intended for small modules in tests.
    pub fn subrep_classes_bruteforce(&self, m: &IsoClass) -> BTreeSet<DimVec> {
        let n = self.n;
        // basis layout: vertex i gets one slot per interval covering i
        let summands = m.intervals();
        let mut vdim = vec![0usize; n];
        // slot index of (summand, vertex)
        let mut slot = HashMap::new();
        for (k, &(a, b)) in summands.iter().enumerate() {
            for v in a..=b {
                let vi = (v - 1) as usize;
                slot.insert((k, v), vdim[vi]);
                vdim[vi] += 1;
            }
        }
        // arrow matrices as bit-columns: x[i][col] = image bitmask in vertex i+1
        let mut x: Vec<Vec<u32>> = (0..n.saturating_sub(1))
            .map(|i| vec![0u32; vdim[i]])
            .collect();
        for (k, &(a, b)) in summands.iter().enumerate() {
            for v in a..b {
                let vi = (v - 1) as usize;
                let from = slot[&(k, v)];
                let to = slot[&(k, v + 1)];
                x[vi][from] |= 1 << to;
            }
        }
        let per_vertex: Vec<Vec<Vec<u32>>> =
            vdim.iter().map(|&d| all_subspaces_f2(d)).collect();
        let mut found = BTreeSet::new();
        // odometer over subspace choices per vertex
        let mut idx = vec![0usize; n];
        'outer: loop {
            let choice: Vec<&Vec<u32>> = (0..n).map(|i| &per_vertex[i][idx[i]]).collect();
            let mut ok = true;
            for i in 0..n.saturating_sub(1) {
                for &row in choice[i] {
                    let mut img = 0u32;
                    for c in 0..vdim[i] {
                        if row >> c & 1 == 1 {
                            img ^= x[i][c];
                        }
                    }
                    if !in_span_f2(img, choice[i + 1]) {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    break;
                }
            }
            if ok {
                found.insert(DimVec(
                    choice.iter().map(|basis| basis.len() as u32).collect(),
                ));
            }
            let mut i = 0;
            loop {
                if i == n {
                    break 'outer;
                }
                idx[i] += 1;
                if idx[i] < per_vertex[i].len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
        }
        found
    }
}

/// All subspaces of `F_2^m` as reduced-row-echelon bases (bitmask rows).
fn all_subspaces_f2(m: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for pivots in 1u32..1 << m {
        let pcols: Vec<usize> = (0..m).filter(|&c| pivots >> c & 1 == 1).collect();
        // free positions per row: columns > pivot, not pivots themselves
        let free: Vec<Vec<usize>> = pcols
            .iter()
            .map(|&p| {
                (p + 1..m)
                    .filter(|c| pivots >> c & 1 == 0)
                    .collect::<Vec<_>>()
            })
            .collect();
        let total_free: usize = free.iter().map(|f| f.len()).sum();
        for fill in 0u32..1 << total_free {
            let mut rows = Vec::with_capacity(pcols.len());
            let mut bit = 0;
            for (r, &p) in pcols.iter().enumerate() {
                let mut row = 1u32 << p;
                for &c in &free[r] {
                    if fill >> bit & 1 == 1 {
                        row |= 1 << c;
                    }
                    bit += 1;
                }
                rows.push(row);
            }
            out.push(rows);
        }
    }
    out
}

/// Membership of a vector in the span of echelon basis rows over `F_2`.
fn in_span_f2(mut v: u32, basis: &[u32]) -> bool {
    for &row in basis {
        let pivot = row.trailing_zeros();
        if v >> pivot & 1 == 1 {
            v ^= row;
        }
    }
    v == 0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a2() -> QuiverSpec {
        QuiverSpec::new(2).unwrap()
    }

    #[test]
    fn iso_classes_of_class_1_1_on_a2() {
        let q = a2();
        let got = q.iso_classes(&DimVec(vec![1, 1]));
        let want = vec![
            IsoClass::interval(1, 2),
            IsoClass::new(vec![(1, 1), (2, 2)]),
        ];
        let mut got: Vec<_> = got.iter().cloned().collect();
        got.sort();
        let mut want = want;
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn coordinate_subreps_of_projective_on_a2() {
        // [1,2] has submodule lattice 0 ⊂ [2,2] ⊂ [1,2].
        let q = a2();
        let p = IsoClass::interval(1, 2);
        let got = q.coordinate_subreps(&p);
        let mut got: Vec<_> = got.iter().cloned().collect();
        got.sort();
        let mut want = vec![
            (IsoClass::zero(), p.clone()),
            (IsoClass::interval(2, 2), IsoClass::interval(1, 1)),
            (p.clone(), IsoClass::zero()),
        ];
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn coordinate_subreps_of_semisimple_on_a2() {
        let q = a2();
        let m = IsoClass::new(vec![(1, 1), (2, 2)]);
        let got = q.coordinate_subreps(&m);
        assert_eq!(got.len(), 4);
        let s1 = IsoClass::interval(1, 1);
        let s2 = IsoClass::interval(2, 2);
        let mut got: Vec<_> = got.iter().cloned().collect();
        got.sort();
        let mut want = vec![
            (IsoClass::zero(), m.clone()),
            (s1.clone(), s2.clone()),
            (s2.clone(), s1.clone()),
            (m.clone(), IsoClass::zero()),
        ];
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn repeated_summands_weight_fixed_points() {
        // S1 ⊕ S1 has χ(Gr of lines) = 2 coordinate lines.
        let q = a2();
        let m = IsoClass::new(vec![(1, 1), (1, 1)]);
        let subs = q.coordinate_subreps(&m);
        let line = IsoClass::interval(1, 1);
        let count = subs
            .iter()
            .filter(|(a, b)| *a == line && *b == line)
            .count();
        assert_eq!(count, 2);
    }

    #[test]
    fn bruteforce_subrep_classes_match_coordinate_classes_small() {
        for n in [2usize, 3] {
            let q = QuiverSpec::new(n).unwrap();
            for class in q.classes_up_to(4) {
                for m in q.iso_classes(&class).iter() {
                    let brute = q.subrep_classes_bruteforce(m);
                    let coord: BTreeSet<DimVec> = q
                        .coordinate_subreps(m)
                        .iter()
                        .map(|(a, _)| a.class(n))
                        .collect();
                    assert_eq!(brute, coord, "mismatch for {m:?}");
                }
            }
        }
    }

    #[test]
    fn classes_up_to_counts() {
        let q = a2();
        let classes = q.classes_up_to(2);
        // (1,0) (0,1) (2,0) (1,1) (0,2)
        assert_eq!(classes.len(), 5);
    }

    #[test]
    fn isoclass_json_shape() {
        let m = IsoClass::new(vec![(2, 3), (1, 1)]);
        let js = serde_json::to_string(&m).unwrap();
        assert_eq!(js, "[[1,1],[2,3]]");
        let back: IsoClass = serde_json::from_str(&js).unwrap();
        assert_eq!(back, m);
    }
}

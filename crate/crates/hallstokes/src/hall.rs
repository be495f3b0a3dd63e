//! The Hall algebra of constructible functions on iso-classes, with
//! Euler-characteristic-weighted convolution.
//!
//! An element assigns a coefficient to finitely many iso-classes. The product
//! is convolution over short exact sequences counted at torus fixed points:
//!
//! ```text
//! (f * g)(M) = Σ over coordinate subrepresentations A ⊆ M:  f(A) · g(M/A)
//! ```
//!
//! so the **left** factor is evaluated on the submodule. Iterating,
//! `(f_1 * ⋯ * f_k)(M)` sums over coordinate flags with `f_1` on the deepest
//! step. The direct-sum coproduct `f ↦ ((A,B) ↦ f(A ⊕ B))` makes this a
//! bialgebra whose primitives are exactly the functions supported on
//! indecomposables, and the algebra is the universal envelope of those — the
//! `exp`/`log` pair below moves between primitive and grouplike elements
//! within a fixed total-dimension truncation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::exact::Coeff;
use crate::quiver::{DimVec, IsoClass, QuiverSpec};

/// A constructible function with finite support, coefficients in `K`.
#[derive(Clone, PartialEq)]
pub struct HallElement<K: Coeff> {
    terms: BTreeMap<IsoClass, K>,
}

impl<K: Coeff> HallElement<K> {
    pub fn zero() -> Self {
        HallElement {
            terms: BTreeMap::new(),
        }
    }

    /// The algebra unit: the characteristic function of the zero module.
    pub fn unit() -> Self {
        HallElement::char_fn(IsoClass::zero())
    }

    /// `1_M`, the characteristic function of a single iso-class.
    pub fn char_fn(m: IsoClass) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(m, K::one());
        HallElement { terms }
    }

    /// The characteristic function of *all* modules of the given class.
    pub fn char_class(q: &QuiverSpec, class: &DimVec) -> Self {
        let mut terms = BTreeMap::new();
        for m in q.iso_classes(class).iter() {
            terms.insert(m.clone(), K::one());
        }
        HallElement { terms }
    }

    pub fn from_terms(entries: impl IntoIterator<Item = (IsoClass, K)>) -> Self {
        let mut terms = BTreeMap::new();
        for (m, k) in entries {
            if !k.is_zero() {
                *terms.entry(m).or_insert_with(K::zero) += k;
            }
        }
        let mut out = HallElement { terms };
        out.prune();
        out
    }

    fn prune(&mut self) {
        self.terms.retain(|_, k| !k.is_zero());
    }

    pub fn terms(&self) -> &BTreeMap<IsoClass, K> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The coefficient at `m` (zero when absent).
    pub fn eval(&self, m: &IsoClass) -> K {
        self.terms.get(m).cloned().unwrap_or_else(K::zero)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (m, k) in &other.terms {
            *terms.entry(m.clone()).or_insert_with(K::zero) += k.clone();
        }
        let mut out = HallElement { terms };
        out.prune();
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        HallElement {
            terms: self
                .terms
                .iter()
                .map(|(m, k)| (m.clone(), -k.clone()))
                .collect(),
        }
    }

    pub fn scale(&self, k: &K) -> Self {
        let mut out = HallElement {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c.clone() * k.clone()))
                .collect(),
        };
        out.prune();
        out
    }

    pub fn scale_ratio(&self, num: i64, den: i64) -> Self {
        self.scale(&K::from_ratio(num, den))
    }

    /// Hall product: left factor on the submodule, right on the quotient.
    pub fn mul(&self, other: &Self, q: &QuiverSpec) -> Self {
        let n = q.rank();
        let mut totals = BTreeSet::new();
        for m1 in self.terms.keys() {
            for m2 in other.terms.keys() {
                totals.insert(m1.class(n).add(&m2.class(n)));
            }
        }
        let mut terms = BTreeMap::new();
        for t in totals {
            for m in q.iso_classes(&t).iter() {
                let mut c = K::zero();
                for (sub, quot) in q.coordinate_subreps(m).iter() {
                    if let (Some(a), Some(b)) = (self.terms.get(sub), other.terms.get(quot)) {
                        c += a.clone() * b.clone();
                    }
                }
                if !c.is_zero() {
                    terms.insert(m.clone(), c);
                }
            }
        }
        HallElement { terms }
    }

    /// `f*g − g*f`.
    pub fn bracket(&self, other: &Self, q: &QuiverSpec) -> Self {
        self.mul(other, q).sub(&other.mul(self, q))
    }

    /// Left-to-right product of a word of factors (`unit` for the empty word).
    pub fn product_of(factors: &[Self], q: &QuiverSpec) -> Self {
        let mut acc = HallElement::unit();
        for f in factors {
            acc = acc.mul(f, q);
        }
        acc
    }

    pub fn support_classes(&self, n: usize) -> BTreeSet<DimVec> {
        self.terms.keys().map(|m| m.class(n)).collect()
    }

    /// The part supported on iso-classes of one fixed class.
    pub fn graded_part(&self, n: usize, class: &DimVec) -> Self {
        HallElement {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| &m.class(n) == class)
                .map(|(m, k)| (m.clone(), k.clone()))
                .collect(),
        }
    }

    /// Drops all terms of total dimension > `d`.
    pub fn truncate(&self, d: u32) -> Self {
        HallElement {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.total_dim() <= d)
                .map(|(m, k)| (m.clone(), k.clone()))
                .collect(),
        }
    }

    pub fn max_total_dim(&self) -> u32 {
        self.terms.keys().map(|m| m.total_dim()).max().unwrap_or(0)
    }

    /// The coproduct, evaluated: `Δ(f)(A,B) = f(A ⊕ B)`.
    pub fn coproduct_eval(&self, a: &IsoClass, b: &IsoClass) -> K {
        self.eval(&a.direct_sum(b))
    }

    /// Primitive ⟺ supported on indecomposables (equivalently, the
    /// coproduct evaluates to zero on every pair of nonzero modules and the
    /// coefficient at the zero module vanishes).
    pub fn is_primitive(&self) -> bool {
        self.terms.keys().all(|m| m.is_indecomposable())
    }

    /// Primitive up to numerical noise: every coefficient on a decomposable
    /// (or zero) module is below `tol`.
    pub fn is_primitive_within(&self, tol: f64) -> bool {
        self.terms
            .iter()
            .all(|(m, k)| m.is_indecomposable() || k.approx_zero(tol))
    }

    /// Projection onto the primitive part (terms on indecomposables).
    pub fn primitive_part(&self) -> Self {
        HallElement {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.is_indecomposable())
                .map(|(m, k)| (m.clone(), k.clone()))
                .collect(),
        }
    }

    /// Grouplike up to total dimension `d`: coefficient 1 at the zero module
    /// and multiplicative over direct sums, `f(A ⊕ B) = f(A)·f(B)`, for all
    /// pairs within the truncation. `tol = 0` demands exact equality.
    pub fn is_grouplike_up_to(&self, q: &QuiverSpec, d: u32, tol: f64) -> bool {
        if !(self.eval(&IsoClass::zero()) - K::one()).approx_zero(tol) {
            return false;
        }
        let all = q.iso_classes_up_to(d);
        for a in &all {
            for b in &all {
                if a.total_dim() + b.total_dim() > d {
                    continue;
                }
                let lhs = self.coproduct_eval(a, b);
                let rhs = self.eval(a) * self.eval(b);
                if !(lhs - rhs).approx_zero(tol) {
                    return false;
                }
            }
        }
        true
    }

    /// `exp` of an element supported in positive total dimension, truncated
    /// to total dimension ≤ `d`. The series terminates because each factor
    /// raises total dimension by at least one.
    pub fn exp_positive(&self, q: &QuiverSpec, d: u32) -> Self {
        assert!(
            self.eval(&IsoClass::zero()).is_zero(),
            "exp requires vanishing coefficient at the zero module"
        );
        let x = self.truncate(d);
        let mut acc = HallElement::unit();
        let mut pow = HallElement::unit();
        let mut fact: i64 = 1;
        for k in 1..=d as i64 {
            pow = pow.mul(&x, q).truncate(d);
            if pow.is_zero() {
                break;
            }
            fact *= k;
            acc = acc.add(&pow.scale_ratio(1, fact));
        }
        acc
    }

    /// `log` of `1 + x` with `x` supported in positive total dimension,
    /// truncated to total dimension ≤ `d`.
    pub fn log_unipotent(&self, q: &QuiverSpec, d: u32) -> Self {
        let unit_defect = self.eval(&IsoClass::zero()) - K::one();
        assert!(
            unit_defect.approx_zero(1e-9),
            "log requires coefficient ≈ 1 at the zero module, defect {unit_defect:?}"
        );
        let mut x = self.truncate(d);
        x.terms.remove(&IsoClass::zero());
        let mut acc = HallElement::zero();
        let mut pow = HallElement::unit();
        for k in 1..=d as i64 {
            pow = pow.mul(&x, q).truncate(d);
            if pow.is_zero() {
                break;
            }
            let sign = if k % 2 == 1 { 1 } else { -1 };
            acc = acc.add(&pow.scale_ratio(sign, k));
        }
        acc
    }

    /// Maps coefficients into another ring (used to move exact data onto the
    /// analytic side).
    pub fn map_coeffs<L: Coeff>(&self, f: impl Fn(&K) -> L) -> HallElement<L> {
        let mut out = HallElement {
            terms: self
                .terms
                .iter()
                .map(|(m, k)| (m.clone(), f(k)))
                .collect::<BTreeMap<_, _>>(),
        };
        out.prune();
        out
    }
}

impl<K: Coeff> fmt::Debug for HallElement<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, k)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{k:?}·1[{m:?}]")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::rational::BigRational;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    type Elt = HallElement<BigRational>;

    fn a2() -> QuiverSpec {
        QuiverSpec::new(2).unwrap()
    }

    fn s(a: u8, b: u8) -> Elt {
        Elt::char_fn(IsoClass::interval(a, b))
    }

    fn random_element(q: &QuiverSpec, d: u32, rng: &mut StdRng) -> Elt {
        Elt::from_terms(q.iso_classes_up_to(d).into_iter().filter_map(|m| {
            if rng.gen_bool(0.6) {
                Some((m, BigRational::from_ratio(rng.gen_range(-3..=3), rng.gen_range(1..=3))))
            } else {
                None
            }
        }))
    }

    fn random_primitive(q: &QuiverSpec, d: u32, rng: &mut StdRng) -> Elt {
        Elt::from_terms(q.iso_classes_up_to(d).into_iter().filter_map(|m| {
            if m.is_indecomposable() && rng.gen_bool(0.8) {
                Some((m, BigRational::from_ratio(rng.gen_range(-3..=3), rng.gen_range(1..=3))))
            } else {
                None
            }
        }))
    }

    #[test]
    fn product_puts_left_factor_on_submodule() {
        // [1,2] has the simple at vertex 2 as its unique simple submodule, so
        // 1_{S2} * 1_{S1} sees it and 1_{S1} * 1_{S2} does not.
        let q = a2();
        let p = IsoClass::interval(1, 2);
        assert_eq!(
            s(2, 2).mul(&s(1, 1), &q).eval(&p),
            BigRational::from_ratio(1, 1)
        );
        assert!(s(1, 1).mul(&s(2, 2), &q).eval(&p).is_zero());
    }

    #[test]
    fn frozen_rank_two_products() {
        let q = a2();
        let p = IsoClass::interval(1, 2);
        let ss = IsoClass::new(vec![(1, 1), (2, 2)]);
        let x12 = s(1, 1).mul(&s(2, 2), &q);
        assert_eq!(x12, Elt::char_fn(ss.clone()));
        let x21 = s(2, 2).mul(&s(1, 1), &q);
        assert_eq!(x21, Elt::char_fn(p.clone()).add(&Elt::char_fn(ss)));
        // and the bracket collapses to minus the projective cover class
        let br = s(1, 1).bracket(&s(2, 2), &q);
        assert_eq!(br, Elt::char_fn(p).neg());
    }

    #[test]
    fn unit_laws() {
        let q = QuiverSpec::new(3).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..5 {
            let f = random_element(&q, 3, &mut rng);
            assert_eq!(Elt::unit().mul(&f, &q), f);
            assert_eq!(f.mul(&Elt::unit(), &q), f);
        }
    }

    #[test]
    fn product_is_associative() {
        for n in [2usize, 3] {
            let q = QuiverSpec::new(n).unwrap();
            let mut rng = StdRng::seed_from_u64(11 + n as u64);
            for _ in 0..6 {
                let f = random_element(&q, 2, &mut rng);
                let g = random_element(&q, 2, &mut rng);
                let h = random_element(&q, 2, &mut rng);
                let lhs = f.mul(&g, &q).mul(&h, &q);
                let rhs = f.mul(&g.mul(&h, &q), &q);
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn iterated_product_runs_deepest_first() {
        let q = a2();
        let p = IsoClass::interval(1, 2);
        let w = Elt::product_of(&[s(2, 2), s(1, 1)], &q);
        assert_eq!(w.eval(&p), BigRational::from_ratio(1, 1));
    }

    #[test]
    fn exp_of_primitive_is_grouplike_and_log_inverts() {
        for n in [2usize, 3] {
            let q = QuiverSpec::new(n).unwrap();
            let d = 4;
            let mut rng = StdRng::seed_from_u64(23 + n as u64);
            for _ in 0..4 {
                let f = random_primitive(&q, d, &mut rng);
                let u = f.exp_positive(&q, d);
                assert!(u.is_grouplike_up_to(&q, d, 0.0), "exp not grouplike: {f:?}");
                assert_eq!(u.log_unipotent(&q, d), f);
                assert!(u.log_unipotent(&q, d).is_primitive());
            }
        }
    }

    #[test]
    fn exp_log_round_trip_on_general_positive_elements() {
        let q = QuiverSpec::new(3).unwrap();
        let d = 4;
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..4 {
            let mut f = random_element(&q, d, &mut rng);
            f.terms.remove(&IsoClass::zero());
            let u = f.exp_positive(&q, d);
            assert_eq!(u.log_unipotent(&q, d), f);
        }
    }

    #[test]
    fn non_primitive_exp_is_not_grouplike() {
        // An element with a decomposable term fails multiplicativity.
        let q = a2();
        let d = 4;
        let bad = Elt::char_fn(IsoClass::new(vec![(1, 1), (1, 1)]));
        let f = s(1, 1).add(&bad);
        assert!(!f.is_primitive());
        let u = f.exp_positive(&q, d);
        assert!(!u.is_grouplike_up_to(&q, d, 0.0));
    }

    #[test]
    fn char_class_sums_all_iso_classes() {
        let q = a2();
        let f = Elt::char_class(&q, &DimVec(vec![1, 1]));
        assert_eq!(f.terms().len(), 2);
        assert_eq!(f.eval(&IsoClass::interval(1, 2)), BigRational::from_ratio(1, 1));
    }
}

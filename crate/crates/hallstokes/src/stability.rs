//! Stability conditions on the module category: semistability, HN strata,
//! walls and chambers, and the `κ / δ / ε / SS_ℓ` calculus.
//!
//! A stability condition assigns each simple a value in the open upper
//! half-plane; classes get phases in `(0,1)` via `φ = arg/π`. A module is
//! semistable when every nonzero submodule has phase ≤ its own. All phase
//! comparisons reduce to the sign of `Im(Z(β)·conj(Z(γ)))`, evaluated
//! exactly for Gaussian-rational input and with a relative tolerance for
//! floating input, so wall membership is decidable in both modes.
//!
//! The four Hall elements per class:
//!
//! * `κ_γ`  — characteristic function of *all* modules of class γ;
//! * `δ_γ`  — characteristic function of the *semistable* ones;
//! * `ε_α`  — the ray-wise logarithm of the δ series (always primitive);
//! * `SS_ℓ` — `1 + Σ_{Z(γ)∈ℓ} δ_γ`, grouplike, the exponential of Σ ε.
//!
//! The two global identities tying them together — the HN factorization
//! `κ_γ = Σ_{φ(γ_1)>⋯>φ(γ_n)} δ_{γ_1}*⋯*δ_{γ_n}` and the clockwise product
//! `∏^↷ SS_ℓ = 1 + Σ_γ κ_γ` — hold exactly in every chamber and on walls,
//! and are exposed as checks rather than used as definitions.

use std::collections::HashMap;
use std::sync::RwLock;

use num::rational::BigRational;
use num::Zero;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exact::GaussianRational;
use crate::hall::HallElement;
use crate::quiver::{DimVec, IsoClass, QuiverSpec};

/// Relative tolerance for ray-collinearity of floating stability values:
/// `z ∥ w  ⟺  |Im(z·conj(w))| ≤ TOL_RAY·|z||w|` (and positive dot product).
pub const TOL_RAY: f64 = 1e-12;

/// Stability values of the simples: exact Gaussian rationals (all ray tests
/// exact) or complex doubles (ray tests use [`TOL_RAY`]).
#[derive(Clone, Debug)]
pub enum ZData {
    Exact(Vec<GaussianRational>),
    Float(Vec<Complex64>),
}

/// How a ray is named when asking for `SS_ℓ`.
#[derive(Clone, Debug)]
pub enum RayRep {
    /// The ray through `Z(γ)` for a positive class γ.
    Class(DimVec),
    /// A direction in the upper half-plane (compared with [`TOL_RAY`]).
    Dir(Complex64),
    /// `ℝ_{>0}·e^{iπφ}`, `φ ∈ (0,1)`.
    Phase(f64),
}

/// A Stokes ray: the classes (total ≤ some bound) whose stability values
/// share one direction.
#[derive(Clone, Debug)]
pub struct Ray {
    /// Smallest class on the ray (lexicographically), used as its name.
    pub rep: DimVec,
    /// `φ ∈ (0,1)`, for reporting; ordering decisions never use this.
    pub phase: f64,
    /// All grouped classes, ascending.
    pub classes: Vec<DimVec>,
}

/// A stability condition plus the quiver it lives on, with a cache of the
/// semistable indicators (all outputs of this module have exact rational
/// coefficients; only the phase *decisions* depend on the input mode).
pub struct StabilityContext {
    q: QuiverSpec,
    z: ZData,
    delta_cache: RwLock<HashMap<DimVec, HallElement<BigRational>>>,
}

impl StabilityContext {
    pub fn new(q: QuiverSpec, z: ZData) -> Result<Self> {
        let (len, ok) = match &z {
            ZData::Exact(v) => (
                v.len(),
                v.iter().all(|g| g.im > BigRational::zero()),
            ),
            ZData::Float(v) => (
                v.len(),
                v.iter().all(|c| c.im > 0.0 && c.re.is_finite() && c.im.is_finite()),
            ),
        };
        if len != q.rank() {
            return Err(Error::domain(format!(
                "stability condition has {len} values for a rank-{} quiver",
                q.rank()
            )));
        }
        if !ok {
            return Err(Error::domain(
                "every simple must map to the open upper half-plane (Im > 0)",
            ));
        }
        Ok(StabilityContext {
            q,
            z,
            delta_cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn new_exact(q: QuiverSpec, z: Vec<GaussianRational>) -> Result<Self> {
        Self::new(q, ZData::Exact(z))
    }

    /// Draws an exact stability condition with small random rational parts
    /// (numerators in ±12, denominators ≤ 4), for chamber sweeps and tests.
    pub fn sample_exact<R: rand::Rng>(n: usize, rng: &mut R) -> Result<Self> {
        let q = QuiverSpec::new(n)?;
        let z = (0..n)
            .map(|_| {
                GaussianRational::new(
                    BigRational::new(rng.gen_range(-12..=12).into(), rng.gen_range(1..=4).into()),
                    BigRational::new(rng.gen_range(1..=12).into(), rng.gen_range(1..=4).into()),
                )
            })
            .collect();
        Self::new_exact(q, z)
    }

    /// Like [`Self::sample_exact`], then forces two random simples onto a
    /// common value, landing the condition exactly on a wall.
    pub fn sample_exact_on_wall<R: rand::Rng>(n: usize, rng: &mut R) -> Result<Self> {
        assert!(n >= 2);
        let ctx = Self::sample_exact(n, rng)?;
        let ZData::Exact(mut z) = ctx.z else { unreachable!() };
        let i = rng.gen_range(0..n);
        let j = (i + 1 + rng.gen_range(0..n - 1)) % n;
        z[j] = z[i].clone();
        Self::new_exact(ctx.q, z)
    }

    pub fn new_float(q: QuiverSpec, z: Vec<Complex64>) -> Result<Self> {
        Self::new(q, ZData::Float(z))
    }

    pub fn quiver(&self) -> &QuiverSpec {
        &self.q
    }

    pub fn z_data(&self) -> &ZData {
        &self.z
    }

    /// `Z(γ) = Σ γ_i·Z(S_i)` as a complex double.
    pub fn z_complex(&self, class: &DimVec) -> Complex64 {
        match &self.z {
            ZData::Exact(v) => class
                .0
                .iter()
                .zip(v)
                .map(|(&k, g)| g.to_complex() * k as f64)
                .sum(),
            ZData::Float(v) => class.0.iter().zip(v).map(|(&k, c)| c * k as f64).sum(),
        }
    }

    /// Exact stability value, when the input was exact.
    pub fn z_exact(&self, class: &DimVec) -> Option<GaussianRational> {
        match &self.z {
            ZData::Exact(v) => {
                let mut acc = GaussianRational::zero();
                for (&k, g) in class.0.iter().zip(v) {
                    let k = BigRational::from_integer(k.into());
                    acc = acc
                        + GaussianRational::new(&g.re * &k, &g.im * &k);
                }
                Some(acc)
            }
            ZData::Float(_) => None,
        }
    }

    /// `φ(γ) = arg Z(γ)/π ∈ (0,1)`.
    pub fn phase(&self, class: &DimVec) -> Result<f64> {
        if class.is_zero() {
            return Err(Error::domain("phase of the zero class"));
        }
        let z = self.z_complex(class);
        Ok(z.im.atan2(z.re) / std::f64::consts::PI)
    }

    /// Sign of `Im(Z(a)·conj(Z(b)))`: `+1` when `φ(a) > φ(b)`, `0` on a
    /// common ray, `−1` otherwise.
    pub fn cross_sign(&self, a: &DimVec, b: &DimVec) -> i8 {
        debug_assert!(!a.is_zero() && !b.is_zero());
        match &self.z {
            ZData::Exact(_) => {
                let za = self.z_exact(a).unwrap();
                let zb = self.z_exact(b).unwrap();
                let c = za.cross(&zb);
                if c.is_zero() {
                    0
                } else if c > BigRational::zero() {
                    1
                } else {
                    -1
                }
            }
            ZData::Float(_) => {
                cross_sign_float(self.z_complex(a), self.z_complex(b))
            }
        }
    }

    pub fn same_ray(&self, a: &DimVec, b: &DimVec) -> bool {
        self.cross_sign(a, b) == 0
    }

    pub fn phase_gt(&self, a: &DimVec, b: &DimVec) -> bool {
        self.cross_sign(a, b) > 0
    }

    /// Semistability: every nonzero coordinate-submodule class has phase
    /// ≤ φ(M). Coordinate classes exhaust all submodule classes, so this is
    /// exact.
    pub fn is_semistable(&self, m: &IsoClass) -> Result<bool> {
        if m.is_zero() {
            return Err(Error::domain("semistability of the zero module"));
        }
        let n = self.q.rank();
        let gamma = m.class(n);
        for (sub, _) in self.q.coordinate_subreps(m).iter() {
            if sub.is_zero() {
                continue;
            }
            let a = sub.class(n);
            if a == gamma {
                continue;
            }
            if self.cross_sign(&a, &gamma) > 0 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `δ_γ`: indicator of the semistable iso-classes of class γ.
    pub fn delta(&self, gamma: &DimVec) -> HallElement<BigRational> {
        if let Some(hit) = self.delta_cache.read().unwrap().get(gamma) {
            return hit.clone();
        }
        let mut terms = Vec::new();
        for m in self.q.iso_classes(gamma).iter() {
            if self.is_semistable(m).unwrap_or(false) {
                terms.push((m.clone(), BigRational::from_integer(1.into())));
            }
        }
        let el = HallElement::from_terms(terms);
        self.delta_cache
            .write()
            .unwrap()
            .insert(gamma.clone(), el.clone());
        el
    }

    /// `κ_γ`: indicator of all iso-classes of class γ.
    pub fn kappa(&self, gamma: &DimVec) -> HallElement<BigRational> {
        HallElement::char_class(&self.q, gamma)
    }

    /// HN subquotient classes of `m`, strictly decreasing in phase. Greedy:
    /// pick the semistable coordinate submodule of maximal phase, then
    /// maximal total dimension; recurse on the quotient. The maximizer's
    /// class is unique and every realization leads to the same answer (both
    /// asserted, by trying all realizations).
    pub fn hn_classes(&self, m: &IsoClass) -> Result<Vec<DimVec>> {
        if m.is_zero() {
            return Err(Error::domain("HN filtration of the zero module"));
        }
        let n = self.q.rank();
        // best = (class, total) of the maximal-phase / maximal-size
        // semistable coordinate submodule
        let mut best: Option<DimVec> = None;
        let mut realizations: Vec<IsoClass> = Vec::new();
        for (sub, quot) in self.q.coordinate_subreps(m).iter() {
            if sub.is_zero() || !self.is_semistable(sub)? {
                continue;
            }
            let a = sub.class(n);
            let better = match &best {
                None => true,
                Some(b) => match self.cross_sign(&a, b) {
                    1 => true,
                    0 => a.total() > b.total(),
                    _ => false,
                },
            };
            if better {
                best = Some(a);
                realizations = vec![quot.clone()];
            } else if let Some(b) = &best {
                if self.cross_sign(&a, b) == 0 && a.total() == b.total() {
                    if a != *b {
                        return Err(Error::domain(format!(
                            "ambiguous maximal destabilizing class for {m:?}: {a:?} vs {b:?}"
                        )));
                    }
                    realizations.push(quot.clone());
                }
            }
        }
        let first = best.expect("nonzero module has a nonzero semistable submodule");
        if first == m.class(n) {
            return Ok(vec![first]);
        }
        realizations.sort();
        realizations.dedup();
        let mut answers: Vec<Vec<DimVec>> = Vec::new();
        for quot in &realizations {
            let mut rest = self.hn_classes(quot)?;
            rest.insert(0, first.clone());
            answers.push(rest);
        }
        answers.dedup();
        if answers.len() != 1 {
            return Err(Error::domain(format!(
                "HN tie-breaking ambiguity for {m:?}: {answers:?}"
            )));
        }
        Ok(answers.pop().unwrap())
    }

    /// The HN-stratified sum `Σ_{φ(γ_1)>⋯>φ(γ_n)} δ_{γ_1}*⋯*δ_{γ_n}` over
    /// decompositions of γ, highest phase leftmost (deepest submodule).
    pub fn reineke_kappa_sum(&self, gamma: &DimVec) -> HallElement<BigRational> {
        let mut acc = HallElement::zero();
        let parts: Vec<DimVec> = gamma
            .positive_subvectors()
            .into_iter()
            .filter(|p| !self.delta(p).is_zero())
            .collect();
        self.reineke_rec(gamma, &parts, None, &HallElement::unit(), &mut acc);
        acc
    }

    fn reineke_rec(
        &self,
        remaining: &DimVec,
        parts: &[DimVec],
        last: Option<&DimVec>,
        prod: &HallElement<BigRational>,
        acc: &mut HallElement<BigRational>,
    ) {
        for p in parts {
            if !p.leq(remaining) {
                continue;
            }
            if let Some(l) = last {
                // strictly decreasing phases left to right
                if self.cross_sign(l, p) <= 0 {
                    continue;
                }
            }
            let next = prod.mul(&self.delta(p), &self.q);
            if next.is_zero() {
                continue;
            }
            match remaining.checked_sub(p) {
                Some(rest) if rest.is_zero() => *acc = acc.add(&next),
                Some(rest) => self.reineke_rec(&rest, parts, Some(p), &next, acc),
                None => {}
            }
        }
    }

    /// Verifies the HN factorization `reineke_kappa_sum(γ) = κ_γ` and
    /// returns the sum.
    pub fn reineke_kappa_check(&self, gamma: &DimVec) -> Result<HallElement<BigRational>> {
        let sum = self.reineke_kappa_sum(gamma);
        if sum != self.kappa(gamma) {
            return Err(Error::domain(format!(
                "HN factorization failed at {gamma:?}: {sum:?} ≠ κ"
            )));
        }
        Ok(sum)
    }

    /// Inverts the HN factorization: the alternating sum
    /// `Σ (−1)^{n−1} κ_{γ_1}*⋯*κ_{γ_n}` over decompositions of γ whose
    /// proper prefix sums all have phase > φ(γ). Equals `δ_γ`.
    pub fn delta_from_kappa(&self, gamma: &DimVec) -> HallElement<BigRational> {
        let mut memo: HashMap<DimVec, HallElement<BigRational>> = HashMap::new();
        self.dfk_rec(gamma, gamma, &mut memo)
    }

    // S(rem) = κ_rem − Σ κ_c * S(rem−c) over nonzero proper c ≤ rem with
    // φ(γ − rem + c) > φ(γ); then δ_γ = S(γ). The memo key is the remaining
    // suffix, which determines the prefix sum γ − rem.
    fn dfk_rec(
        &self,
        gamma: &DimVec,
        rem: &DimVec,
        memo: &mut HashMap<DimVec, HallElement<BigRational>>,
    ) -> HallElement<BigRational> {
        if let Some(hit) = memo.get(rem) {
            return hit.clone();
        }
        let mut acc = self.kappa(rem);
        for c in rem.positive_subvectors() {
            if c == *rem {
                continue;
            }
            let prefix = gamma.checked_sub(rem).unwrap().add(&c);
            if self.cross_sign(&prefix, gamma) <= 0 {
                continue;
            }
            let rest = rem.checked_sub(&c).unwrap();
            let tail = self.dfk_rec(gamma, &rest, memo);
            acc = acc.sub(&self.kappa(&c).mul(&tail, &self.q));
        }
        memo.insert(rem.clone(), acc.clone());
        acc
    }

    /// `ε_α = Σ ((−1)^{n−1}/n) δ_{γ_1}*⋯*δ_{γ_n}` over decompositions of α
    /// with every `Z(γ_i)` on the ray of `Z(α)`: the graded piece at α of
    /// the logarithm of `SS_ℓ`. Primitive for every stability condition.
    pub fn epsilon(&self, alpha: &DimVec) -> Result<HallElement<BigRational>> {
        if alpha.is_zero() {
            return Err(Error::domain("ε of the zero class"));
        }
        let parts: Vec<DimVec> = alpha
            .positive_subvectors()
            .into_iter()
            .filter(|p| self.same_ray(p, alpha) && !self.delta(p).is_zero())
            .collect();
        let mut acc = HallElement::zero();
        self.eps_rec(alpha, &parts, 0, &HallElement::unit(), &mut acc);
        Ok(acc)
    }

    fn eps_rec(
        &self,
        remaining: &DimVec,
        parts: &[DimVec],
        depth: u32,
        prod: &HallElement<BigRational>,
        acc: &mut HallElement<BigRational>,
    ) {
        for p in parts {
            if !p.leq(remaining) {
                continue;
            }
            let next = prod.mul(&self.delta(p), &self.q);
            if next.is_zero() {
                continue;
            }
            let k = depth as i64 + 1;
            match remaining.checked_sub(p) {
                Some(rest) if rest.is_zero() => {
                    let sign = if k % 2 == 1 { 1 } else { -1 };
                    *acc = acc.add(&next.scale_ratio(sign, k));
                }
                Some(rest) => self.eps_rec(&rest, parts, depth + 1, &next, acc),
                None => {}
            }
        }
    }

    /// All positive classes of total ≤ d on the named ray, ascending.
    pub fn ray_classes(&self, ray: &RayRep, d: u32) -> Vec<DimVec> {
        self.q
            .classes_up_to(d)
            .into_iter()
            .filter(|c| self.on_ray(ray, c))
            .collect()
    }

    fn on_ray(&self, ray: &RayRep, class: &DimVec) -> bool {
        match ray {
            RayRep::Class(rep) => self.same_ray(rep, class),
            RayRep::Dir(dir) => cross_sign_float(*dir, self.z_complex(class)) == 0,
            RayRep::Phase(phi) => {
                let dir = Complex64::from_polar(1.0, phi * std::f64::consts::PI);
                cross_sign_float(dir, self.z_complex(class)) == 0
            }
        }
    }

    /// `SS_ℓ = 1 + Σ_{Z(γ)∈ℓ, |γ|≤d} δ_γ`: unit off the ray, grouplike.
    pub fn ss_ell(&self, ray: &RayRep, d: u32) -> HallElement<BigRational> {
        let mut acc = HallElement::unit();
        for c in self.ray_classes(ray, d) {
            acc = acc.add(&self.delta(&c));
        }
        acc
    }

    /// `Σ ε_α` over the classes of one ray (the logarithm of `SS_ℓ`).
    pub fn epsilon_ray_sum(&self, ray: &RayRep, d: u32) -> Result<HallElement<BigRational>> {
        let mut acc = HallElement::zero();
        for c in self.ray_classes(ray, d) {
            acc = acc.add(&self.epsilon(&c)?);
        }
        Ok(acc)
    }

    /// `1 + Σ_γ κ_γ` over all classes of total ≤ d: the function with value
    /// 1 on every module.
    pub fn splus(&self, d: u32) -> HallElement<BigRational> {
        let mut acc = HallElement::unit();
        for c in self.q.classes_up_to(d) {
            acc = acc.add(&self.kappa(&c));
        }
        acc
    }

    /// The Stokes rays carrying semistables of total ≤ d, sorted by strictly
    /// decreasing phase (clockwise sweep order).
    pub fn stokes_rays(&self, d: u32) -> Vec<Ray> {
        let mut groups: Vec<Vec<DimVec>> = Vec::new();
        for c in self.q.classes_up_to(d) {
            if self.delta(&c).is_zero() {
                continue;
            }
            match groups.iter_mut().find(|g| self.same_ray(&g[0], &c)) {
                Some(g) => g.push(c),
                None => groups.push(vec![c]),
            }
        }
        groups.sort_by(|a, b| match self.cross_sign(&a[0], &b[0]) {
            1 => std::cmp::Ordering::Less,
            -1 => std::cmp::Ordering::Greater,
            _ => std::cmp::Ordering::Equal,
        });
        groups
            .into_iter()
            .map(|mut classes| {
                classes.sort();
                Ray {
                    rep: classes[0].clone(),
                    phase: self.phase(&classes[0]).unwrap(),
                    classes,
                }
            })
            .collect()
    }

    /// The clockwise factorization: `∏ SS_ℓ` over Stokes rays in decreasing
    /// phase order, truncated at d, must equal `splus(d)` exactly.
    pub fn clockwise_product(&self, d: u32) -> HallElement<BigRational> {
        let mut acc = HallElement::unit();
        for ray in self.stokes_rays(d) {
            let ss = self.ss_ell(&RayRep::Class(ray.rep.clone()), d);
            acc = acc.mul(&ss, &self.q).truncate(d);
        }
        acc
    }

    pub fn clockwise_identity_check(&self, d: u32) -> bool {
        self.clockwise_product(d) == self.splus(d)
    }

    /// All walls relevant to α: unordered pairs `{β, γ}` of positive
    /// non-proportional classes with β+γ = α, canonically β > γ.
    pub fn walls_for(q: &QuiverSpec, alpha: &DimVec) -> Result<Vec<(DimVec, DimVec)>> {
        if alpha.is_zero() {
            return Err(Error::domain("walls of the zero class"));
        }
        let _ = q;
        let mut out = Vec::new();
        for beta in alpha.positive_subvectors() {
            if beta == *alpha {
                continue;
            }
            let gamma = alpha.checked_sub(&beta).unwrap();
            if beta.proportional(&gamma) || beta < gamma {
                continue;
            }
            out.push((beta, gamma));
        }
        out.sort();
        Ok(out)
    }

    /// Sign pattern of `Im(Z(β)·conj(Z(γ)))` over `walls_for(α)`, as a
    /// string of `+ 0 −`. A `0` flags wall contact.
    pub fn chamber_signature(&self, alpha: &DimVec) -> Result<String> {
        let walls = Self::walls_for(&self.q, alpha)?;
        Ok(walls
            .iter()
            .map(|(b, g)| match self.cross_sign(b, g) {
                1 => '+',
                0 => '0',
                _ => '-',
            })
            .collect())
    }
}

fn cross_sign_float(a: Complex64, b: Complex64) -> i8 {
    let cross = a.im * b.re - a.re * b.im;
    let dot = a.re * b.re + a.im * b.im;
    if cross.abs() <= TOL_RAY * a.norm() * b.norm() && dot > 0.0 {
        0
    } else if cross > 0.0 {
        1
    } else {
        -1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn gr(re: i64, im: i64) -> GaussianRational {
        GaussianRational::from_ints(re, im)
    }

    /// φ(S1) > φ(S2): Z(S1) = −1+i, Z(S2) = 1+i.
    fn ctx_s1_high() -> StabilityContext {
        StabilityContext::new_exact(QuiverSpec::new(2).unwrap(), vec![gr(-1, 1), gr(1, 1)])
            .unwrap()
    }

    /// φ(S1) < φ(S2).
    fn ctx_s2_high() -> StabilityContext {
        StabilityContext::new_exact(QuiverSpec::new(2).unwrap(), vec![gr(1, 1), gr(-1, 1)])
            .unwrap()
    }

    /// The wall: Z(S1) = Z(S2) = i.
    fn ctx_wall() -> StabilityContext {
        StabilityContext::new_exact(QuiverSpec::new(2).unwrap(), vec![gr(0, 1), gr(0, 1)])
            .unwrap()
    }

    fn random_exact_ctx(n: usize, rng: &mut StdRng) -> StabilityContext {
        StabilityContext::sample_exact(n, rng).unwrap()
    }

    fn dv(v: &[u32]) -> DimVec {
        DimVec(v.to_vec())
    }

    fn one() -> BigRational {
        BigRational::from_integer(1.into())
    }

    #[test]
    fn rejects_bad_input() {
        let q = QuiverSpec::new(2).unwrap();
        assert!(StabilityContext::new_exact(q.clone(), vec![gr(0, 1)]).is_err());
        assert!(StabilityContext::new_exact(q.clone(), vec![gr(0, 1), gr(1, 0)]).is_err());
        assert!(StabilityContext::new_exact(q, vec![gr(0, 1), gr(1, -1)]).is_err());
    }

    #[test]
    fn phases() {
        let ctx = ctx_s1_high();
        assert!((ctx.phase(&dv(&[1, 0])).unwrap() - 0.75).abs() < 1e-15);
        assert!((ctx.phase(&dv(&[0, 1])).unwrap() - 0.25).abs() < 1e-15);
        assert!((ctx.phase(&dv(&[1, 1])).unwrap() - 0.5).abs() < 1e-15);
        assert!(ctx.phase(&dv(&[0, 0])).is_err());
    }

    #[test]
    fn semistability_frozen_examples() {
        let p = IsoClass::interval(1, 2);
        let ss = IsoClass::new(vec![(1, 1), (2, 2)]);
        let hi = ctx_s1_high();
        assert!(hi.is_semistable(&p).unwrap());
        assert!(!hi.is_semistable(&ss).unwrap());
        let lo = ctx_s2_high();
        assert!(!lo.is_semistable(&p).unwrap());
        // simples are always semistable
        assert!(lo.is_semistable(&IsoClass::interval(1, 1)).unwrap());
        assert!(lo.is_semistable(&IsoClass::interval(2, 2)).unwrap());
    }

    #[test]
    fn theta_form_of_semistability_agrees() {
        // semistable ⟺ every nonzero submodule class A has
        // θ(A) = −Im(Z(A)/Z(γ)) ≥ 0.
        let mut rng = StdRng::seed_from_u64(5);
        for n in [2usize, 3] {
            for _ in 0..6 {
                let ctx = random_exact_ctx(n, &mut rng);
                for m in ctx.quiver().iso_classes_up_to(4) {
                    let gamma = m.class(n);
                    let zg = ctx.z_complex(&gamma);
                    let theta_ok = ctx
                        .quiver()
                        .coordinate_subreps(&m)
                        .iter()
                        .filter(|(a, _)| !a.is_zero())
                        .all(|(a, _)| {
                            let t = -(ctx.z_complex(&a.class(n)) / zg).im;
                            t >= -1e-12
                        });
                    assert_eq!(ctx.is_semistable(&m).unwrap(), theta_ok, "{m:?}");
                }
            }
        }
    }

    #[test]
    fn delta_in_both_chambers_and_on_wall() {
        let p = IsoClass::interval(1, 2);
        let ss = IsoClass::new(vec![(1, 1), (2, 2)]);
        let d11 = dv(&[1, 1]);
        assert_eq!(
            ctx_s1_high().delta(&d11),
            HallElement::char_fn(p.clone())
        );
        assert!(ctx_s2_high().delta(&d11).is_zero());
        let wall = ctx_wall().delta(&d11);
        assert_eq!(wall.eval(&p), one());
        assert_eq!(wall.eval(&ss), one());
        assert_eq!(wall.terms().len(), 2);
    }

    #[test]
    fn hn_frozen_examples() {
        let p = IsoClass::interval(1, 2);
        let ss = IsoClass::new(vec![(1, 1), (2, 2)]);
        let hi = ctx_s1_high();
        assert_eq!(hi.hn_classes(&ss).unwrap(), vec![dv(&[1, 0]), dv(&[0, 1])]);
        assert_eq!(hi.hn_classes(&p).unwrap(), vec![dv(&[1, 1])]);
        let lo = ctx_s2_high();
        assert_eq!(lo.hn_classes(&p).unwrap(), vec![dv(&[0, 1]), dv(&[1, 0])]);
    }

    #[test]
    fn hn_phases_strictly_decrease_and_leading_stratum_dominates() {
        let mut rng = StdRng::seed_from_u64(17);
        for n in [2usize, 3] {
            for _ in 0..4 {
                let ctx = random_exact_ctx(n, &mut rng);
                for m in ctx.quiver().iso_classes_up_to(5) {
                    let hn = ctx.hn_classes(&m).unwrap();
                    let total: DimVec = hn
                        .iter()
                        .fold(DimVec::zeros(n), |acc, c| acc.add(c));
                    assert_eq!(total, m.class(n));
                    for w in hn.windows(2) {
                        assert!(ctx.phase_gt(&w[0], &w[1]));
                    }
                }
            }
        }
    }

    #[test]
    fn reineke_identity_frozen_chamber() {
        let ctx = ctx_s1_high();
        let got = ctx.reineke_kappa_check(&dv(&[1, 1])).unwrap();
        assert_eq!(got, ctx.kappa(&dv(&[1, 1])));
        // the two contributing strata
        let direct = ctx.delta(&dv(&[1, 1])).add(
            &ctx.delta(&dv(&[1, 0])).mul(&ctx.delta(&dv(&[0, 1])), ctx.quiver()),
        );
        assert_eq!(got, direct);
    }

    #[test]
    fn reineke_identity_random_and_on_wall() {
        let mut rng = StdRng::seed_from_u64(29);
        for n in [2usize, 3] {
            for _ in 0..3 {
                let ctx = random_exact_ctx(n, &mut rng);
                for gamma in ctx.quiver().classes_up_to(4) {
                    ctx.reineke_kappa_check(&gamma).unwrap();
                }
            }
        }
        let wall = ctx_wall();
        for gamma in wall.quiver().classes_up_to(4) {
            wall.reineke_kappa_check(&gamma).unwrap();
        }
    }

    #[test]
    fn delta_from_kappa_inverts() {
        let frozen = ctx_s1_high();
        let d11 = dv(&[1, 1]);
        // κ_{(1,1)} − κ_{(1,0)}*κ_{(0,1)} = 1_P
        assert_eq!(
            frozen.delta_from_kappa(&d11),
            HallElement::char_fn(IsoClass::interval(1, 2))
        );
        let mut rng = StdRng::seed_from_u64(31);
        for n in [2usize, 3] {
            let ctx = random_exact_ctx(n, &mut rng);
            for gamma in ctx.quiver().classes_up_to(4) {
                assert_eq!(ctx.delta_from_kappa(&gamma), ctx.delta(&gamma), "{gamma:?}");
            }
        }
        let wall = ctx_wall();
        for gamma in wall.quiver().classes_up_to(4) {
            assert_eq!(wall.delta_from_kappa(&gamma), wall.delta(&gamma));
        }
    }

    #[test]
    fn epsilon_on_wall_halves_the_projective() {
        let wall = ctx_wall();
        let eps = wall.epsilon(&dv(&[1, 1])).unwrap();
        let want = HallElement::char_fn(IsoClass::interval(1, 2)).scale_ratio(1, 2);
        assert_eq!(eps, want);
    }

    #[test]
    fn epsilon_generic_equals_delta_and_vanishes_off_roots() {
        let ctx = ctx_s1_high();
        assert_eq!(ctx.epsilon(&dv(&[1, 1])).unwrap(), ctx.delta(&dv(&[1, 1])));
        // (2,1) is not a root: no indecomposable of that class, and the ray
        // condition kills all decompositions on generic Z.
        assert!(ctx.epsilon(&dv(&[2, 1])).unwrap().is_zero());
        // on the wall, ε of a non-root class still vanishes (primitivity)
        let wall = ctx_wall();
        assert!(wall.epsilon(&dv(&[2, 1])).unwrap().is_zero());
    }

    #[test]
    fn epsilon_is_primitive_everywhere() {
        let mut rng = StdRng::seed_from_u64(37);
        for n in [2usize, 3] {
            for _ in 0..3 {
                let ctx = random_exact_ctx(n, &mut rng);
                for alpha in ctx.quiver().classes_up_to(4) {
                    assert!(ctx.epsilon(&alpha).unwrap().is_primitive(), "{alpha:?}");
                }
            }
        }
        let wall = ctx_wall();
        for alpha in wall.quiver().classes_up_to(5) {
            assert!(wall.epsilon(&alpha).unwrap().is_primitive());
        }
    }

    #[test]
    fn ss_ell_is_grouplike_and_exponential_of_epsilon() {
        let d = 4;
        for ctx in [ctx_s1_high(), ctx_wall()] {
            for ray in ctx.stokes_rays(d) {
                let rep = RayRep::Class(ray.rep.clone());
                let ss = ctx.ss_ell(&rep, d);
                assert!(ss.is_grouplike_up_to(ctx.quiver(), d, 0.0));
                let eps = ctx.epsilon_ray_sum(&rep, d).unwrap();
                assert_eq!(eps.exp_positive(ctx.quiver(), d), ss);
                assert_eq!(ss.log_unipotent(ctx.quiver(), d), eps);
            }
        }
    }

    #[test]
    fn ss_ell_off_stokes_ray_is_unit() {
        let ctx = ctx_s1_high();
        // the positive real axis direction carries no semistables
        let ss = ctx.ss_ell(&RayRep::Phase(0.9), 4);
        assert_eq!(ss, HallElement::unit());
    }

    #[test]
    fn clockwise_factorization_identity() {
        for ctx in [ctx_s1_high(), ctx_s2_high(), ctx_wall()] {
            assert!(ctx.clockwise_identity_check(4));
        }
        let mut rng = StdRng::seed_from_u64(43);
        for n in [2usize, 3] {
            let ctx = random_exact_ctx(n, &mut rng);
            assert!(ctx.clockwise_identity_check(4));
        }
    }

    #[test]
    fn clockwise_frozen_a2_ray_order() {
        // generic chamber: three rays, phases φ(S1) > φ((1,1)) > φ(S2)
        let ctx = ctx_s1_high();
        let rays = ctx.stokes_rays(4);
        let reps: Vec<DimVec> = rays.iter().map(|r| r.rep.clone()).collect();
        assert_eq!(reps, vec![dv(&[1, 0]), dv(&[1, 1]), dv(&[0, 1])]);
        // and multiplying in that order reproduces the everywhere-1 function
        assert_eq!(ctx.clockwise_product(4), ctx.splus(4));
    }

    #[test]
    fn walls_and_signatures() {
        let q = QuiverSpec::new(2).unwrap();
        let walls = StabilityContext::walls_for(&q, &dv(&[1, 1])).unwrap();
        assert_eq!(walls, vec![(dv(&[1, 0]), dv(&[0, 1]))]);
        assert!(StabilityContext::walls_for(&q, &dv(&[1, 0]))
            .unwrap()
            .is_empty());
        assert_eq!(ctx_s1_high().chamber_signature(&dv(&[1, 1])).unwrap(), "+");
        assert_eq!(ctx_s2_high().chamber_signature(&dv(&[1, 1])).unwrap(), "-");
        assert_eq!(ctx_wall().chamber_signature(&dv(&[1, 1])).unwrap(), "0");
        // proportional pairs are excluded and unordered pairs deduplicated:
        // (2,2) leaves {(2,0),(0,2)}, {(2,1),(0,1)}, {(1,2),(1,0)}
        let w22 = StabilityContext::walls_for(&q, &dv(&[2, 2])).unwrap();
        assert!(w22.iter().all(|(b, g)| !b.proportional(g)));
        assert_eq!(w22.len(), 3);
        assert_eq!(ctx_wall().chamber_signature(&dv(&[2, 2])).unwrap(), "000");
    }

    #[test]
    fn delta_constant_within_chamber_signature() {
        // two Z samples with equal signatures give identical δ for all γ
        let mut rng = StdRng::seed_from_u64(47);
        let mut by_sig: HashMap<String, Vec<StabilityContext>> = HashMap::new();
        for _ in 0..12 {
            let ctx = random_exact_ctx(2, &mut rng);
            let sig = ctx.chamber_signature(&dv(&[2, 2])).unwrap();
            by_sig.entry(sig).or_default().push(ctx);
        }
        for (_, group) in by_sig {
            for pair in group.windows(2) {
                for gamma in pair[0].quiver().classes_up_to(4) {
                    assert_eq!(pair[0].delta(&gamma), pair[1].delta(&gamma));
                }
            }
        }
    }

    #[test]
    fn semisimple_of_equal_phase_semistable_iff_parts_are() {
        // M ⊕ N of equal phase: semistable ⟺ both M, N semistable
        let mut rng = StdRng::seed_from_u64(53);
        for n in [2usize, 3] {
            for _ in 0..3 {
                let ctx = random_exact_ctx(n, &mut rng);
                let all = ctx.quiver().iso_classes_up_to(5);
                for m in &all {
                    for w in &all {
                        let (cm, cw) = (m.class(n), w.class(n));
                        if m.total_dim() + w.total_dim() > 5 || !ctx.same_ray(&cm, &cw) {
                            continue;
                        }
                        let both = ctx.is_semistable(m).unwrap() && ctx.is_semistable(w).unwrap();
                        let sum = ctx.is_semistable(&m.direct_sum(w)).unwrap();
                        assert_eq!(both, sum, "{m:?} ⊕ {w:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn float_mode_matches_exact_mode_off_walls() {
        let mut rng = StdRng::seed_from_u64(59);
        for _ in 0..4 {
            let ctx = random_exact_ctx(3, &mut rng);
            let zf: Vec<Complex64> = (0..3)
                .map(|i| ctx.z_complex(&DimVec::unit(3, i)))
                .collect();
            let fctx = StabilityContext::new_float(QuiverSpec::new(3).unwrap(), zf).unwrap();
            for gamma in ctx.quiver().classes_up_to(4) {
                assert_eq!(ctx.delta(&gamma), fctx.delta(&gamma));
            }
        }
        // float mode detects the wall within tolerance
        let q = QuiverSpec::new(2).unwrap();
        let fw = StabilityContext::new_float(
            q,
            vec![Complex64::new(1.0, 1.0), Complex64::new(1.0 + 1e-15, 1.0)],
        )
        .unwrap();
        assert!(fw.same_ray(&dv(&[1, 0]), &dv(&[0, 1])));
    }
}

//! An independent check on the series transforms: realize the datum as a
//! linear connection `d − (Z/t² + f/t)dt` in the truncated word
//! representation, integrate a canonical solution with the prescribed
//! asymptotics at the irregular singularity `t = 0`, and read Stokes
//! factors and multipliers off solution ratios. Nothing from
//! [`crate::stokes`] or [`crate::multilog`] enters the computation, so
//! agreement is a genuine cross-check.
//!
//! Everything is integrated in the bounded gauge `G(t) = Y(t)·e^{Z/t}`,
//! which tends to 1 at the origin and satisfies
//! `G' = [Z,G]/t² + (f/t)·G`; the raw solution `Y` has entries spanning
//! `e^{±|Z|/|t₀|}`, which double precision cannot carry across a matching
//! radius, while `G` stays O(1) on the rays used here.
//!
//! A hard constraint shapes the extraction strategy. Perturbations of the
//! gauge matrix evolve by the modes `e^{−Z(γ)/t}`, and along a ray of
//! angle θ the mode of weight γ grows outward like `e^{a(1/t₀ − 1/|t|)}`
//! with `a = Re(Z(γ)e^{−iθ})`. Flanking a Stokes ray and forming the
//! ratio of the two canonical solutions — the textbook definition — needs
//! exactly the entries whose modes have `a ≈ |Z(γ)| > 0` there, so
//! roundoff seeded at the matching radius swamps them by `e^{|Z(γ)|/t₀}`
//! no matter how the tolerances are tuned. For a stability condition all
//! weights `Z(γ)` point into the upper half-plane, so rays in a lower arc
//! see every mode contract: the scheme below integrates one canonical
//! solution on such a base ray, continues it once around the circle at a
//! fixed outer radius (mild, polynomially conditioned), and reads the
//! full anticlockwise ratio. That ratio is the upper Stokes multiplier —
//! the phase-ordered product of all Stokes factors — and the individual
//! factors fall out of it by the triangular support factorization over
//! classes, which is exact combinatorics, not series.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graded::{EnvelopeElement, GradedLieElement, LieAlgebraSpec};
use crate::quiver::DimVec;
use crate::rk::{dop853, Dop853Opts};
use crate::stability::{RayRep, StabilityContext, TOL_RAY};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A dense complex matrix, row-major.
#[derive(Clone, Debug)]
pub struct Mat {
    pub n: usize,
    pub a: Vec<Complex64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat { n, a: vec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = ONE;
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.a[i * self.n + j] = v;
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.a[i * n + k];
                if aik == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += aik * other.a[k * n + j];
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!(self.n, other.n);
        Mat {
            n: self.n,
            a: self.a.iter().zip(&other.a).map(|(x, y)| x - y).collect(),
        }
    }

    pub fn scale(&self, k: Complex64) -> Mat {
        Mat { n: self.n, a: self.a.iter().map(|x| x * k).collect() }
    }

    pub fn max_norm(&self) -> f64 {
        self.a.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Solves `self · X = rhs` by LU decomposition with partial pivoting.
    pub fn solve(&self, rhs: &Mat) -> Result<Mat> {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut lu = self.a.clone();
        let mut x = rhs.a.clone();
        for col in 0..n {
            let (mut pivot, mut best) = (col, lu[col * n + col].norm());
            for row in col + 1..n {
                let v = lu[row * n + col].norm();
                if v > best {
                    pivot = row;
                    best = v;
                }
            }
            if best == 0.0 {
                return Err(Error::numerical("singular matrix in solution ratio"));
            }
            if pivot != col {
                for j in 0..n {
                    lu.swap(col * n + j, pivot * n + j);
                    x.swap(col * n + j, pivot * n + j);
                }
            }
            let d = lu[col * n + col];
            for row in col + 1..n {
                let m = lu[row * n + col] / d;
                if m == ZERO {
                    continue;
                }
                lu[row * n + col] = ZERO;
                for j in col + 1..n {
                    let v = lu[col * n + j];
                    lu[row * n + j] -= m * v;
                }
                for j in 0..n {
                    let v = x[col * n + j];
                    x[row * n + j] -= m * v;
                }
            }
        }
        for col in (0..n).rev() {
            let d = lu[col * n + col];
            for j in 0..n {
                x[col * n + j] /= d;
            }
            for row in 0..col {
                let m = lu[row * n + col];
                if m == ZERO {
                    continue;
                }
                for j in 0..n {
                    let v = x[col * n + j];
                    x[row * n + j] -= m * v;
                }
            }
        }
        Ok(Mat { n, a: x })
    }
}

/// The truncated left-regular representation: the free word basis of the
/// envelope up to the total-degree bound, `Z` acting diagonally by the
/// class of each word and `f` by left concatenation.
pub struct MatrixRep {
    spec: Arc<LieAlgebraSpec>,
    words: Vec<Vec<u16>>,
    index: HashMap<Vec<u16>, usize>,
    class_of: Vec<DimVec>,
    z_diag: Vec<Complex64>,
    f_mat: Mat,
}

impl MatrixRep {
    /// Builds the representation; exact construction, no arithmetic beyond
    /// evaluating `Z` on classes.
    pub fn new(
        stab: &StabilityContext,
        f: &GradedLieElement,
        dim_cap: usize,
    ) -> Result<Self> {
        let spec = f.spec().clone();
        if spec.rank() != stab.quiver().rank() {
            return Err(Error::domain(
                "stability condition and Lie data have different ranks",
            ));
        }
        let d = spec.truncation();
        let mut words: Vec<Vec<u16>> = vec![Vec::new()];
        let mut frontier: Vec<(Vec<u16>, u32)> = vec![(Vec::new(), 0)];
        while let Some((w, deg)) = frontier.pop() {
            for id in 0..spec.letters().len() as u16 {
                let next_deg = deg + spec.degree_total(id);
                if next_deg > d {
                    continue;
                }
                let mut next = w.clone();
                next.push(id);
                words.push(next.clone());
                frontier.push((next, next_deg));
                if words.len() > dim_cap {
                    return Err(Error::resource(format!(
                        "word basis exceeds the configured cap of {dim_cap}"
                    )));
                }
            }
        }
        words.sort_by_key(|w| {
            (w.iter().map(|&id| spec.degree_total(id)).sum::<u32>(), w.clone())
        });
        let index: HashMap<Vec<u16>, usize> =
            words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let class_of: Vec<DimVec> = words
            .iter()
            .map(|w| {
                let mut acc = DimVec::zeros(spec.rank());
                for &id in w {
                    acc = acc.add(&spec.letter(id).root);
                }
                acc
            })
            .collect();
        let z_diag: Vec<Complex64> = class_of
            .iter()
            .map(|c| if c.is_zero() { ZERO } else { stab.z_complex(c) })
            .collect();

        let n = words.len();
        let mut f_mat = Mat::zeros(n);
        for (col, w) in words.iter().enumerate() {
            let col_deg: u32 = w.iter().map(|&id| spec.degree_total(id)).sum();
            for (&id, &c) in f.coeffs() {
                if col_deg + spec.degree_total(id) > d {
                    continue;
                }
                let mut out = Vec::with_capacity(w.len() + 1);
                out.push(id);
                out.extend_from_slice(w);
                f_mat.set(index[&out], col, c);
            }
        }

        let rep = MatrixRep { spec, words, index, class_of, z_diag, f_mat };
        rep.check_commutation(stab)?;
        Ok(rep)
    }

    pub fn dim(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[Vec<u16>] {
        &self.words
    }

    pub fn class_of(&self) -> &[DimVec] {
        &self.class_of
    }

    pub fn z_diag(&self) -> &[Complex64] {
        &self.z_diag
    }

    pub fn f_matrix(&self) -> &Mat {
        &self.f_mat
    }

    pub fn word_index(&self, w: &[u16]) -> Option<usize> {
        self.index.get(w).copied()
    }

    /// Left multiplication strictly raises class (exactly, by word shape)
    /// and the weight of each nonzero entry matches the letter it prepends:
    /// `[Z, f_α·] = Z(α)·(f_α·)` up to roundoff in evaluating Z.
    fn check_commutation(&self, stab: &StabilityContext) -> Result<()> {
        let n = self.dim();
        for row in 0..n {
            for col in 0..n {
                let v = self.f_mat.get(row, col);
                if v == ZERO {
                    continue;
                }
                let diff = self.class_of[row]
                    .checked_sub(&self.class_of[col])
                    .ok_or_else(|| Error::domain("left multiplication lowered a class"))?;
                if diff.is_zero() {
                    return Err(Error::domain("left multiplication preserved a class"));
                }
                let gap = (self.z_diag[row] - self.z_diag[col] - stab.z_complex(&diff)).norm();
                if gap > 1e-12 * (1.0 + self.z_diag[row].norm() + self.z_diag[col].norm()) {
                    return Err(Error::numerical(format!(
                        "weight bookkeeping off by {gap:.2e} on a representation entry"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reads an envelope element off a matrix: the image of the unit word.
    pub fn to_envelope(&self, m: &Mat) -> EnvelopeElement {
        let unit = self.index[&Vec::new()];
        EnvelopeElement::from_words(
            self.spec.clone(),
            (0..self.dim()).map(|row| (self.words[row].clone(), m.get(row, unit))),
        )
    }
}

/// Tunables for matching and integration.
#[derive(Clone, Debug)]
pub struct OracleOpts {
    /// Relative tolerance handed to the integrator.
    pub rtol: f64,
    /// Absolute tolerance handed to the integrator.
    pub atol: f64,
    /// Highest order of the asymptotic series kept available.
    pub series_order: usize,
    /// |t| at which arcs run and ratios are taken.
    pub radius: f64,
    /// Target for the estimated matching error at the chosen radius.
    pub match_target: f64,
    /// Overrides the automatic matching-radius search when set.
    pub t0_override: Option<f64>,
    /// Hard cap on the representation dimension.
    pub dim_cap: usize,
    /// A unit-coefficient drift of the circled ratio above this is an
    /// extraction failure.
    pub leak_tol: f64,
}

impl Default for OracleOpts {
    fn default() -> Self {
        OracleOpts {
            rtol: 1e-12,
            atol: 1e-14,
            series_order: 38,
            radius: 2.5,
            match_target: 1e-13,
            t0_override: None,
            dim_cap: 4000,
            leak_tol: 1e-6,
        }
    }
}

/// A canonical solution followed along its ray in the bounded gauge:
/// samples of `G = Y·e^{Z/t}` from the matching radius out to the outer
/// radius.
#[derive(Clone, Debug)]
pub struct CanonicalSolution {
    /// Ray angle in radians.
    pub theta: f64,
    /// Matching radius |t₀|.
    pub t0: f64,
    /// Series order used at the matching radius.
    pub order: usize,
    /// Estimated size of the first omitted series term at t₀.
    pub matching_residual: f64,
    /// (|t|, gauge matrix) along the ray, first entry at t₀.
    pub samples: Vec<(f64, Mat)>,
}

impl CanonicalSolution {
    pub fn at_radius(&self) -> &Mat {
        &self.samples.last().expect("nonempty trajectory").1
    }
}

/// An extracted Stokes factor with its quality report.
#[derive(Clone, Debug)]
pub struct FactorExtraction {
    /// The factor: unit plus the components on the requested ray.
    pub factor: EnvelopeElement,
    /// Drift of the circled ratio's unit coefficient away from 1 — the
    /// numerical sanity indicator for the whole extraction.
    pub leakage: f64,
    /// Angle of the ray the factor sits on (radians).
    pub theta: f64,
    /// Matching data of the base solution: (order, t₀, residual).
    pub matching: (usize, f64, f64),
}

/// Both Stokes multipliers relative to an admissible base ray.
#[derive(Clone, Debug)]
pub struct MultiplierExtraction {
    /// Ratio of the base solution against its full anticlockwise
    /// continuation: the phase-ordered product of all Stokes factors.
    pub s_plus: EnvelopeElement,
    /// Ratio of two crossing-free continuations to the opposite ray;
    /// identity-up-to-integration-error by uniqueness of the canonical
    /// solution on a sector without Stokes rays.
    pub s_minus: EnvelopeElement,
}

/// Every per-ray factor recovered from one circled ratio, phases
/// descending (the order in which the anticlockwise ratio multiplies
/// them, leftmost first).
#[derive(Clone, Debug)]
pub struct FactorTable {
    /// (representative class, ray angle, factor) with angles descending.
    pub factors: Vec<(DimVec, f64, EnvelopeElement)>,
    /// Per-class components of the circled ratio minus 1.
    pub components: BTreeMap<DimVec, EnvelopeElement>,
    /// Unit-coefficient drift of the circled ratio.
    pub unit_drift: f64,
    /// Matching data of the base solution: (order, t₀, residual).
    pub matching: (usize, f64, f64),
}

/// Integrates the connection attached to one residue datum and extracts
/// its Stokes data from solution ratios.
pub struct ConnectionOracle {
    stab: StabilityContext,
    spec: Arc<LieAlgebraSpec>,
    rep: MatrixRep,
    series: Vec<Mat>,
    pub opts: OracleOpts,
}

impl ConnectionOracle {
    pub fn new(stab: StabilityContext, f: &GradedLieElement, opts: OracleOpts) -> Result<Self> {
        let rep = MatrixRep::new(&stab, f, opts.dim_cap)?;
        let series = formal_series(&rep, opts.series_order)?;
        Ok(ConnectionOracle { stab, spec: f.spec().clone(), rep, series, opts })
    }

    pub fn rep(&self) -> &MatrixRep {
        &self.rep
    }

    pub fn stability(&self) -> &StabilityContext {
        &self.stab
    }

    /// Coefficient matrices `H₀ = 1, H₁, …` of the formal gauge series.
    pub fn series(&self) -> &[Mat] {
        &self.series
    }

    /// The angles (radians, in (0, π) for a stability condition) of the
    /// Stokes rays of the representation: directions of `Z` on the classes
    /// of nonunit basis words, deduplicated ascending. Ratios of canonical
    /// solutions can jump across any of these.
    pub fn stokes_ray_angles(&self) -> Vec<f64> {
        let mut angles: Vec<f64> = Vec::new();
        for c in &self.rep.class_of[1..] {
            let a = self.stab.z_complex(c).arg();
            if !angles.iter().any(|&b| angle_close(a, b)) {
                angles.push(a);
            }
        }
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        angles
    }

    fn check_admissible(&self, theta: f64) -> Result<()> {
        for a in self.stokes_ray_angles() {
            if angle_close(theta, a) {
                return Err(Error::domain(format!(
                    "ray at angle {theta:.6} is a Stokes ray, not admissible"
                )));
            }
        }
        Ok(())
    }

    /// An angle from which every perturbation mode decays outward: the
    /// antipode of the bisector of the (upper half-plane) bundle of Stokes
    /// directions. The margin to the nearest non-contracting direction is
    /// `π/2 − spread/2 > 0`.
    pub fn base_angle(&self) -> f64 {
        let angles = self.stokes_ray_angles();
        if angles.is_empty() {
            return -PI / 2.0;
        }
        let (lo, hi) = (angles[0], angles[angles.len() - 1]);
        0.5 * (lo + hi) - PI
    }

    /// Truncation order and radius minimizing the estimated matching error
    /// `min_m ‖H_{m+1}‖·t₀^{m+1}`, scanning radii downward until the
    /// target is met (the series is factorially divergent, so for each t₀
    /// there is an optimal order).
    fn choose_matching(&self) -> (usize, f64, f64) {
        let orders = self.series.len() - 1;
        let best_at = |t0: f64| -> (usize, f64) {
            let mut best = (1, f64::INFINITY);
            for m in 1..orders {
                let est = self.series[m + 1].max_norm() * t0.powi(m as i32 + 1);
                if est < best.1 {
                    best = (m, est);
                }
            }
            best
        };
        if let Some(t0) = self.opts.t0_override {
            let (m, est) = best_at(t0);
            return (m, t0, est);
        }
        let mut t0 = 0.4_f64;
        let mut overall = (1, t0, f64::INFINITY);
        while t0 > 1e-3 {
            let (m, est) = best_at(t0);
            if est < overall.2 {
                overall = (m, t0, est);
            }
            if est <= self.opts.match_target {
                break;
            }
            t0 *= 0.85;
        }
        overall
    }

    /// Evaluates the truncated series `Σ_{k≤m} H_k t^k`.
    pub fn series_eval(&self, t: Complex64, m: usize) -> Mat {
        let mut acc = Mat::identity(self.rep.dim());
        let mut tk = ONE;
        for h in self.series.iter().take(m + 1).skip(1) {
            tk *= t;
            let n = acc.n;
            for i in 0..n * n {
                acc.a[i] += h.a[i] * tk;
            }
        }
        acc
    }

    fn rhs_at(&self, t: Complex64, g: &[Complex64], dg: &mut [Complex64]) {
        let n = self.rep.dim();
        let t2 = t * t;
        // [Z, G]/t²: entrywise weight difference
        for i in 0..n {
            for j in 0..n {
                let w = (self.rep.z_diag[i] - self.rep.z_diag[j]) / t2;
                dg[i * n + j] = w * g[i * n + j];
            }
        }
        // + (f/t)·G
        for i in 0..n {
            for k in 0..n {
                let fik = self.rep.f_mat.get(i, k);
                if fik == ZERO {
                    continue;
                }
                let fik_t = fik / t;
                for j in 0..n {
                    dg[i * n + j] += fik_t * g[k * n + j];
                }
            }
        }
    }

    /// Integrates the gauge matrix along the ray of angle `theta` from the
    /// start state at radius `r0` to radius `r1` (either direction).
    fn integrate_radial(&self, theta: f64, g0: &Mat, r0: f64, r1: f64) -> Result<Mat> {
        let u = Complex64::from_polar(1.0, theta);
        let opts = Dop853Opts { rtol: self.opts.rtol, atol: self.opts.atol, ..Default::default() };
        let y = dop853(
            |s, y, dy| {
                self.rhs_at(u * s, y, dy);
                for v in dy.iter_mut() {
                    *v *= u;
                }
            },
            r0,
            r1,
            &g0.a,
            &opts,
        )?;
        Ok(Mat { n: g0.n, a: y })
    }

    /// Continues the gauge matrix along the arc |t| = r from angle `th0`
    /// to `th1` (either direction, any winding).
    fn integrate_arc(&self, g0: &Mat, r: f64, th0: f64, th1: f64) -> Result<Mat> {
        let opts = Dop853Opts { rtol: self.opts.rtol, atol: self.opts.atol, ..Default::default() };
        let y = dop853(
            |th, y, dy| {
                let t = Complex64::from_polar(r, th);
                self.rhs_at(t, y, dy);
                let dt = Complex64::new(0.0, 1.0) * t;
                for v in dy.iter_mut() {
                    *v *= dt;
                }
            },
            th0,
            th1,
            &g0.a,
            &opts,
        )?;
        Ok(Mat { n: g0.n, a: y })
    }

    /// The canonical solution on an admissible ray: matched to the optimal
    /// truncation of the asymptotic series at a small radius, then carried
    /// outward to the outer radius, sampling at geometric checkpoints.
    ///
    /// Transport along rays close to a Stokes direction degrades in the
    /// entries whose weight points along the ray (their perturbation modes
    /// grow outward); extraction therefore goes through
    /// [`Self::factor_table`], which only ever integrates along the
    /// uniformly contracting base ray.
    pub fn integrate_ray(&self, ray: &RayRep) -> Result<CanonicalSolution> {
        let theta = self.ray_angle(ray);
        self.check_admissible(theta)?;
        let (order, t0, matching_residual) = self.choose_matching();
        let g0 = self.series_eval(Complex64::from_polar(t0, theta), order);
        let mut samples = vec![(t0, g0)];
        let mut r = t0;
        while r < self.opts.radius {
            let next = (r * 2.0).min(self.opts.radius);
            let g = self.integrate_radial(theta, &samples.last().unwrap().1, r, next)?;
            samples.push((next, g));
            r = next;
        }
        Ok(CanonicalSolution { theta, t0, order, matching_residual, samples })
    }

    fn ray_angle(&self, ray: &RayRep) -> f64 {
        match ray {
            RayRep::Class(c) => self.stab.z_complex(c).arg(),
            RayRep::Dir(d) => d.arg(),
            RayRep::Phase(phi) => phi * PI,
        }
    }

    /// `e^{Z/t}·X·e^{−Z/t}` entrywise: the conjugation undoing the bounded
    /// gauge at the evaluation point.
    fn sandwich(&self, x: &Mat, t: Complex64) -> Mat {
        let n = x.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let w = ((self.rep.z_diag[i] - self.rep.z_diag[j]) / t).exp();
                out.set(i, j, x.get(i, j) * w);
            }
        }
        out
    }

    /// The ratio of the base canonical solution against its continuation
    /// once around the circle anticlockwise, as an envelope element. Both
    /// solutions solve the same equation, so the ratio is constant: it is
    /// the product of all Stokes factors in descending phase order.
    pub fn circled_ratio(&self) -> Result<(EnvelopeElement, (usize, f64, f64))> {
        let theta = self.base_angle();
        let base = self.integrate_ray(&RayRep::Dir(Complex64::from_polar(1.0, theta)))?;
        let r = self.opts.radius;
        let circled = self.integrate_arc(base.at_radius(), r, theta, theta + 2.0 * PI)?;
        let t_star = Complex64::from_polar(r, theta);
        let ratio = self.sandwich(&base.at_radius().solve(&circled)?, t_star);
        Ok((
            self.rep.to_envelope(&ratio),
            (base.order, base.t0, base.matching_residual),
        ))
    }

    /// Splits the circled ratio into per-ray Stokes factors.
    ///
    /// The ratio is the product `S_{ψ_K}⋯S_{ψ_1}` over all Stokes rays,
    /// phases strictly descending left to right, each factor equal to 1
    /// plus terms supported on the classes of its own ray. Such a product
    /// determines its factors uniquely: the class-γ component of the
    /// product is δ_γ plus products of lower-class components over
    /// strictly descending rays, and the triangular recursion below
    /// removes them. This inversion is exact algebra on the computed
    /// ratio, independent of any series expansion.
    pub fn factor_table(&self) -> Result<FactorTable> {
        let (ratio, matching) = self.circled_ratio()?;
        let unit_drift = (ratio.scalar_part() - ONE).norm();
        if unit_drift > self.opts.leak_tol {
            return Err(Error::numerical(format!(
                "unit coefficient of the circled ratio drifted by {unit_drift:.2e} \
                 (limit {:.1e}); extraction failed",
                self.opts.leak_tol
            )));
        }

        // per-class components of ratio − 1
        let mut kmap: BTreeMap<DimVec, EnvelopeElement> = BTreeMap::new();
        for (w, &cf) in ratio.coeffs() {
            if w.is_empty() {
                continue;
            }
            let cls = word_class(&self.spec, w);
            let e = EnvelopeElement::from_words(self.spec.clone(), [(w.clone(), cf)]);
            match kmap.remove(&cls) {
                Some(prev) => {
                    kmap.insert(cls, prev.add(&e)?);
                }
                None => {
                    kmap.insert(cls, e);
                }
            }
        }

        let mut deltas: BTreeMap<DimVec, EnvelopeElement> = BTreeMap::new();
        let order: Vec<DimVec> = kmap.keys().cloned().collect();
        for gamma in &order {
            let mut memo: HashMap<DimVec, EnvelopeElement> = HashMap::new();
            let d = self.peel_rec(&kmap, gamma, gamma, &mut memo)?;
            if !d.coeffs().is_empty() {
                deltas.insert(gamma.clone(), d);
            }
        }

        // group by ray, angles descending
        let mut rays: Vec<(DimVec, f64, EnvelopeElement)> = Vec::new();
        for (gamma, delta) in &deltas {
            let angle = self.stab.z_complex(gamma).arg();
            match rays.iter_mut().find(|(rep, _, _)| self.stab.same_ray(rep, gamma)) {
                Some((_, _, acc)) => *acc = acc.add(delta)?,
                None => rays.push((gamma.clone(), angle, delta.clone())),
            }
        }
        rays.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let unit = EnvelopeElement::one(self.spec.clone());
        let factors = rays
            .into_iter()
            .map(|(rep, angle, acc)| Ok((rep, angle, unit.add(&acc)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(FactorTable { factors, components: deltas, unit_drift, matching })
    }

    // S(rem) = k_rem − Σ k_c · S(rem−c) over nonzero proper c ≤ rem whose
    // phase is strictly above the phase of γ; then δ_γ = S(γ). Mirrors the
    // product structure: the leftmost (highest-phase) block of every
    // descending composition is peeled off first.
    fn peel_rec(
        &self,
        kmap: &BTreeMap<DimVec, EnvelopeElement>,
        gamma: &DimVec,
        rem: &DimVec,
        memo: &mut HashMap<DimVec, EnvelopeElement>,
    ) -> Result<EnvelopeElement> {
        if let Some(hit) = memo.get(rem) {
            return Ok(hit.clone());
        }
        let mut acc = match kmap.get(rem) {
            Some(k) => k.clone(),
            None => EnvelopeElement::zero(self.spec.clone()),
        };
        for c in rem.positive_subvectors() {
            if c == *rem {
                continue;
            }
            let Some(head) = kmap.get(&c) else { continue };
            if self.stab.cross_sign(&c, gamma) <= 0 {
                continue;
            }
            let rest = rem.checked_sub(&c).expect("proper subvector");
            let tail = self.peel_rec(kmap, gamma, &rest, memo)?;
            if tail.coeffs().is_empty() {
                continue;
            }
            acc = acc.sub(&head.product(&tail)?)?;
        }
        memo.insert(rem.clone(), acc.clone());
        Ok(acc)
    }

    /// The Stokes factor on the ray through `Z(class)`: read from the
    /// circled-ratio factorization. Classes sharing the ray contribute to
    /// the same factor; a direction carrying no classes yields the unit.
    pub fn extract_stokes_factor(&self, class: &DimVec) -> Result<FactorExtraction> {
        let theta = self.stab.z_complex(class).arg();
        let table = self.factor_table()?;
        let factor = table
            .factors
            .iter()
            .find(|(rep, _, _)| self.stab.same_ray(rep, class))
            .map(|(_, _, f)| f.clone())
            .unwrap_or_else(|| EnvelopeElement::one(self.spec.clone()));
        Ok(FactorExtraction {
            factor,
            leakage: table.unit_drift,
            theta,
            matching: table.matching,
        })
    }

    /// Factor lookup at an arbitrary angle: the unit unless some class
    /// direction matches the angle exactly.
    pub fn extract_factor_at(&self, theta: f64) -> Result<FactorExtraction> {
        let table = self.factor_table()?;
        let factor = table
            .factors
            .iter()
            .find(|(_, a, _)| angle_close(*a, theta))
            .map(|(_, _, f)| f.clone())
            .unwrap_or_else(|| EnvelopeElement::one(self.spec.clone()));
        Ok(FactorExtraction {
            factor,
            leakage: table.unit_drift,
            theta,
            matching: table.matching,
        })
    }

    /// Stokes multipliers relative to an admissible base ray `r` with both
    /// `r` and `−r` in the ray-free lower sector (the standard choice is
    /// the positive real direction, below every Stokes ray of a stability
    /// condition).
    ///
    /// The anticlockwise multiplier is the ratio of the canonical solution
    /// against its own continuation once around (the continuation to the
    /// opposite ray from above versus from below); the clockwise one
    /// compares two crossing-free continuations and is the identity up to
    /// integration error.
    pub fn extract_stokes_multipliers(&self, ray: &RayRep) -> Result<MultiplierExtraction> {
        let theta_r = self.ray_angle(ray);
        self.check_admissible(theta_r)?;
        self.check_admissible(theta_r + PI)?;
        let angles = self.stokes_ray_angles();
        if let (Some(&lo), Some(&hi)) = (angles.first(), angles.last()) {
            let th = normalize_angle(theta_r);
            if !(th > hi - PI && th < lo) {
                return Err(Error::domain(format!(
                    "base angle {th:.4} must lie below every Stokes ray and above \
                     their antipodes (between {:.4} and {lo:.4})",
                    hi - PI
                )));
            }
        }

        let theta0 = self.base_angle();
        let base = self.integrate_ray(&RayRep::Dir(Complex64::from_polar(1.0, theta0)))?;
        let r = self.opts.radius;

        // two crossing-free routes to the opposite ray: direct, and via the
        // base ray's own angle (staying inside the lower sector)
        let down = self.integrate_arc(base.at_radius(), r, theta0, theta_r - PI)?;
        let via = self.integrate_arc(base.at_radius(), r, theta0, theta_r)?;
        let via_down = self.integrate_arc(&via, r, theta_r, theta_r - PI)?;
        // the full anticlockwise continuation to the same point
        let up = self.integrate_arc(&via, r, theta_r, theta_r + PI)?;

        let t_star = Complex64::from_polar(r, theta_r - PI);
        let s_minus = self.rep.to_envelope(&self.sandwich(&down.solve(&via_down)?, t_star));
        let s_plus = self.rep.to_envelope(&self.sandwich(&down.solve(&up)?, t_star));
        Ok(MultiplierExtraction { s_plus, s_minus })
    }
}

/// Coefficients `H₀ = 1, H₁, …, H_m` of the formal gauge series: plugging
/// `G = Σ H_k t^k` into `G' = [Z,G]/t² + (f/t)G` gives the recursion
/// `[Z, H_{k+1}] = (k − f)·H_k`, solved entrywise because every nonzero
/// source entry strictly raises class, where `Z` never has a zero weight
/// gap. Same-weight source entries must vanish identically (they do, by
/// the raising structure — enforced, not assumed).
pub fn formal_series(rep: &MatrixRep, order: usize) -> Result<Vec<Mat>> {
    let n = rep.dim();
    let mut out = vec![Mat::identity(n)];
    for k in 0..order {
        let prev = &out[k];
        // (k − f)·H_k
        let mut src = prev.scale(Complex64::new(k as f64, 0.0));
        let fh = rep.f_mat.mul(prev);
        for i in 0..n * n {
            src.a[i] -= fh.a[i];
        }
        let mut next = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let v = src.get(i, j);
                let gap = rep.z_diag[i] - rep.z_diag[j];
                if gap == ZERO {
                    if v != ZERO {
                        return Err(Error::numerical(format!(
                            "zero weight gap with nonzero source {v} in the formal series"
                        )));
                    }
                    continue;
                }
                next.set(i, j, v / gap);
            }
        }
        out.push(next);
    }
    Ok(out)
}

fn word_class(spec: &Arc<LieAlgebraSpec>, w: &[u16]) -> DimVec {
    let mut acc = DimVec::zeros(spec.rank());
    for &id in w {
        acc = acc.add(&spec.letter(id).root);
    }
    acc
}

fn normalize_angle(a: f64) -> f64 {
    let mut d = a % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    }
    if d <= -PI {
        d += 2.0 * PI;
    }
    d
}

fn angle_close(a: f64, b: f64) -> bool {
    normalize_angle(a - b).abs() <= TOL_RAY.max(1e-9)
}

//! The deformation side: how the residue datum attached to a stability
//! condition varies with the condition.
//!
//! [`f_of_z`] composes the two halves of the crate: the exact semistable
//! indicators `δ` and their ray-logarithms `ε` from [`crate::stability`],
//! read into the Lie-algebra letter basis, then pushed through the inverse
//! Stokes series of [`crate::stokes`]. The result is the unique residue
//! whose Stokes factors reproduce the semistable family — checked on every
//! call by closing the diagram back through `delta` components.
//!
//! Around that pipeline sit the two differential experiments:
//!
//! * [`pde_residual`] — central differences of `f` in the `2N` real
//!   coordinates of the stability values against the bracket form
//!   `Σ_{β+γ=α} [f_β, f_γ] · dZ(γ)/Z(γ)`, which an isomonodromic family
//!   must satisfy;
//! * [`wallcross_experiment`] — a straight path crossing one wall of a
//!   chosen class: `δ` and `ε` jump (recorded), the ordered product over
//!   the merging rays does not (exact Hall arithmetic), and `f` closes the
//!   gap across the wall at a measured rate.

use std::collections::BTreeSet;

use num::BigRational;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graded::GradedLieElement;
use crate::hall::HallElement;
use crate::quiver::{DimVec, QuiverSpec};
use crate::stability::{RayRep, StabilityContext};
use crate::stokes::StokesContext;

/// Wall-location accuracy along a path, in path-parameter units.
pub const BISECTION_TOL: f64 = 1e-10;

/// Tolerance for closing the diagram `f ↦ δ components ↦ Hall` against the
/// exact category `δ`.
pub const CLOSURE_TOL: f64 = 1e-8;

/// One letter coefficient of a residue table.
#[derive(Clone, Debug, Serialize)]
pub struct FEntry {
    /// Interval label of the letter.
    pub letter: String,
    /// Its class.
    pub root: DimVec,
    /// Coefficient as `[re, im]`.
    pub value: [f64; 2],
}

/// One exact Hall coefficient, serialized losslessly.
#[derive(Clone, Debug, Serialize)]
pub struct HallEntry {
    /// Display form of the iso-class (decomposition into intervals).
    pub class: String,
    /// Exact rational coefficient as a string.
    pub coeff: String,
}

/// Finite-difference residual of the deformation equation for one class.
#[derive(Clone, Debug, Serialize)]
pub struct PdeRecord {
    pub alpha: DimVec,
    /// One residual per real coordinate, ordered
    /// `Re z₁, Im z₁, …, Re z_N, Im z_N`.
    pub per_direction: Vec<f64>,
    /// The maximum over directions.
    pub residual: f64,
}

/// The finite-difference section of a report.
#[derive(Clone, Debug, Serialize)]
pub struct PdeSection {
    /// Step used by the central differences.
    pub h: f64,
    pub records: Vec<PdeRecord>,
    /// Cauchy–Riemann defects `‖∂f/∂(Im zⱼ) − i·∂f/∂(Re zⱼ)‖`, one per
    /// vertex: near zero exactly when the dependence on `Z` is holomorphic.
    pub cauchy_riemann: Vec<f64>,
}

/// Values recorded on one side of a crossed wall.
#[derive(Clone, Debug, Serialize)]
pub struct ChamberRecord {
    pub z: Vec<[f64; 2]>,
    /// Sign pattern over the walls of the experiment class.
    pub signature: String,
    /// Exact `δ_α` on this side.
    pub delta_alpha: Vec<HallEntry>,
    /// Exact `ε_α` on this side.
    pub epsilon_alpha: Vec<HallEntry>,
}

/// The two-sided gap of the residue at one offset from the wall.
#[derive(Clone, Debug, Serialize)]
pub struct ContinuityRecord {
    /// Offset from the crossing in path-parameter units.
    pub eta: f64,
    /// `‖f(s*+η) − f(s*−η)‖` restricted to the experiment class.
    pub gap_alpha: f64,
    /// The same gap over all letters.
    pub gap_full: f64,
}

/// Everything measured while crossing one wall.
#[derive(Clone, Debug, Serialize)]
pub struct WallcrossSection {
    pub alpha: DimVec,
    /// The wall that was crossed, as its unordered class pair.
    pub wall: [DimVec; 2],
    /// Path parameter of the crossing.
    pub s_star: f64,
    /// Values at the start (`s = 0`) and end (`s = 1`) of the path.
    pub chambers: [ChamberRecord; 2],
    /// Max-norm of the jump of `δ_α` between the two sides.
    pub delta_jump: f64,
    /// Max-norm of the jump of `ε_α` between the two sides.
    pub epsilon_jump: f64,
    /// Two-sided gaps of `f`, one per requested offset, descending.
    pub continuity: Vec<ContinuityRecord>,
    /// Least-squares slope of `log gap_alpha` against `log η`.
    pub continuity_order: f64,
    /// Whether the phase-ordered product over the merging rays is exactly
    /// equal before, on, and after the wall.
    pub sector_products_equal: bool,
    /// That product, evaluated on the wall.
    pub on_wall_product: Vec<HallEntry>,
    /// Whether the full clockwise factorization identity held on each side.
    pub clockwise_identity: [bool; 2],
}

/// Experiment settings echoed into every report.
#[derive(Clone, Debug, Serialize)]
pub struct ReportSettings {
    pub truncation: u32,
    /// Finite-difference step, when a PDE section is present.
    pub h: Option<f64>,
    /// Wall offsets, when a wall-crossing section is present.
    pub etas: Vec<f64>,
    pub bisection_tol: f64,
    pub closure_tol: f64,
}

/// Output of the deformation experiments: sampled stability values with
/// their residue tables, plus the optional differential sections.
#[derive(Clone, Debug, Serialize)]
pub struct IsomonodromyReport {
    pub settings: ReportSettings,
    /// Path parameters of the samples (a single `0.0` for point checks).
    pub sample_s: Vec<f64>,
    /// Stability values per sample, `[re, im]` per vertex.
    pub z_samples: Vec<Vec<[f64; 2]>>,
    /// Residue table per sample.
    pub f_tables: Vec<Vec<FEntry>>,
    pub pde: Option<PdeSection>,
    pub wallcross: Option<WallcrossSection>,
}

/// The category ray-logarithms `Σ_α ε_α`, read into the letter basis.
///
/// Each `ε_α` is an exact Hall element supported on indecomposables
/// (anything else is an error, not dropped), and the letters are exactly
/// the indecomposable indicators, so this is a change of basis, not an
/// approximation.
pub fn epsilon_lie(ctx: &StokesContext) -> Result<GradedLieElement> {
    let stab = ctx.stability();
    let mut acc: HallElement<BigRational> = HallElement::zero();
    for alpha in stab.quiver().classes_up_to(ctx.truncation()) {
        acc = acc.add(&stab.epsilon(&alpha)?);
    }
    GradedLieElement::from_hall(
        ctx.spec().clone(),
        ctx.classes(),
        &acc.map_coeffs(rational_to_complex),
        0.0,
    )
}

/// The residue datum of the stability condition: `ε` from the category,
/// inverted through the Stokes series, then certified by closing the
/// diagram — the `δ` components recomputed from `f` must realize to the
/// exact semistable indicators within [`CLOSURE_TOL`].
pub fn f_of_z(stab: &StabilityContext, truncation: u32) -> Result<GradedLieElement> {
    let ctx = StokesContext::new(fresh(stab)?, truncation);
    let f = f_of_z_unchecked(&ctx)?;
    closure_check(&ctx, &f)?;
    Ok(f)
}

/// The pipeline without the closing certificate, for bulk sampling where
/// the caller compares the results against each other anyway.
fn f_of_z_unchecked(ctx: &StokesContext) -> Result<GradedLieElement> {
    ctx.stokes_inverse(&epsilon_lie(ctx)?)
}

fn closure_check(ctx: &StokesContext, f: &GradedLieElement) -> Result<()> {
    let stab = ctx.stability();
    let q = stab.quiver();
    let deltas = ctx.delta_components(f)?;
    for gamma in q.classes_up_to(ctx.truncation()) {
        let exact = stab.delta(&gamma).map_coeffs(rational_to_complex);
        let realized = match deltas.get(&gamma) {
            Some(e) => e.to_hall(q, ctx.classes()),
            None => HallElement::zero(),
        };
        let defect = hall_max_norm(&realized.sub(&exact));
        if defect > CLOSURE_TOL {
            return Err(Error::numerical(format!(
                "residue of the stability condition fails to reproduce the \
                 semistable family at {gamma:?}: defect {defect:.2e}"
            )));
        }
    }
    Ok(())
}

/// Central-difference residuals of the deformation equation
/// `∂f_α = Σ_{β+γ=α} [f_β, f_γ] · ∂Z(γ)/Z(γ)` at `Z`, one record per
/// positive class within the truncation, plus the Cauchy–Riemann defects.
///
/// `Z` must keep a margin of `10h` from every wall visible at this
/// truncation, so that all difference stencils sample one chamber.
pub fn pde_residual(
    stab: &StabilityContext,
    truncation: u32,
    h: f64,
) -> Result<PdeSection> {
    if !(h > 0.0) {
        return Err(Error::domain("step must be positive"));
    }
    let q = stab.quiver().clone();
    let n = q.rank();
    let z0: Vec<Complex64> = base_z(stab);
    wall_margin_check(stab, truncation, h)?;

    let ctx = StokesContext::new(fresh(stab)?, truncation);
    let f0 = f_of_z_unchecked(&ctx)?;
    let spec = f0.spec().clone();

    // derivative of f along each real coordinate, by central differences
    let diffs: Vec<GradedLieElement> = (0..2 * n)
        .into_par_iter()
        .map(|k| -> Result<GradedLieElement> {
            let mut zp = z0.clone();
            let mut zm = z0.clone();
            let (j, im) = (k / 2, k % 2 == 1);
            let step = if im { Complex64::new(0.0, h) } else { Complex64::new(h, 0.0) };
            zp[j] += step;
            zm[j] -= step;
            let fp = f_of_z_unchecked(&StokesContext::new(
                StabilityContext::new_float(q.clone(), zp)?,
                truncation,
            ))?;
            let fm = f_of_z_unchecked(&StokesContext::new(
                StabilityContext::new_float(q.clone(), zm)?,
                truncation,
            ))?;
            Ok(fp.sub(&fm)?.scale(Complex64::new(1.0 / (2.0 * h), 0.0)))
        })
        .collect::<Result<_>>()?;

    // the bracket form along the same coordinates: dZ(γ) is exactly linear,
    // (∂_k Z)(γ) = γⱼ or i·γⱼ
    let rhs: Vec<GradedLieElement> = (0..2 * n)
        .map(|k| -> Result<GradedLieElement> {
            let (j, im) = (k / 2, k % 2 == 1);
            let mut acc = GradedLieElement::zero(spec.clone());
            for (&gid, &gc) in f0.coeffs() {
                let gamma = &spec.letter(gid).root;
                let gj = gamma.0[j] as f64;
                if gj == 0.0 {
                    continue;
                }
                let dlog = if im { Complex64::new(0.0, gj) } else { Complex64::new(gj, 0.0) }
                    / stab.z_complex(gamma);
                let fg = GradedLieElement::from_coeffs(spec.clone(), [(gid, gc)]);
                acc = acc.add(&f0.bracket(&fg)?.scale(dlog))?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    for alpha in q.classes_up_to(truncation) {
        let per_direction: Vec<f64> = (0..2 * n)
            .map(|k| {
                let lhs = diffs[k].graded_part(&alpha);
                let r = rhs[k].graded_part(&alpha);
                lhs.sub(&r).map(|d| d.max_norm()).unwrap_or(f64::INFINITY)
            })
            .collect();
        let residual = per_direction.iter().cloned().fold(0.0, f64::max);
        records.push(PdeRecord { alpha, per_direction, residual });
    }

    let cauchy_riemann = (0..n)
        .map(|j| {
            let i = Complex64::new(0.0, 1.0);
            diffs[2 * j + 1]
                .sub(&diffs[2 * j].scale(i))
                .map(|d| d.max_norm())
                .unwrap_or(f64::INFINITY)
        })
        .collect();

    Ok(PdeSection { h, records, cauchy_riemann })
}

/// A point check: the residue table at `Z` together with the deformation
/// residuals, packaged as a report.
pub fn isomonodromy_check(
    stab: &StabilityContext,
    truncation: u32,
    h: f64,
) -> Result<IsomonodromyReport> {
    let f = f_of_z(stab, truncation)?;
    let pde = pde_residual(stab, truncation, h)?;
    Ok(IsomonodromyReport {
        settings: ReportSettings {
            truncation,
            h: Some(h),
            etas: Vec::new(),
            bisection_tol: BISECTION_TOL,
            closure_tol: CLOSURE_TOL,
        },
        sample_s: vec![0.0],
        z_samples: vec![z_to_pairs(&base_z(stab))],
        f_tables: vec![f_table(&f)],
        pde: Some(pde),
        wallcross: None,
    })
}

/// Crosses one wall of `alpha` along the straight path from `start` to
/// `end` and records what jumps and what does not: the exact `δ_α`/`ε_α`
/// on both sides, the ordered Hall product over the merging rays before /
/// exactly on / after the wall, and the two-sided gap of the residue at
/// each offset in `etas` with its decay order.
pub fn wallcross_experiment(
    q: &QuiverSpec,
    alpha: &DimVec,
    start: &[Complex64],
    end: &[Complex64],
    truncation: u32,
    etas: &[f64],
) -> Result<IsomonodromyReport> {
    if start.len() != q.rank() || end.len() != q.rank() {
        return Err(Error::domain("path endpoints must list one value per vertex"));
    }
    if alpha.0.len() != q.rank() || alpha.is_zero() || alpha.total() > truncation {
        return Err(Error::domain("experiment class must be positive and within the truncation"));
    }
    let mut etas: Vec<f64> = etas.to_vec();
    etas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if etas.is_empty() || etas.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::domain("offsets must be positive"));
    }
    let at = |s: f64| -> Vec<Complex64> {
        start
            .iter()
            .zip(end)
            .map(|(a, b)| a + (b - a) * s)
            .collect()
    };
    let stab_at = |s: f64| StabilityContext::new_float(q.clone(), at(s));
    let stab0 = stab_at(0.0)?;
    let stab1 = stab_at(1.0)?;

    // locate the single transversal crossing among the walls of alpha
    let walls = StabilityContext::walls_for(q, alpha)?;
    let wall_fn = |w: &(DimVec, DimVec), s: f64| -> Result<f64> {
        let st = stab_at(s)?;
        let (zb, zg) = (st.z_complex(&w.0), st.z_complex(&w.1));
        Ok((zb * zg.conj()).im)
    };
    // sign scan on a fine grid; grid points landing exactly on a wall are
    // bridged (the surrounding signs decide whether it was a crossing)
    let grid = 256;
    let mut crossing: Option<(usize, f64, f64)> = None;
    for (wi, w) in walls.iter().enumerate() {
        if wall_fn(w, 0.0)? == 0.0 || wall_fn(w, 1.0)? == 0.0 {
            return Err(Error::domain("path endpoint sits on a wall of the experiment class"));
        }
        let mut prev_s = 0.0;
        let mut prev_v = wall_fn(w, 0.0)?;
        for g in 1..=grid {
            let s = g as f64 / grid as f64;
            let v = wall_fn(w, s)?;
            if v == 0.0 {
                continue;
            }
            if prev_v.signum() != v.signum() {
                if crossing.is_some() {
                    return Err(Error::domain(
                        "path must cross exactly one wall of the experiment class",
                    ));
                }
                crossing = Some((wi, prev_s, s));
            }
            prev_s = s;
            prev_v = v;
        }
    }
    let Some((wi, mut lo, mut hi)) = crossing else {
        return Err(Error::domain("path does not cross any wall of the experiment class"));
    };
    let wall = walls[wi].clone();
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if wall_fn(&wall, lo)?.signum() == wall_fn(&wall, mid)?.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s_star = 0.5 * (lo + hi);
    if s_star - etas[0] <= 0.0 || s_star + etas[0] >= 1.0 {
        return Err(Error::domain(
            "largest offset reaches past a path endpoint; shorten the offsets or extend the path",
        ));
    }

    // chamber records at the endpoints, exact
    let chamber = |stab: &StabilityContext| -> Result<ChamberRecord> {
        Ok(ChamberRecord {
            z: z_to_pairs(&base_z(stab)),
            signature: stab.chamber_signature(alpha)?,
            delta_alpha: hall_entries(&stab.delta(alpha)),
            epsilon_alpha: hall_entries(&stab.epsilon(alpha)?),
        })
    };
    let chambers = [chamber(&stab0)?, chamber(&stab1)?];
    let delta_jump = hall_max_norm(
        &stab0
            .delta(alpha)
            .sub(&stab1.delta(alpha))
            .map_coeffs(rational_to_complex),
    );
    let epsilon_jump = hall_max_norm(
        &stab0
            .epsilon(alpha)?
            .sub(&stab1.epsilon(alpha)?)
            .map_coeffs(rational_to_complex),
    );

    // the merging-ray product, before / exactly on / after the wall
    let on_wall = on_wall_point(q, &wall, &at(s_star))?;
    let p_before = cone_product(&stab0, &wall, truncation)?;
    let p_on = cone_product(&on_wall, &wall, truncation)?;
    let p_after = cone_product(&stab1, &wall, truncation)?;
    let sector_products_equal =
        p_before.sub(&p_on).is_zero() && p_after.sub(&p_on).is_zero();
    let clockwise_identity = [
        stab0.clockwise_identity_check(truncation),
        stab1.clockwise_identity_check(truncation),
    ];

    // residue samples: a uniform grid for plotting plus the offset pairs
    let mut sample_s: Vec<f64> = (0..=16)
        .map(|i| i as f64 / 16.0)
        .filter(|s| (s - s_star).abs() > 1e-3)
        .collect();
    for &eta in &etas {
        sample_s.push(s_star - eta);
        sample_s.push(s_star + eta);
    }
    sample_s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let samples: Vec<(Vec<Complex64>, GradedLieElement)> = sample_s
        .par_iter()
        .map(|&s| -> Result<_> {
            let z = at(s);
            let ctx = StokesContext::new(
                StabilityContext::new_float(q.clone(), z.clone())?,
                truncation,
            );
            Ok((z, f_of_z_unchecked(&ctx)?))
        })
        .collect::<Result<_>>()?;

    let f_at = |s: f64| -> &GradedLieElement {
        let i = sample_s
            .iter()
            .position(|&t| (t - s).abs() < 1e-12)
            .expect("sample present");
        &samples[i].1
    };
    let mut continuity = Vec::new();
    for &eta in &etas {
        let gap = f_at(s_star + eta).sub(f_at(s_star - eta))?;
        continuity.push(ContinuityRecord {
            eta,
            gap_alpha: gap.graded_part(alpha).max_norm(),
            gap_full: gap.max_norm(),
        });
    }
    let continuity_order = fit_order(&continuity);

    Ok(IsomonodromyReport {
        settings: ReportSettings {
            truncation,
            h: None,
            etas,
            bisection_tol: BISECTION_TOL,
            closure_tol: CLOSURE_TOL,
        },
        sample_s,
        z_samples: samples.iter().map(|(z, _)| z_to_pairs(z)).collect(),
        f_tables: samples.iter().map(|(_, f)| f_table(f)).collect(),
        pde: None,
        wallcross: Some(WallcrossSection {
            alpha: alpha.clone(),
            wall: [wall.0, wall.1],
            s_star,
            chambers,
            delta_jump,
            epsilon_jump,
            continuity,
            continuity_order,
            sector_products_equal,
            on_wall_product: hall_entries(&p_on),
            clockwise_identity,
        }),
    })
}

/// Rebuilds a context over the same data (contexts carry caches and are
/// not clonable).
fn fresh(stab: &StabilityContext) -> Result<StabilityContext> {
    StabilityContext::new(stab.quiver().clone(), stab.z_data().clone())
}

fn base_z(stab: &StabilityContext) -> Vec<Complex64> {
    (0..stab.quiver().rank())
        .map(|j| {
            let mut e = DimVec::zeros(stab.quiver().rank());
            e.0[j] = 1;
            stab.z_complex(&e)
        })
        .collect()
}

fn z_to_pairs(z: &[Complex64]) -> Vec<[f64; 2]> {
    z.iter().map(|v| [v.re, v.im]).collect()
}

fn f_table(f: &GradedLieElement) -> Vec<FEntry> {
    let spec = f.spec();
    f.coeffs()
        .iter()
        .map(|(&id, c)| {
            let letter = spec.letter(id);
            FEntry {
                letter: letter.label.clone(),
                root: letter.root.clone(),
                value: [c.re, c.im],
            }
        })
        .collect()
}

fn hall_entries(e: &HallElement<BigRational>) -> Vec<HallEntry> {
    e.terms()
        .iter()
        .map(|(m, c)| HallEntry { class: m.to_string(), coeff: c.to_string() })
        .collect()
}

fn rational_to_complex(r: &BigRational) -> Complex64 {
    Complex64::new(r.to_f64().unwrap_or(f64::NAN), 0.0)
}

fn hall_max_norm(e: &HallElement<Complex64>) -> f64 {
    e.terms().values().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Every wall pair visible at this truncation must satisfy
/// `|Im(Z(β)·conj(Z(γ)))|` above the drift a coordinate step of `10h` could
/// cause, so the difference stencils cannot straddle a chamber boundary.
fn wall_margin_check(stab: &StabilityContext, truncation: u32, h: f64) -> Result<()> {
    let q = stab.quiver();
    let mut seen = BTreeSet::new();
    for alpha in q.classes_up_to(truncation) {
        for (beta, gamma) in StabilityContext::walls_for(q, &alpha)? {
            if !seen.insert((beta.clone(), gamma.clone())) {
                continue;
            }
            let (zb, zg) = (stab.z_complex(&beta), stab.z_complex(&gamma));
            let w = (zb * zg.conj()).im;
            let slope = gamma.total() as f64 * zb.norm() + beta.total() as f64 * zg.norm();
            if w.abs() <= 10.0 * h * slope {
                return Err(Error::domain(format!(
                    "stability values are within 10·h of the wall {{{beta:?}, {gamma:?}}}"
                )));
            }
        }
    }
    Ok(())
}

/// A point exactly on the named wall near `z`: shift by `τ·v` where `v`
/// kills `Z(γ)`, so the wall function is linear in `τ` and solvable in one
/// step. Non-proportionality of the wall pair guarantees such a `v`.
fn on_wall_point(
    q: &QuiverSpec,
    wall: &(DimVec, DimVec),
    z: &[Complex64],
) -> Result<StabilityContext> {
    let (beta, gamma) = wall;
    let n = q.rank();
    let ev = |v: &[Complex64], c: &DimVec| -> Complex64 {
        v.iter().zip(&c.0).map(|(x, &k)| x * k as f64).sum()
    };
    // v with Z_v(γ) = 0 and Z_v(β) ≠ 0
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    if let Some(m) = (0..n).find(|&m| gamma.0[m] == 0 && beta.0[m] != 0) {
        v[m] = Complex64::new(1.0, 0.0);
    } else {
        let supp: Vec<usize> = (0..n).filter(|&j| gamma.0[j] != 0).collect();
        let pair = supp
            .iter()
            .flat_map(|&j| supp.iter().map(move |&k| (j, k)))
            .find(|&(j, k)| {
                j != k
                    && beta.0[j] as i64 * gamma.0[k] as i64
                        != beta.0[k] as i64 * gamma.0[j] as i64
            })
            .ok_or_else(|| Error::domain("wall pair is proportional"))?;
        v[pair.0] = Complex64::new(gamma.0[pair.1] as f64, 0.0);
        v[pair.1] = Complex64::new(-(gamma.0[pair.0] as f64), 0.0);
    }
    let zg = ev(z, gamma);
    let w = (ev(z, beta) * zg.conj()).im;
    let dw = (ev(&v, beta) * zg.conj()).im;
    if dw == 0.0 {
        return Err(Error::numerical("degenerate wall normal"));
    }
    let tau = -w / dw;
    let z_wall: Vec<Complex64> = z.iter().zip(&v).map(|(a, b)| a + b * tau).collect();
    StabilityContext::new_float(q.clone(), z_wall)
}

/// The phase-descending product of the ray factors `SS_ℓ` over every ray
/// carrying a nonnegative combination of the wall pair. Exact rational
/// Hall arithmetic; only the ray grouping consults the stability values.
fn cone_product(
    stab: &StabilityContext,
    wall: &(DimVec, DimVec),
    truncation: u32,
) -> Result<HallElement<BigRational>> {
    let (beta, gamma) = wall;
    let mut cone: Vec<DimVec> = Vec::new();
    let mut a = 0u32;
    while a * beta.total() <= truncation {
        let mut b = 0u32;
        while a * beta.total() + b * gamma.total() <= truncation {
            if a + b > 0 {
                let mut c = DimVec::zeros(beta.0.len());
                for _ in 0..a {
                    c = c.add(beta);
                }
                for _ in 0..b {
                    c = c.add(gamma);
                }
                if !cone.contains(&c) {
                    cone.push(c);
                }
            }
            b += 1;
        }
        a += 1;
    }
    let mut rays: Vec<DimVec> = Vec::new();
    for c in &cone {
        if !rays.iter().any(|r| stab.same_ray(r, c)) {
            rays.push(c.clone());
        }
    }
    rays.sort_by(|a, b| match stab.cross_sign(a, b) {
        1 => std::cmp::Ordering::Less,
        -1 => std::cmp::Ordering::Greater,
        _ => std::cmp::Ordering::Equal,
    });
    let mut acc = HallElement::unit();
    for r in &rays {
        let ss = stab.ss_ell(&RayRep::Class(r.clone()), truncation);
        acc = acc.mul(&ss, stab.quiver()).truncate(truncation);
    }
    Ok(acc)
}

/// Least-squares slope of `log gap` against `log η`; `NaN` when all gaps
/// sit at the noise floor.
fn fit_order(records: &[ContinuityRecord]) -> f64 {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.gap_alpha > 1e-13)
        .map(|r| (r.eta.ln(), r.gap_alpha.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let (sx, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(p, q), (x, y)| {
        (p + (x - mx) * (y - my), q + (x - mx) * (x - mx))
    });
    num / den
}

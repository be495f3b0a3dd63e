//! Command-line driver: one subcommand per experiment, deterministic
//! serialization, and plot-data emission.
//!
//! Conventions shared by every subcommand:
//!
//! * structured results are JSON on stdout (or `--out FILE`); plot series
//!   are CSV with a leading `#` settings line;
//! * complex numbers appear as `[re, im]` pairs, exact rationals as
//!   `"p/q"` strings, so no consumer needs to know our binary layout;
//! * every numeric document carries a `meta` object echoing the settings
//!   (truncation, tolerances, seed) that produced it;
//! * re-running a subcommand with the same flags, config, and seed yields
//!   byte-identical output — all maps are ordered and all randomness is
//!   seeded;
//! * `--config FILE` loads a JSON object whose keys are the long flag
//!   names; values present in the file override values given on the
//!   command line;
//! * malformed input exits 2, a failed numerical safeguard exits 1, and
//!   both print a JSON diagnostic to stderr; an empty result (no
//!   semistables, zero element) is a successful run that prints its empty
//!   document and exits 0.
//!
//! The env var `HALLSTOKES_THREADS` caps subcommand-internal parallelism;
//! the driver itself is single-threaded orchestration.
//!
//! Stability inputs (`--Z`) accept either floating pairs
//! (`"[-1,1],[1,1]"`, or a JSON array of `[re, im]` pairs) or exact
//! Gaussian rationals (`"-1/2+3/4i, i"`, or a JSON array of
//! `["p/q", "p/q"]` pairs); a value naming an existing file is read from
//! that file first. Exact input keeps every ray and chamber decision in
//! rational arithmetic.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use num::{BigInt, BigRational};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::connection::{ConnectionOracle, OracleOpts};
use crate::error::{Error, Result};
use crate::exact::{format_rational, parse_rational, Coeff, GaussianRational};
use crate::graded::{EnvelopeElement, GradedLieElement, LieAlgebraSpec};
use crate::hall::HallElement;
use crate::isomonodromy::{self, IsomonodromyReport};
use crate::multilog::SpecialFns;
use crate::quiver::{DimVec, IsoClass, QuiverSpec};
use crate::stability::{StabilityContext, ZData, TOL_RAY};
use crate::stokes::{SeriesFn, SeriesTerm, StokesContext};

/// Wall-crossing data on A_n quivers and its differential-equation side:
/// Hall-algebra invariants, ray transforms, and deformation experiments.
#[derive(Parser)]
#[command(name = "hallstokes", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Multiply two Hall elements (iso-class labels or element JSON).
    HallProduct(HallProductArgs),
    /// List the semistable iso-classes of one dimension vector.
    Semistables(StabilityQueryArgs),
    /// Subquotient classes of the destabilizing filtration of one module.
    Hn(HnArgs),
    /// Semistable indicator of a class (exact Hall element).
    Delta(StabilityQueryArgs),
    /// Indecomposably supported ray logarithm of a class (exact).
    Epsilon(StabilityQueryArgs),
    /// Indicator of all modules of a class (exact, independent of Z).
    Kappa(KappaArgs),
    /// CSV chamber report: sampled Z, wall signature, per-class supports.
    Chambers(ChambersArgs),
    /// Ray-resummed series: residue coefficients to ray logarithms.
    StokesForward(TransformArgs),
    /// Inverse series: ray logarithms back to residue coefficients.
    StokesInverse(TransformArgs),
    /// One iterated-integral value with its error estimate.
    JnEval(JnEvalArgs),
    /// Integrate the connection of a residue datum and factor its
    /// monodromy into per-ray Stokes factors, with series cross-checks.
    OdeExtract(OdeExtractArgs),
    /// Residue table of a stability point plus the finite-difference
    /// residual of its deformation equation.
    IsomonodromyCheck(IsomonodromyArgs),
    /// Cross one wall along a straight path: jump bookkeeping, sector
    /// product constancy, two-sided continuity gaps, and a plot CSV.
    Wallcross(WallcrossArgs),
}

/// Copies every `Some` field of a config-file struct over the matching
/// command-line field, so file values win exactly where they are present.
macro_rules! overlay {
    ($dst:expr, $src:expr, [$($f:ident),* $(,)?]) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f; } )*
    };
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
struct HallProductArgs {
    /// Quiver, e.g. `A2` (or just the vertex count).
    #[arg(long)]
    quiver: Option<String>,
    /// Left factor: iso-class label like `[1,1]+[2,2]`, or element JSON.
    #[arg(long)]
    lhs: Option<String>,
    /// Right factor, same formats.
    #[arg(long)]
    rhs: Option<String>,
    /// Drop product terms above this total dimension.
    #[arg(long)]
    truncate: Option<u32>,
    /// Write the JSON document here instead of stdout.
    #[arg(long)]
    out: Option<String>,
    /// JSON object of flag values that override the command line.
    #[arg(long)]
    #[serde(skip)]
    config: Option<String>,
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
struct StabilityQueryArgs {
    /// Quiver, e.g. `A2`.
    #[arg(long)]
    quiver: Option<String>,
    /// Stability values, one per vertex (floating pairs or exact strings).
    #[arg(long = "Z")]
    #[serde(rename = "Z")]
    z: Option<String>,
    /// Dimension vector, e.g. `1,1`.
    #[arg(long)]
    gamma: Option<String>,
    /// Write the JSON document here instead of stdout.
    #[arg(long)]
    out: Option<String>,
    /// JSON object of flag values that override the command line.
    #[arg(long)]
    #[serde(skip)]
    config: Option<String>,
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
struct HnArgs {
    /// Quiver, e.g. `A2`.
    #[arg(long)]
    quiver: Option<String>,
    /// Stability values, one per vertex.
    #[arg(long = "Z")]
    #[serde(rename = "Z")]
    z: Option<String>,
    /// Module to filter, as an iso-class label like `[1,2]+[2,2]`.
    #[arg(long)]
    module: Option<String>,
    /// Write the JSON document here instead of stdout.
    #[arg(long)]
    out: Option<String>,
    /// JSON object of flag values that override the command line.
    #[arg(long)]
    #[serde(skip)]
    config: Option<String>,
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
struct KappaArgs {
    /// Quiver, e.g. `A2`.
    #[arg(long)]
    quiver: Option<String>,
    /// Dimension vector, e.g. `1,1`.
    #[arg(long)]
    gamma: Option<String>,
    /// Write the JSON document here instead of stdout.
    #[arg(long)]
    out: Option<String>,
    /// JSON object of flag values that override the command line.
    #[arg(long)]
    #[serde(skip)]
    config: Option<String>,
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
struct ChambersArgs {
    /// Quiver, e.g. `A2`.
    #[arg(long)]
    quiver: Option<String>,
    /// Class whose walls name the chambers, e.g. `1,1`.
    #[arg(long)]
    alpha: Option<String>,
    /// Report supports of all classes up to this total (default: |alpha|).
    #[arg(long)]
    d: Option<u32>,
    /// Number of random exact stability points (default 8).
    #[arg(long)]
    samples: Option<usize>,
    /// RNG seed for the sampled points (default 0, recorded in the CSV).
    #[arg(long)]
    seed: Option<u64>,
    /// Report this one stability point instead of sampling.
    #[arg(long = "Z")]
    #[serde(rename = "Z")]
    z: Option<String>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<String>,
    /// JSON object of flag values that override the command line.
    #[arg(long)]
    #[serde(skip)]
    config: Option<String>,
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
struct TransformArgs {
    /// Quiver, e.g. `A2`.
    #[arg(long)]
    quiver: Option<String>,
    /// Stability values, one per vertex.
    #[arg(long = "Z")]
    #[serde(rename = "Z")]
    z: Option<String>,
    /// Total-dimension truncation of the graded algebra.
    #[arg(long)]
    truncation: Option<u32>,
    /// Input coefficients: JSON object mapping letter labels like `[1,2]`
    /// to `[re, im]` pairs (inline or a file path).
    #[arg(long)]
    coeffs: Option<String>,
    /// Optional algebra presentation JSON to validate against the quiver.
    #[arg(long)]
    spec: Option<String>,
    /// Relative bound on non-Lie residue before a projection fails.
    #[arg(long)]
    lie_tol: Option<f64>,
    /// Write the JSON document here instead of stdout.
    #[arg(long)]
    out: Option<String>,
    /// JSON object of flag values that override the command line.
    #[arg(long)]
    #[serde(skip)]
    config: Option<String>,
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
struct JnEvalArgs {
    /// Number of arguments (checked against `--z` when given).
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated complex arguments, e.g. `1+2i,0.5-0.1i`.
    #[arg(long)]
    z: Option<String>,
    /// Relative radius of the detour arcs around interior singularities.
    #[arg(long)]
    arc_eps: Option<f64>,
    /// Write the JSON document here instead of stdout.
    #[arg(long)]
    out: Option<String>,
    /// JSON object of flag values that override the command line.
    #[arg(long)]
    #[serde(skip)]
    config: Option<String>,
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
struct OdeExtractArgs {
    /// Quiver, e.g. `A2`.
    #[arg(long)]
    quiver: Option<String>,
    /// Stability values, one per vertex (inline or a file path).
    #[arg(long = "Z")]
    #[serde(rename = "Z")]
    z: Option<String>,
    /// Residue coefficients: JSON object mapping letter labels to
    /// `[re, im]` pairs (inline or a file path).
    #[arg(long)]
    f: Option<String>,
    /// Total-dimension truncation of the representation.
    #[arg(long)]
    d: Option<u32>,
    /// Also report the single factor on the ray at this angle (radians).
    #[arg(long)]
    ray_phase: Option<f64>,
    /// Optional algebra presentation JSON to validate against the quiver.
    #[arg(long)]
    spec: Option<String>,
    /// Relative integration tolerance.
    #[arg(long)]
    rtol: Option<f64>,
    /// Absolute integration tolerance.
    #[arg(long)]
    atol: Option<f64>,
    /// Outer radius where arcs run and ratios are taken.
    #[arg(long)]
    radius: Option<f64>,
    /// Highest asymptotic-series order kept available for matching.
    #[arg(long)]
    series_order: Option<usize>,
    /// Target for the estimated matching error.
    #[arg(long)]
    match_target: Option<f64>,
    /// Unit-coefficient drift above this fails the extraction.
    #[arg(long)]
    leak_tol: Option<f64>,
    /// Hard cap on the representation dimension.
    #[arg(long)]
    dim_cap: Option<usize>,
    /// Write the JSON document here instead of stdout.
    #[arg(long)]
    out: Option<String>,
    /// JSON object of flag values that override the command line.
    #[arg(long)]
    #[serde(skip)]
    config: Option<String>,
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
struct IsomonodromyArgs {
    /// Quiver, e.g. `A2`.
    #[arg(long)]
    quiver: Option<String>,
    /// Stability values, one per vertex.
    #[arg(long = "Z")]
    #[serde(rename = "Z")]
    z: Option<String>,
    /// Total-dimension truncation.
    #[arg(long)]
    truncation: Option<u32>,
    /// Finite-difference step (default 1e-4).
    #[arg(long)]
    h: Option<f64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<String>,
    /// JSON object of flag values that override the command line.
    #[arg(long)]
    #[serde(skip)]
    config: Option<String>,
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
struct WallcrossArgs {
    /// Quiver, e.g. `A2`.
    #[arg(long)]
    quiver: Option<String>,
    /// Class whose wall the path crosses, e.g. `1,1`.
    #[arg(long)]
    alpha: Option<String>,
    /// Stability values at path parameter 0.
    #[arg(long)]
    start: Option<String>,
    /// Stability values at path parameter 1.
    #[arg(long)]
    end: Option<String>,
    /// Total-dimension truncation.
    #[arg(long)]
    truncation: Option<u32>,
    /// Comma-separated wall offsets (default `1e-2,1e-3,1e-4`).
    #[arg(long)]
    etas: Option<String>,
    /// Also write a plot CSV of (s, residue components) to this path.
    #[arg(long)]
    csv: Option<String>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<String>,
    /// JSON object of flag values that override the command line.
    #[arg(long)]
    #[serde(skip)]
    config: Option<String>,
}

/// Entry point of the `hallstokes` binary.
pub fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    if let Err(e) = init_threads() {
        return fail(&e);
    }
    let cli = Cli::parse(); // flag syntax errors exit 2 via clap
    match dispatch(cli.cmd) {
        Ok(()) => 0,
        Err(e) => fail(&e),
    }
}

/// Applies `HALLSTOKES_THREADS` before any parallel section runs.
fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("HALLSTOKES_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::parse(format!("HALLSTOKES_THREADS must be a thread count, got {v:?}")))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::domain(format!("thread pool: {e}")))?;
        }
    }
    Ok(())
}

/// Prints the JSON diagnostic and picks the exit code: bad input is a
/// usage error (2), a failed safeguard is a numerical error (1).
fn fail(e: &Error) -> i32 {
    let (kind, code) = match e {
        Error::Domain(_) => ("domain", 2),
        Error::Parse(_) => ("parse", 2),
        Error::Json(_) => ("json", 2),
        Error::Io(_) => ("io", 2),
        Error::Numerical(_) => ("numerical", 1),
        Error::Resource(_) => ("resource", 1),
    };
    let diag = json!({ "error": { "kind": kind, "message": e.to_string() } });
    eprintln!("{}", serde_json::to_string_pretty(&diag).expect("diagnostic serialization cannot fail"));
    code
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::HallProduct(a) => run_hall_product(a),
        Cmd::Semistables(a) => run_semistables(a),
        Cmd::Hn(a) => run_hn(a),
        Cmd::Delta(a) => run_delta(a),
        Cmd::Epsilon(a) => run_epsilon(a),
        Cmd::Kappa(a) => run_kappa(a),
        Cmd::Chambers(a) => run_chambers(a),
        Cmd::StokesForward(a) => run_transform(a, false),
        Cmd::StokesInverse(a) => run_transform(a, true),
        Cmd::JnEval(a) => run_jn_eval(a),
        Cmd::OdeExtract(a) => run_ode_extract(a),
        Cmd::IsomonodromyCheck(a) => run_isomonodromy(a),
        Cmd::Wallcross(a) => run_wallcross(a),
    }
}

// ---------------------------------------------------------------------
// input parsing

/// Reads the config file named by `path` into the same args struct and
/// returns it, so the caller can overlay it over the flags.
fn load_config<T: for<'de> Deserialize<'de>>(path: &str) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn req<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::parse(format!("missing required flag {flag}")))
}

/// Accepts `A2`, `a3`, or a bare vertex count.
fn parse_quiver(s: &str) -> Result<QuiverSpec> {
    let t = s.trim();
    let digits = t.strip_prefix(['A', 'a']).unwrap_or(t);
    let n: usize = digits
        .parse()
        .map_err(|_| Error::parse(format!("quiver must look like A2, got {s:?}")))?;
    QuiverSpec::new(n)
}

/// Parses `1,1` (optionally wrapped in brackets or parens) into a class.
fn parse_class(s: &str, rank: usize) -> Result<DimVec> {
    let t = s.trim().trim_matches(|c| c == '[' || c == ']' || c == '(' || c == ')');
    let parts: Vec<u32> = t
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(format!("class must be comma-separated counts, got {s:?}")))?;
    if parts.len() != rank {
        return Err(Error::parse(format!(
            "class {s:?} has {} entries but the quiver has {rank} vertices",
            parts.len()
        )));
    }
    Ok(DimVec(parts))
}

/// Splits `a+bi` at the sign of the imaginary term: the last `+`/`-`
/// beyond the first character that is not an exponent sign.
fn sign_split(t: &str) -> Option<usize> {
    let bytes = t.as_bytes();
    let mut split = None;
    for i in 1..bytes.len() {
        if (bytes[i] == b'+' || bytes[i] == b'-')
            && bytes[i - 1] != b'e'
            && bytes[i - 1] != b'E'
        {
            split = Some(i);
        }
    }
    split
}

/// Parses one exact entry: `-1/2+3/4i`, `2i`, `-i`, or a plain rational.
fn parse_gaussian(s: &str) -> Result<GaussianRational> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err(Error::parse("empty stability entry"));
    }
    let imag_part = |u: &str| -> Result<BigRational> {
        match u {
            "" | "+" => Ok(BigRational::from(BigInt::from(1))),
            "-" => Ok(BigRational::from(BigInt::from(-1))),
            _ => parse_rational(u),
        }
    };
    match (sign_split(&t), t.strip_suffix('i')) {
        (Some(k), Some(head)) => Ok(GaussianRational::new(
            parse_rational(&t[..k])?,
            imag_part(&head[k..])?,
        )),
        (None, Some(head)) => Ok(GaussianRational::new(
            BigRational::from(BigInt::from(0)),
            imag_part(head)?,
        )),
        (_, None) => Ok(GaussianRational::new(parse_rational(&t)?, BigRational::from(BigInt::from(0)))),
    }
}

/// Parses one floating entry: `1e-3+2i`, `-0.5i`, or a plain real.
fn parse_complex(s: &str) -> Result<Complex64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err(Error::parse("empty complex entry"));
    }
    let bad = || Error::parse(format!("bad complex entry {s:?}"));
    let imag_part = |u: &str| -> Result<f64> {
        match u {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => u.parse().map_err(|_| bad()),
        }
    };
    match (sign_split(&t), t.strip_suffix('i')) {
        (Some(k), Some(head)) => Ok(Complex64::new(
            t[..k].parse().map_err(|_| bad())?,
            imag_part(&head[k..])?,
        )),
        (None, Some(head)) => Ok(Complex64::new(0.0, imag_part(head)?)),
        (_, None) => Ok(Complex64::new(t.parse().map_err(|_| bad())?, 0.0)),
    }
}

/// Reads `raw` from disk when it names an existing file.
fn read_maybe_file(raw: &str) -> Result<String> {
    if Path::new(raw).is_file() {
        Ok(fs::read_to_string(raw)?)
    } else {
        Ok(raw.to_string())
    }
}

/// Stability input: floating `[re, im]` pairs or exact strings, inline or
/// from a file, never mixed.
fn parse_z(raw: &str, rank: usize) -> Result<ZData> {
    let text = read_maybe_file(raw)?;
    let t = text.trim();
    let parsed: Option<Value> = serde_json::from_str(t)
        .or_else(|_| serde_json::from_str(&format!("[{t}]")))
        .ok();
    let entries: Vec<Value> = match parsed {
        Some(Value::Array(items)) if !items.is_empty() => items,
        _ => t.split(',').map(|p| Value::String(p.to_string())).collect(),
    };
    if entries.len() != rank {
        return Err(Error::parse(format!(
            "stability input has {} entries but the quiver has {rank} vertices",
            entries.len()
        )));
    }
    let mut floats = Vec::new();
    let mut exacts = Vec::new();
    for e in &entries {
        match e {
            Value::Array(pair) if pair.len() == 2 => match (&pair[0], &pair[1]) {
                (Value::String(re), Value::String(im)) => {
                    exacts.push(GaussianRational::new(parse_rational(re)?, parse_rational(im)?));
                }
                _ => {
                    let re = pair[0].as_f64().ok_or_else(|| Error::parse("bad [re, im] pair"))?;
                    let im = pair[1].as_f64().ok_or_else(|| Error::parse("bad [re, im] pair"))?;
                    floats.push(Complex64::new(re, im));
                }
            },
            Value::String(s) => exacts.push(parse_gaussian(s)?),
            _ => return Err(Error::parse(format!("unrecognized stability entry {e}"))),
        }
    }
    match (floats.is_empty(), exacts.is_empty()) {
        (false, true) => Ok(ZData::Float(floats)),
        (true, false) => Ok(ZData::Exact(exacts)),
        _ => Err(Error::parse("stability entries mix exact and floating forms")),
    }
}

/// Complex argument list for the integral evaluator.
fn parse_complex_list(raw: &str) -> Result<Vec<Complex64>> {
    let text = read_maybe_file(raw)?;
    let t = text.trim();
    let parsed: Option<Value> = serde_json::from_str(t)
        .or_else(|_| serde_json::from_str(&format!("[{t}]")))
        .ok();
    if let Some(Value::Array(items)) = parsed {
        if items.iter().all(|e| matches!(e, Value::Array(p) if p.len() == 2)) && !items.is_empty()
        {
            return items
                .iter()
                .map(|e| {
                    let p = e.as_array().expect("checked above");
                    match (p[0].as_f64(), p[1].as_f64()) {
                        (Some(re), Some(im)) => Ok(Complex64::new(re, im)),
                        _ => Err(Error::parse("bad [re, im] pair")),
                    }
                })
                .collect();
        }
    }
    t.split(',').map(parse_complex).collect()
}

/// Parses `[1,2]+[2,2]` (or `0`) into an iso-class of the quiver.
fn parse_iso_class(s: &str, rank: usize) -> Result<IsoClass> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t == "0" {
        return Ok(IsoClass::zero());
    }
    let mut intervals = Vec::new();
    for part in t.split('+') {
        let inner = part
            .strip_prefix('[')
            .and_then(|p| p.strip_suffix(']'))
            .ok_or_else(|| Error::parse(format!("bad interval {part:?} in {s:?}")))?;
        let (a, b) = inner
            .split_once(',')
            .ok_or_else(|| Error::parse(format!("bad interval {part:?} in {s:?}")))?;
        let a: u8 = a.parse().map_err(|_| Error::parse(format!("bad interval {part:?}")))?;
        let b: u8 = b.parse().map_err(|_| Error::parse(format!("bad interval {part:?}")))?;
        if a < 1 || b < a || (b as usize) > rank {
            return Err(Error::parse(format!(
                "interval [{a},{b}] does not fit a quiver with {rank} vertices"
            )));
        }
        intervals.push((a, b));
    }
    Ok(IsoClass::new(intervals))
}

/// Hall-element input: an iso-class label, or element JSON in the
/// `class-graded` format (inline or a file path).
fn parse_hall(raw: &str, q: &QuiverSpec) -> Result<HallElement<BigRational>> {
    let text = read_maybe_file(raw)?;
    let t = text.trim();
    if !t.starts_with('{') {
        return Ok(HallElement::char_fn(parse_iso_class(t, q.rank())?));
    }
    let v: Value = serde_json::from_str(t)?;
    let graded = v
        .get("class-graded")
        .and_then(Value::as_object)
        .ok_or_else(|| Error::parse("element JSON must carry a class-graded object"))?;
    let mut terms = Vec::new();
    for (key, list) in graded {
        let class = parse_class(key, q.rank())?;
        let rows = list
            .as_array()
            .ok_or_else(|| Error::parse(format!("class {key} must map to a term list")))?;
        for row in rows {
            let pair = row.as_array().filter(|p| p.len() == 2).ok_or_else(|| {
                Error::parse(format!("terms of class {key} must be [label, coeff] pairs"))
            })?;
            let label = pair[0].as_str().ok_or_else(|| Error::parse("term label must be a string"))?;
            let coeff = pair[1].as_str().ok_or_else(|| Error::parse("coefficient must be a rational string"))?;
            let m = parse_iso_class(label, q.rank())?;
            if m.class(q.rank()) != class {
                return Err(Error::parse(format!(
                    "term {label} listed under class {key} has a different class"
                )));
            }
            terms.push((m, parse_rational(coeff)?));
        }
    }
    Ok(HallElement::from_terms(terms))
}

fn parse_etas(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::parse(format!("bad offset {p:?} in {raw:?}")))
        })
        .collect()
}

/// Letter coefficients from a JSON object `{label: [re, im] | number}`.
fn lie_from_json(spec: &Arc<LieAlgebraSpec>, v: &Value) -> Result<GradedLieElement> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::parse("coefficient table must be a JSON object keyed by letter label"))?;
    let mut coeffs = Vec::new();
    for (label, val) in obj {
        let id = spec
            .letters()
            .iter()
            .position(|l| l.label == *label)
            .ok_or_else(|| Error::parse(format!("unknown letter {label:?} at this truncation")))?;
        coeffs.push((id as u16, complex_from_json(val)?));
    }
    Ok(GradedLieElement::from_coeffs(spec.clone(), coeffs))
}

fn complex_from_json(v: &Value) -> Result<Complex64> {
    match v {
        Value::Number(x) => Ok(Complex64::new(
            x.as_f64().ok_or_else(|| Error::parse("bad number"))?,
            0.0,
        )),
        Value::Array(p) if p.len() == 2 => match (p[0].as_f64(), p[1].as_f64()) {
            (Some(re), Some(im)) => Ok(Complex64::new(re, im)),
            _ => Err(Error::parse("coefficients must be [re, im] pairs")),
        },
        _ => Err(Error::parse("coefficients must be [re, im] pairs")),
    }
}

// ---------------------------------------------------------------------
// output emission

fn emit_json(v: &Value, out: Option<&str>) -> Result<()> {
    let text = format!("{}\n", serde_json::to_string_pretty(v)?);
    emit_text(&text, out)
}

fn emit_text(text: &str, out: Option<&str>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn dim_key(c: &DimVec) -> String {
    c.0.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// `{"class-graded": {class: [[label, coeff], ...]}}` with exact
/// rationals as strings and complex coefficients as `[re, im]`.
fn hall_json<K: Coeff>(h: &HallElement<K>, rank: usize) -> Value {
    let mut graded: BTreeMap<String, Vec<Value>> = BTreeMap::new();
    for (m, c) in h.terms() {
        graded
            .entry(dim_key(&m.class(rank)))
            .or_default()
            .push(json!([m.to_string(), c.render()]));
    }
    json!({ "class-graded": graded })
}

fn complex_pair(c: Complex64) -> Value {
    json!([c.re, c.im])
}

/// Letter coefficients as a label-keyed object of `[re, im]` pairs.
fn lie_to_json(f: &GradedLieElement) -> Value {
    let spec = f.spec();
    let map: BTreeMap<String, Value> = f
        .coeffs()
        .iter()
        .map(|(&id, &c)| (spec.letter(id).label.clone(), complex_pair(c)))
        .collect();
    json!(map)
}

/// Envelope element as scalar part plus label-word terms.
fn envelope_json(e: &EnvelopeElement) -> Value {
    let spec = e.spec();
    let words: Vec<Value> = e
        .coeffs()
        .iter()
        .filter(|(w, _)| !w.is_empty())
        .map(|(w, &c)| {
            let labels: Vec<String> = w.iter().map(|&id| spec.letter(id).label.clone()).collect();
            json!({ "word": labels, "value": complex_pair(c) })
        })
        .collect();
    json!({ "scalar": complex_pair(e.scalar_part()), "words": words })
}

/// Max coefficient distance between two envelope elements.
fn envelope_gap(a: &EnvelopeElement, b: &EnvelopeElement) -> Result<f64> {
    Ok(a.sub(b)?.coeffs().values().map(|c| c.norm()).fold(0.0, f64::max))
}

/// Echo of the stability input for a `meta` object.
fn z_json(z: &ZData) -> Value {
    match z {
        ZData::Exact(v) => json!({
            "arithmetic": "exact-rational",
            "values": v.iter().map(format_gaussian).collect::<Vec<_>>(),
        }),
        ZData::Float(v) => json!({
            "arithmetic": "floating",
            "ray_tol": TOL_RAY,
            "values": v.iter().map(|c| complex_pair(*c)).collect::<Vec<_>>(),
        }),
    }
}

fn format_gaussian(g: &GaussianRational) -> String {
    let re = format_rational(&g.re);
    let im = format_rational(&g.im);
    if let Some(neg) = im.strip_prefix('-') {
        format!("{re}-{neg}i")
    } else {
        format!("{re}+{im}i")
    }
}

/// Per-degree record of which series evaluations backed a transform.
fn provenance_json(terms: &[SeriesTerm]) -> Value {
    let mut per_degree: BTreeMap<String, Vec<Value>> = BTreeMap::new();
    let mut counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    for t in terms {
        let name = match t.kind {
            SeriesFn::L => "L",
            SeriesFn::M => "M",
            SeriesFn::J => "J",
        };
        *counts.entry(name).or_insert(0) += 1;
        per_degree.entry(format!("{}", t.target.total())).or_default().push(json!({
            "target": dim_key(&t.target),
            "parts": t.parts.iter().map(dim_key).collect::<Vec<_>>(),
            "fn": name,
            "value": complex_pair(t.value),
            "estimated_error": t.estimated_error,
        }));
    }
    json!({ "evaluations": counts, "per_degree": per_degree })
}

/// Quotes a CSV field when it contains a delimiter or quote.
fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

// ---------------------------------------------------------------------
// subcommands

fn run_hall_product(mut a: HallProductArgs) -> Result<()> {
    if let Some(path) = a.config.clone() {
        let c: HallProductArgs = load_config(&path)?;
        overlay!(a, c, [quiver, lhs, rhs, truncate, out]);
    }
    let q = parse_quiver(&req(a.quiver, "--quiver")?)?;
    let lhs = parse_hall(&req(a.lhs, "--lhs")?, &q)?;
    let rhs = parse_hall(&req(a.rhs, "--rhs")?, &q)?;
    let mut product = lhs.mul(&rhs, &q);
    if let Some(d) = a.truncate {
        product = product.truncate(d);
    }
    let doc = json!({
        "product": hall_json(&product, q.rank()),
        "meta": {
            "quiver": format!("A{}", q.rank()),
            "arithmetic": "exact-rational",
            "truncate": a.truncate,
        },
    });
    emit_json(&doc, a.out.as_deref())
}

fn run_semistables(mut a: StabilityQueryArgs) -> Result<()> {
    if let Some(path) = a.config.clone() {
        let c: StabilityQueryArgs = load_config(&path)?;
        overlay!(a, c, [quiver, z, gamma, out]);
    }
    let q = parse_quiver(&req(a.quiver, "--quiver")?)?;
    let zdata = parse_z(&req(a.z, "--Z")?, q.rank())?;
    let gamma = parse_class(&req(a.gamma, "--gamma")?, q.rank())?;
    let stab = StabilityContext::new(q.clone(), zdata.clone())?;
    let mut names = Vec::new();
    for m in q.iso_classes(&gamma).iter() {
        if stab.is_semistable(m)? {
            names.push(m.to_string());
        }
    }
    names.sort();
    let doc = json!({
        "gamma": dim_key(&gamma),
        "semistables": names,
        "meta": { "quiver": format!("A{}", q.rank()), "z": z_json(&zdata) },
    });
    emit_json(&doc, a.out.as_deref())
}

fn run_hn(mut a: HnArgs) -> Result<()> {
    if let Some(path) = a.config.clone() {
        let c: HnArgs = load_config(&path)?;
        overlay!(a, c, [quiver, z, module, out]);
    }
    let q = parse_quiver(&req(a.quiver, "--quiver")?)?;
    let zdata = parse_z(&req(a.z, "--Z")?, q.rank())?;
    let module = parse_iso_class(&req(a.module, "--module")?, q.rank())?;
    let stab = StabilityContext::new(q.clone(), zdata.clone())?;
    let classes = stab.hn_classes(&module)?;
    let phases: Vec<f64> = classes.iter().map(|c| stab.phase(c)).collect::<Result<_>>()?;
    let doc = json!({
        "module": module.to_string(),
        "classes": classes.iter().map(dim_key).collect::<Vec<_>>(),
        "phases": phases,
        "meta": { "quiver": format!("A{}", q.rank()), "z": z_json(&zdata) },
    });
    emit_json(&doc, a.out.as_deref())
}

fn run_delta(mut a: StabilityQueryArgs) -> Result<()> {
    if let Some(path) = a.config.clone() {
        let c: StabilityQueryArgs = load_config(&path)?;
        overlay!(a, c, [quiver, z, gamma, out]);
    }
    let (q, zdata, gamma) = stability_query(&a)?;
    let stab = StabilityContext::new(q.clone(), zdata.clone())?;
    let doc = json!({
        "delta": hall_json(&stab.delta(&gamma), q.rank()),
        "gamma": dim_key(&gamma),
        "meta": {
            "quiver": format!("A{}", q.rank()),
            "arithmetic": "exact-rational",
            "z": z_json(&zdata),
        },
    });
    emit_json(&doc, a.out.as_deref())
}

fn run_epsilon(mut a: StabilityQueryArgs) -> Result<()> {
    if let Some(path) = a.config.clone() {
        let c: StabilityQueryArgs = load_config(&path)?;
        overlay!(a, c, [quiver, z, gamma, out]);
    }
    let (q, zdata, gamma) = stability_query(&a)?;
    let stab = StabilityContext::new(q.clone(), zdata.clone())?;
    let doc = json!({
        "epsilon": hall_json(&stab.epsilon(&gamma)?, q.rank()),
        "gamma": dim_key(&gamma),
        "meta": {
            "quiver": format!("A{}", q.rank()),
            "arithmetic": "exact-rational",
            "z": z_json(&zdata),
        },
    });
    emit_json(&doc, a.out.as_deref())
}

fn stability_query(a: &StabilityQueryArgs) -> Result<(QuiverSpec, ZData, DimVec)> {
    let q = parse_quiver(&req(a.quiver.clone(), "--quiver")?)?;
    let zdata = parse_z(&req(a.z.clone(), "--Z")?, q.rank())?;
    let gamma = parse_class(&req(a.gamma.clone(), "--gamma")?, q.rank())?;
    if gamma.is_zero() {
        return Err(Error::parse("class must be nonzero"));
    }
    Ok((q, zdata, gamma))
}

fn run_kappa(mut a: KappaArgs) -> Result<()> {
    if let Some(path) = a.config.clone() {
        let c: KappaArgs = load_config(&path)?;
        overlay!(a, c, [quiver, gamma, out]);
    }
    let q = parse_quiver(&req(a.quiver, "--quiver")?)?;
    let gamma = parse_class(&req(a.gamma, "--gamma")?, q.rank())?;
    if gamma.is_zero() {
        return Err(Error::parse("class must be nonzero"));
    }
    let kappa: HallElement<BigRational> = HallElement::char_class(&q, &gamma);
    let doc = json!({
        "kappa": hall_json(&kappa, q.rank()),
        "gamma": dim_key(&gamma),
        "meta": { "quiver": format!("A{}", q.rank()), "arithmetic": "exact-rational" },
    });
    emit_json(&doc, a.out.as_deref())
}

fn run_chambers(mut a: ChambersArgs) -> Result<()> {
    if let Some(path) = a.config.clone() {
        let c: ChambersArgs = load_config(&path)?;
        overlay!(a, c, [quiver, alpha, d, samples, seed, z, out]);
    }
    let q = parse_quiver(&req(a.quiver, "--quiver")?)?;
    let alpha = parse_class(&req(a.alpha, "--alpha")?, q.rank())?;
    if alpha.is_zero() {
        return Err(Error::parse("class must be nonzero"));
    }
    let d = a.d.unwrap_or_else(|| alpha.total());
    let seed = a.seed.unwrap_or(0);
    let points: Vec<ZData> = match &a.z {
        Some(raw) => vec![parse_z(raw, q.rank())?],
        None => {
            let samples = a.samples.unwrap_or(8);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..samples).map(|_| random_exact_z(&mut rng, q.rank())).collect()
        }
    };
    let gammas = q.classes_up_to(d);
    let mut csv = format!(
        "# quiver=A{} alpha={} d={} seed={} samples={} arithmetic=exact-rational\n",
        q.rank(),
        dim_key(&alpha),
        d,
        if a.z.is_some() { "-".to_string() } else { seed.to_string() },
        points.len(),
    );
    let mut header: Vec<String> = (1..=q.rank()).map(|i| format!("z_{i}")).collect();
    header.push("signature".to_string());
    header.extend(gammas.iter().map(|g| csv_field(&format!("delta({})", dim_key(g)))));
    csv.push_str(&header.join(","));
    csv.push('\n');
    for zdata in &points {
        let stab = StabilityContext::new(q.clone(), zdata.clone())?;
        let mut row: Vec<String> = match zdata {
            ZData::Exact(v) => v.iter().map(|g| csv_field(&format_gaussian(g))).collect(),
            ZData::Float(v) => v.iter().map(|c| csv_field(&format!("{}+{}i", c.re, c.im))).collect(),
        };
        row.push(stab.chamber_signature(&alpha)?);
        for g in &gammas {
            let support: Vec<String> =
                stab.delta(g).terms().keys().map(|m| m.to_string()).collect();
            row.push(csv_field(&support.join(";")));
        }
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    emit_text(&csv, a.out.as_deref())
}

/// A random stability point with small rational parts, strictly inside
/// the upper half-plane so every construction is defined.
fn random_exact_z(rng: &mut ChaCha8Rng, rank: usize) -> ZData {
    let mut v = Vec::with_capacity(rank);
    for _ in 0..rank {
        let re = BigRational::new(BigInt::from(rng.gen_range(-12i64..=12)), BigInt::from(rng.gen_range(1i64..=6)));
        let im = BigRational::new(BigInt::from(rng.gen_range(1i64..=12)), BigInt::from(rng.gen_range(1i64..=6)));
        v.push(GaussianRational::new(re, im));
    }
    ZData::Exact(v)
}

fn run_transform(mut a: TransformArgs, inverse: bool) -> Result<()> {
    if let Some(path) = a.config.clone() {
        let c: TransformArgs = load_config(&path)?;
        overlay!(a, c, [quiver, z, truncation, coeffs, spec, lie_tol, out]);
    }
    let q = parse_quiver(&req(a.quiver, "--quiver")?)?;
    let zdata = parse_z(&req(a.z, "--Z")?, q.rank())?;
    let truncation = req(a.truncation, "--truncation")?;
    let coeffs: Value = serde_json::from_str(&read_maybe_file(&req(a.coeffs, "--coeffs")?)?)?;
    let stab = StabilityContext::new(q.clone(), zdata.clone())?;
    let mut ctx = StokesContext::new(stab, truncation);
    if let Some(tol) = a.lie_tol {
        ctx = ctx.with_lie_tol(tol);
    }
    validate_spec(a.spec.as_deref(), ctx.spec())?;
    let input = lie_from_json(ctx.spec(), &coeffs)?;
    let (result, terms) = if inverse {
        ctx.stokes_inverse_jseries_recorded(&input)?
    } else {
        ctx.stokes_forward_recorded(&input)?
    };
    let doc = json!({
        "coefficients": lie_to_json(&result),
        "provenance": provenance_json(&terms),
        "meta": {
            "quiver": format!("A{}", q.rank()),
            "direction": if inverse { "inverse" } else { "forward" },
            "truncation": truncation,
            "lie_tol": a.lie_tol.unwrap_or(1e-8),
            "z": z_json(&zdata),
        },
    });
    emit_json(&doc, a.out.as_deref())
}

/// When `--spec` is given, the presentation it names must agree with the
/// one derived from the quiver at this truncation.
fn validate_spec(path: Option<&str>, derived: &Arc<LieAlgebraSpec>) -> Result<()> {
    if let Some(p) = path {
        let v: Value = serde_json::from_str(&fs::read_to_string(p)?)?;
        let loaded = LieAlgebraSpec::from_json(&v)?;
        if *loaded != **derived {
            return Err(Error::domain(
                "algebra presentation in --spec disagrees with the quiver at this truncation",
            ));
        }
    }
    Ok(())
}

fn run_jn_eval(mut a: JnEvalArgs) -> Result<()> {
    if let Some(path) = a.config.clone() {
        let c: JnEvalArgs = load_config(&path)?;
        overlay!(a, c, [n, z, arc_eps, out]);
    }
    let z = parse_complex_list(&req(a.z, "--z")?)?;
    if let Some(n) = a.n {
        if n != z.len() {
            return Err(Error::parse(format!(
                "--n {n} disagrees with the {} arguments in --z",
                z.len()
            )));
        }
    }
    let arc = a.arc_eps.unwrap_or(1e-3);
    if !(arc > 0.0) {
        return Err(Error::parse("--arc-eps must be positive"));
    }
    let fns = SpecialFns::with_arc_radius(arc);
    let v = fns.j(&z)?;
    let doc = json!({
        "value": complex_pair(v.value),
        "error": v.estimated_error,
        "on_cut": v.on_cut,
        "meta": {
            "n": z.len(),
            "z": z.iter().map(|c| complex_pair(*c)).collect::<Vec<_>>(),
            "arc_eps": arc,
        },
    });
    emit_json(&doc, a.out.as_deref())
}

fn run_ode_extract(mut a: OdeExtractArgs) -> Result<()> {
    if let Some(path) = a.config.clone() {
        let c: OdeExtractArgs = load_config(&path)?;
        overlay!(
            a,
            c,
            [quiver, z, f, d, ray_phase, spec, rtol, atol, radius, series_order, match_target,
             leak_tol, dim_cap, out]
        );
    }
    let q = parse_quiver(&req(a.quiver, "--quiver")?)?;
    let zdata = parse_z(&req(a.z, "--Z")?, q.rank())?;
    let d = req(a.d, "--d")?;
    let coeffs: Value = serde_json::from_str(&read_maybe_file(&req(a.f, "--f")?)?)?;

    let mut opts = OracleOpts::default();
    if let Some(x) = a.rtol {
        opts.rtol = x;
    }
    if let Some(x) = a.atol {
        opts.atol = x;
    }
    if let Some(x) = a.radius {
        opts.radius = x;
    }
    if let Some(x) = a.series_order {
        opts.series_order = x;
    }
    if let Some(x) = a.match_target {
        opts.match_target = x;
    }
    if let Some(x) = a.leak_tol {
        opts.leak_tol = x;
    }
    if let Some(x) = a.dim_cap {
        opts.dim_cap = x;
    }

    // independent series side first: it owns the spec the input is read in
    let ctx = StokesContext::new(StabilityContext::new(q.clone(), zdata.clone())?, d);
    validate_spec(a.spec.as_deref(), ctx.spec())?;
    let f = lie_from_json(ctx.spec(), &coeffs)?;
    let deltas = ctx.delta_components(&f)?;
    let series = ctx.group_factors(&deltas)?;

    let oracle =
        ConnectionOracle::new(StabilityContext::new(q.clone(), zdata.clone())?, &f, opts.clone())?;
    let table = oracle.factor_table()?;

    let unit = EnvelopeElement::one(ctx.spec().clone());
    let stab = ctx.stability();
    let mut rays = Vec::new();
    let mut used = vec![false; series.len()];
    for (class, theta, factor) in &table.factors {
        let hit = series.iter().position(|rf| stab.same_ray(&rf.ray.rep, class));
        let gap = match hit {
            Some(i) => {
                used[i] = true;
                envelope_gap(factor, &series[i].factor)?
            }
            None => envelope_gap(factor, &unit)?,
        };
        rays.push(json!({
            "class": dim_key(class),
            "theta": theta,
            "factor": envelope_json(factor),
            "series_gap": gap,
        }));
    }
    for (i, rf) in series.iter().enumerate() {
        if !used[i] {
            rays.push(json!({
                "class": dim_key(&rf.ray.rep),
                "theta": stab.z_complex(&rf.ray.rep).arg(),
                "factor": envelope_json(&unit),
                "series_gap": envelope_gap(&unit, &rf.factor)?,
            }));
        }
    }

    // the full anticlockwise ratio against the series multiplier
    let mut product = unit.clone();
    for (_, _, factor) in &table.factors {
        product = product.product(factor)?;
    }
    let kappa = ctx.kappa_from_delta(&deltas)?;
    let s_plus_check = envelope_gap(&product, &unit.add(&kappa)?)?;

    let requested = match a.ray_phase {
        Some(theta) => {
            let fx = oracle.extract_factor_at(theta)?;
            Some(json!({
                "theta": fx.theta,
                "factor": envelope_json(&fx.factor),
                "leakage": fx.leakage,
            }))
        }
        None => None,
    };

    let doc = json!({
        "representation": { "dimension": oracle.rep().dim(), "truncation": d },
        "matching": {
            "series_order": table.matching.0,
            "t0": table.matching.1,
            "residual": table.matching.2,
        },
        "rays": rays,
        "off_ray_leakage": table.unit_drift,
        "s_plus_check": s_plus_check,
        "requested_ray": requested,
        "tolerances": {
            "rtol": opts.rtol,
            "atol": opts.atol,
            "series_order": opts.series_order,
            "radius": opts.radius,
            "match_target": opts.match_target,
            "leak_tol": opts.leak_tol,
            "dim_cap": opts.dim_cap,
        },
        "meta": { "quiver": format!("A{}", q.rank()), "z": z_json(&zdata) },
    });
    emit_json(&doc, a.out.as_deref())
}

fn run_isomonodromy(mut a: IsomonodromyArgs) -> Result<()> {
    if let Some(path) = a.config.clone() {
        let c: IsomonodromyArgs = load_config(&path)?;
        overlay!(a, c, [quiver, z, truncation, h, out]);
    }
    let q = parse_quiver(&req(a.quiver, "--quiver")?)?;
    let zdata = parse_z(&req(a.z, "--Z")?, q.rank())?;
    let truncation = req(a.truncation, "--truncation")?;
    let h = a.h.unwrap_or(1e-4);
    if !(h > 0.0) {
        return Err(Error::parse("--h must be positive"));
    }
    let stab = StabilityContext::new(q.clone(), zdata)?;
    let report = isomonodromy::isomonodromy_check(&stab, truncation, h)?;
    emit_json(&serde_json::to_value(&report)?, a.out.as_deref())
}

fn run_wallcross(mut a: WallcrossArgs) -> Result<()> {
    if let Some(path) = a.config.clone() {
        let c: WallcrossArgs = load_config(&path)?;
        overlay!(a, c, [quiver, alpha, start, end, truncation, etas, csv, out]);
    }
    let q = parse_quiver(&req(a.quiver, "--quiver")?)?;
    let alpha = parse_class(&req(a.alpha, "--alpha")?, q.rank())?;
    let start = to_complex_vec(parse_z(&req(a.start, "--start")?, q.rank())?);
    let end = to_complex_vec(parse_z(&req(a.end, "--end")?, q.rank())?);
    let truncation = req(a.truncation, "--truncation")?;
    let etas = parse_etas(a.etas.as_deref().unwrap_or("1e-2,1e-3,1e-4"))?;
    let report = isomonodromy::wallcross_experiment(&q, &alpha, &start, &end, truncation, &etas)?;
    if let Some(path) = &a.csv {
        fs::write(path, wallcross_csv(&report))?;
    }
    emit_json(&serde_json::to_value(&report)?, a.out.as_deref())
}

fn to_complex_vec(z: ZData) -> Vec<Complex64> {
    match z {
        ZData::Float(v) => v,
        ZData::Exact(v) => v.iter().map(|g| g.to_complex()).collect(),
    }
}

/// Plot series: one row per path sample, one Re/Im column pair per
/// residue letter that appears anywhere along the path.
fn wallcross_csv(report: &IsomonodromyReport) -> String {
    let mut letters: Vec<(DimVec, String)> = Vec::new();
    for table in &report.f_tables {
        for entry in table {
            let key = (entry.root.clone(), entry.letter.clone());
            if !letters.contains(&key) {
                letters.push(key);
            }
        }
    }
    letters.sort();
    let mut rows: Vec<(f64, &Vec<isomonodromy::FEntry>)> =
        report.sample_s.iter().copied().zip(report.f_tables.iter()).collect();
    rows.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("path parameters are finite"));

    let mut csv = format!(
        "# truncation={} etas={} bisection_tol={}\n",
        report.settings.truncation,
        report
            .settings
            .etas
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join(";"),
        report.settings.bisection_tol,
    );
    let mut header = vec!["s".to_string()];
    for (_, label) in &letters {
        header.push(csv_field(&format!("Re f{label}")));
        header.push(csv_field(&format!("Im f{label}")));
    }
    csv.push_str(&header.join(","));
    csv.push('\n');
    for (s, table) in rows {
        let mut row = vec![s.to_string()];
        for (root, label) in &letters {
            let value = table
                .iter()
                .find(|e| e.root == *root && e.letter == *label)
                .map_or([0.0, 0.0], |e| e.value);
            row.push(value[0].to_string());
            row.push(value[1].to_string());
        }
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    csv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_entries_parse_and_round_trip() {
        for s in ["-1/2+3/4i", "2i", "-i", "5", "0+1i", "-3+1/6i"] {
            let g = parse_gaussian(s).unwrap();
            let again = parse_gaussian(&format_gaussian(&g)).unwrap();
            assert_eq!(g.re, again.re, "{s}");
            assert_eq!(g.im, again.im, "{s}");
        }
        assert!(parse_gaussian("1/0+2i").is_err());
        assert!(parse_gaussian("").is_err());
        let g = parse_gaussian("i").unwrap();
        assert!(g.re == BigRational::from(BigInt::from(0)));
        assert!(g.im == BigRational::from(BigInt::from(1)));
    }

    #[test]
    fn floating_entries_handle_exponents() {
        let c = parse_complex("1e-3+2e-4i").unwrap();
        assert_eq!(c, Complex64::new(1e-3, 2e-4));
        let c = parse_complex("-0.5i").unwrap();
        assert_eq!(c, Complex64::new(0.0, -0.5));
        let c = parse_complex("2").unwrap();
        assert_eq!(c, Complex64::new(2.0, 0.0));
        assert!(parse_complex("nope").is_err());
    }

    #[test]
    fn stability_input_accepts_both_encodings() {
        match parse_z("[-1,1],[1,1]", 2).unwrap() {
            ZData::Float(v) => {
                assert_eq!(v, vec![Complex64::new(-1.0, 1.0), Complex64::new(1.0, 1.0)]);
            }
            ZData::Exact(_) => panic!("bracket pairs are floating input"),
        }
        match parse_z("i, -1/2+2i", 2).unwrap() {
            ZData::Exact(v) => assert_eq!(format_gaussian(&v[1]), "-1/2+2i"),
            ZData::Float(_) => panic!("rational strings are exact input"),
        }
        match parse_z(r#"[["0","1"],["1","2"]]"#, 2).unwrap() {
            ZData::Exact(v) => assert_eq!(format_gaussian(&v[0]), "0+1i"),
            ZData::Float(_) => panic!("string pairs are exact input"),
        }
        assert!(parse_z("[-1,1],[1,1]", 3).is_err(), "wrong rank must be rejected");
        assert!(parse_z(r#"[[-1,1],"1+1i"]"#, 2).is_err(), "mixed modes must be rejected");
    }

    #[test]
    fn iso_class_labels_parse() {
        let m = parse_iso_class("[1,2]+[2,2]", 2).unwrap();
        assert_eq!(m.to_string(), "[1,2]+[2,2]");
        assert!(parse_iso_class("0", 2).unwrap().is_zero());
        assert!(parse_iso_class("[2,1]", 2).is_err());
        assert!(parse_iso_class("[1,3]", 2).is_err());
        assert!(parse_iso_class("[1;2]", 2).is_err());
    }

    #[test]
    fn hall_documents_place_terms_under_their_class() {
        let q = QuiverSpec::new(2).unwrap();
        let h: HallElement<BigRational> = HallElement::char_class(&q, &DimVec(vec![1, 1]));
        let doc = hall_json(&h, 2);
        let graded = doc["class-graded"].as_object().unwrap();
        assert_eq!(graded.len(), 1);
        let terms = graded["1,1"].as_array().unwrap();
        assert_eq!(terms.len(), 2);
        assert_eq!(terms[0][0], "[1,1]+[2,2]");
        assert_eq!(terms[0][1], "1");
        assert_eq!(terms[1][0], "[1,2]");
    }

    #[test]
    fn hall_input_reads_labels_and_element_json() {
        let q = QuiverSpec::new(2).unwrap();
        let from_label = parse_hall("[1,2]", &q).unwrap();
        let json_text = r#"{"class-graded": {"1,1": [["[1,2]", "1"]]}}"#;
        let from_json = parse_hall(json_text, &q).unwrap();
        assert!(from_label.sub(&from_json).is_zero());
        let misfiled = r#"{"class-graded": {"1,0": [["[1,2]", "1"]]}}"#;
        assert!(parse_hall(misfiled, &q).is_err());
    }

    #[test]
    fn letter_tables_round_trip() {
        let q = QuiverSpec::new(2).unwrap();
        let (spec, _) = LieAlgebraSpec::from_quiver(&q, 3);
        let f = GradedLieElement::from_coeffs(
            spec.clone(),
            [(0, Complex64::new(0.25, -1.0)), (2, Complex64::new(0.0, 2.0))],
        );
        let back = lie_from_json(&spec, &lie_to_json(&f)).unwrap();
        assert_eq!(f.coeffs(), back.coeffs());
        assert!(lie_from_json(&spec, &json!({"[9,9]": [1.0, 0.0]})).is_err());
    }

    #[test]
    fn config_values_override_flags() {
        let mut flags = StabilityQueryArgs {
            quiver: Some("A2".into()),
            z: Some("[-1,1],[1,1]".into()),
            gamma: Some("1,0".into()),
            out: None,
            config: None,
        };
        let file: StabilityQueryArgs =
            serde_json::from_str(r#"{"gamma": "1,1"}"#).unwrap();
        overlay!(flags, file, [quiver, z, gamma, out]);
        assert_eq!(flags.gamma.as_deref(), Some("1,1"));
        assert_eq!(flags.quiver.as_deref(), Some("A2"));
        let junk: std::result::Result<StabilityQueryArgs, _> =
            serde_json::from_str(r#"{"gama": "1,1"}"#);
        assert!(junk.is_err(), "unknown config keys must be schema violations");
    }

    #[test]
    fn csv_fields_quote_delimiters() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn offsets_parse_as_floats() {
        assert_eq!(parse_etas("1e-2, 1e-3").unwrap(), vec![1e-2, 1e-3]);
        assert!(parse_etas("1e-2,x").is_err());
    }
}

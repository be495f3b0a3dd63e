//! Truncated graded Lie algebras, their word envelopes, and the exp/log
//! correspondence.
//!
//! A [`LieAlgebraSpec`] lists the roots (nonzero degrees), an ordered basis
//! per root, and exact-rational structure constants; everything of total
//! degree above the truncation is discarded, and the grading makes that an
//! exact quotient rather than an approximation. [`GradedLieElement`] holds
//! one complex coefficient per basis letter; [`EnvelopeElement`] is the free
//! word algebra on those letters, which is where series like `exp`, `log`
//! and the Stokes factors are bookkept (words, not PBW normal forms — the
//! quotient to actual universal-envelope identities happens in the Hall
//! realization, see [`crate::hall`]).
//!
//! [`LieAlgebraSpec::from_quiver`] realizes the algebra on a quiver: letters
//! are the indecomposable iso-classes (one basis vector per root, since an
//! interval is determined by its class), and structure constants come from
//! the Hall bracket, whose value on indicator functions of indecomposables
//! is again supported on indecomposables.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num::rational::BigRational;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{format_rational, parse_rational, ratio_to_f64, Coeff};
use crate::hall::HallElement;
use crate::quiver::{DimVec, IsoClass, QuiverSpec};

/// A basis vector of one graded component: its degree (a root) and a label.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Letter {
    pub root: DimVec,
    pub label: String,
}

/// A truncated graded Lie algebra presented by basis and structure
/// constants. Immutable; share via [`Arc`].
#[derive(Debug, PartialEq)]
pub struct LieAlgebraSpec {
    rank: usize,
    truncation: u32,
    letters: Vec<Letter>,
    index: HashMap<(DimVec, String), u16>,
    /// Structure constants for letter pairs `(i, j)` with `i < j`;
    /// `[x_j, x_i]` is the negation, `[x_i, x_i] = 0`.
    brackets: HashMap<(u16, u16), Vec<(u16, BigRational)>>,
}

impl LieAlgebraSpec {
    pub fn new(
        rank: usize,
        truncation: u32,
        letters: Vec<Letter>,
        brackets: Vec<((Letter, Letter), Vec<(Letter, BigRational)>)>,
    ) -> Result<Arc<Self>> {
        let mut sorted = letters;
        sorted.sort();
        sorted.dedup();
        let mut index = HashMap::new();
        for (i, l) in sorted.iter().enumerate() {
            if l.root.len() != rank || l.root.is_zero() {
                return Err(Error::domain(format!(
                    "letter {l:?} must sit in a positive degree of rank {rank}"
                )));
            }
            index.insert((l.root.clone(), l.label.clone()), i as u16);
        }
        let mut spec = LieAlgebraSpec {
            rank,
            truncation,
            letters: sorted,
            index,
            brackets: HashMap::new(),
        };
        for ((a, b), value) in brackets {
            let i = spec
                .letter_id(&a.root, &a.label)
                .ok_or_else(|| Error::domain(format!("unknown bracket operand {a:?}")))?;
            let j = spec
                .letter_id(&b.root, &b.label)
                .ok_or_else(|| Error::domain(format!("unknown bracket operand {b:?}")))?;
            if i == j {
                return Err(Error::domain("bracket table entry [x, x]".to_string()));
            }
            let target = a.root.add(&b.root);
            let mut row = Vec::new();
            for (l, c) in value {
                if l.root != target {
                    return Err(Error::domain(format!(
                        "bracket of degrees {:?}, {:?} must land in {:?}, got {:?}",
                        a.root, b.root, target, l.root
                    )));
                }
                let k = spec
                    .letter_id(&l.root, &l.label)
                    .ok_or_else(|| Error::domain(format!("unknown bracket target {l:?}")))?;
                row.push((k, c));
            }
            let (key, row) = if i < j {
                ((i, j), row)
            } else {
                ((j, i), row.into_iter().map(|(k, c)| (k, -c)).collect())
            };
            if spec.brackets.insert(key, row).is_some() {
                return Err(Error::domain(format!(
                    "duplicate bracket table entry for letters {key:?}"
                )));
            }
        }
        Ok(Arc::new(spec))
    }

    /// The algebra of indicator functions of indecomposables, with structure
    /// constants read off the Hall bracket. Returns the spec together with
    /// the iso-class realizing each letter (indexed by letter id).
    pub fn from_quiver(q: &QuiverSpec, truncation: u32) -> (Arc<Self>, Vec<IsoClass>) {
        let n = q.rank();
        let mut letters = Vec::new();
        for (a, b) in q.all_intervals() {
            let m = IsoClass::interval(a, b);
            if m.total_dim() <= truncation {
                letters.push((Letter { root: m.class(n), label: format!("[{a},{b}]") }, m));
            }
        }
        letters.sort();
        let classes: Vec<IsoClass> = letters.iter().map(|(_, m)| m.clone()).collect();
        let mut bracket_entries = Vec::new();
        for i in 0..letters.len() {
            for j in i + 1..letters.len() {
                let (li, mi) = &letters[i];
                let (lj, mj) = &letters[j];
                if li.root.add(&lj.root).total() > truncation {
                    continue;
                }
                let br: HallElement<BigRational> = HallElement::char_fn(mi.clone())
                    .bracket(&HallElement::char_fn(mj.clone()), q);
                assert!(
                    br.is_primitive(),
                    "Hall bracket of indecomposable indicators left the Lie algebra: {br:?}"
                );
                let mut value = Vec::new();
                for (m, c) in br.terms() {
                    let iv = m.intervals()[0];
                    value.push((
                        Letter {
                            root: m.class(n),
                            label: format!("[{},{}]", iv.0, iv.1),
                        },
                        c.clone(),
                    ));
                }
                if !value.is_empty() {
                    bracket_entries.push(((li.clone(), lj.clone()), value));
                }
            }
        }
        let spec = Self::new(
            n,
            truncation,
            letters.into_iter().map(|(l, _)| l).collect(),
            bracket_entries,
        )
        .expect("quiver realization is always well-formed");
        (spec, classes)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn letter_id(&self, root: &DimVec, label: &str) -> Option<u16> {
        self.index.get(&(root.clone(), label.to_string())).copied()
    }

    pub fn letter(&self, id: u16) -> &Letter {
        &self.letters[id as usize]
    }

    pub fn degree_total(&self, id: u16) -> u32 {
        self.letters[id as usize].root.total()
    }

    /// `[x_i, x_j]` as a rational combination of letters (empty when zero or
    /// past the truncation).
    pub fn bracket_basis(&self, i: u16, j: u16) -> Vec<(u16, BigRational)> {
        if i == j {
            return vec![];
        }
        if i < j {
            self.brackets.get(&(i, j)).cloned().unwrap_or_default()
        } else {
            self.brackets
                .get(&(j, i))
                .map(|row| row.iter().map(|(k, c)| (*k, -c.clone())).collect())
                .unwrap_or_default()
        }
    }

    fn bracket_rational(
        &self,
        x: &BTreeMap<u16, BigRational>,
        y: &BTreeMap<u16, BigRational>,
    ) -> BTreeMap<u16, BigRational> {
        let mut out: BTreeMap<u16, BigRational> = BTreeMap::new();
        for (&i, a) in x {
            for (&j, b) in y {
                for (k, c) in self.bracket_basis(i, j) {
                    let term = a.clone() * b.clone() * c;
                    *out.entry(k).or_insert_with(|| BigRational::from_integer(0.into())) += term;
                }
            }
        }
        out.retain(|_, v| !num::Zero::is_zero(v));
        out
    }

    /// Exact Jacobi check over all letter triples within the truncation.
    pub fn verify_jacobi(&self) -> Result<()> {
        let single =
            |i: u16| BTreeMap::from([(i, BigRational::from_integer(1.into()))]);
        let nl = self.letters.len() as u16;
        for i in 0..nl {
            for j in 0..nl {
                for k in 0..nl {
                    let total = self.degree_total(i) + self.degree_total(j) + self.degree_total(k);
                    if total > self.truncation {
                        continue;
                    }
                    let mut acc: BTreeMap<u16, BigRational> = BTreeMap::new();
                    for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                        let inner = self.bracket_rational(&single(a), &single(b));
                        let outer = self.bracket_rational(&inner, &single(c));
                        for (id, v) in outer {
                            *acc.entry(id)
                                .or_insert_with(|| BigRational::from_integer(0.into())) += v;
                        }
                    }
                    acc.retain(|_, v| !num::Zero::is_zero(v));
                    if !acc.is_empty() {
                        return Err(Error::domain(format!(
                            "Jacobi identity fails on letters ({i},{j},{k}): {acc:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub(crate) fn check_same(self: &Arc<Self>, other: &Arc<Self>) -> Result<()> {
        if Arc::ptr_eq(self, other) || **self == **other {
            Ok(())
        } else {
            Err(Error::domain(
                "operands belong to different Lie algebra presentations",
            ))
        }
    }
}

// --- JSON form ------------------------------------------------------------
//
// {"rank": 2, "truncation": 3, "roots": [[0,1],[1,0],[1,1]],
//  "basis": {"0,1": ["[2,2]"], ...},
//  "brackets": [{"left": ["1,0","[1,1]"], "right": ["0,1","[2,2]"],
//                "value": {"[1,2]": "-1"}}]}
// Root keys are comma-joined entries; rationals are "p/q" strings.

#[derive(Serialize, Deserialize)]
struct SpecJson {
    rank: usize,
    truncation: u32,
    roots: Vec<Vec<u32>>,
    basis: BTreeMap<String, Vec<String>>,
    brackets: Vec<BracketJson>,
}

#[derive(Serialize, Deserialize)]
struct BracketJson {
    left: (String, String),
    right: (String, String),
    value: BTreeMap<String, String>,
}

fn root_key(root: &DimVec) -> String {
    root.0
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_root_key(s: &str, rank: usize) -> Result<DimVec> {
    let entries: Vec<u32> = s
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(format!("bad root key {s:?}")))?;
    if entries.len() != rank {
        return Err(Error::parse(format!("root key {s:?} has wrong rank")));
    }
    Ok(DimVec(entries))
}

impl LieAlgebraSpec {
    pub fn to_json(&self) -> serde_json::Value {
        let mut roots: Vec<Vec<u32>> = Vec::new();
        let mut basis: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for l in &self.letters {
            if !roots.contains(&l.root.0) {
                roots.push(l.root.0.clone());
            }
            basis.entry(root_key(&l.root)).or_default().push(l.label.clone());
        }
        roots.sort();
        let mut brackets: Vec<BracketJson> = Vec::new();
        let mut keys: Vec<&(u16, u16)> = self.brackets.keys().collect();
        keys.sort();
        for &(i, j) in keys {
            let row = &self.brackets[&(i, j)];
            let (li, lj) = (self.letter(i), self.letter(j));
            brackets.push(BracketJson {
                left: (root_key(&li.root), li.label.clone()),
                right: (root_key(&lj.root), lj.label.clone()),
                value: row
                    .iter()
                    .map(|(k, c)| (self.letter(*k).label.clone(), format_rational(c)))
                    .collect(),
            });
        }
        serde_json::to_value(SpecJson {
            rank: self.rank,
            truncation: self.truncation,
            roots,
            basis,
            brackets,
        })
        .expect("spec serialization cannot fail")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Arc<Self>> {
        let sj: SpecJson = serde_json::from_value(v.clone())?;
        let mut letters = Vec::new();
        for (key, labels) in &sj.basis {
            let root = parse_root_key(key, sj.rank)?;
            for label in labels {
                letters.push(Letter { root: root.clone(), label: label.clone() });
            }
        }
        let find = |key: &str, label: &str| -> Result<Letter> {
            let root = parse_root_key(key, sj.rank)?;
            Ok(Letter { root, label: label.to_string() })
        };
        let mut brackets = Vec::new();
        for b in &sj.brackets {
            let left = find(&b.left.0, &b.left.1)?;
            let right = find(&b.right.0, &b.right.1)?;
            let target = left.root.add(&right.root);
            let mut value = Vec::new();
            for (label, c) in &b.value {
                value.push((
                    Letter { root: target.clone(), label: label.clone() },
                    parse_rational(c)?,
                ));
            }
            brackets.push(((left, right), value));
        }
        Self::new(sj.rank, sj.truncation, letters, brackets)
    }
}

/// An element of the truncated Lie algebra: one complex coefficient per
/// basis letter.
#[derive(Clone, Debug)]
pub struct GradedLieElement {
    spec: Arc<LieAlgebraSpec>,
    coeffs: BTreeMap<u16, Complex64>,
}

impl GradedLieElement {
    pub fn zero(spec: Arc<LieAlgebraSpec>) -> Self {
        GradedLieElement { spec, coeffs: BTreeMap::new() }
    }

    pub fn from_coeffs(
        spec: Arc<LieAlgebraSpec>,
        coeffs: impl IntoIterator<Item = (u16, Complex64)>,
    ) -> Self {
        let mut out = GradedLieElement { spec, coeffs: coeffs.into_iter().collect() };
        out.coeffs.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        out
    }

    pub fn spec(&self) -> &Arc<LieAlgebraSpec> {
        &self.spec
    }

    pub fn coeffs(&self) -> &BTreeMap<u16, Complex64> {
        &self.coeffs
    }

    pub fn coeff(&self, id: u16) -> Complex64 {
        self.coeffs.get(&id).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.spec.check_same(&other.spec)?;
        let mut coeffs = self.coeffs.clone();
        for (&id, c) in &other.coeffs {
            *coeffs.entry(id).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        Ok(GradedLieElement::from_coeffs(self.spec.clone(), coeffs))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, k: Complex64) -> Self {
        GradedLieElement::from_coeffs(
            self.spec.clone(),
            self.coeffs.iter().map(|(&id, c)| (id, c * k)),
        )
    }

    /// The graded piece in one degree.
    pub fn graded_part(&self, root: &DimVec) -> Self {
        GradedLieElement::from_coeffs(
            self.spec.clone(),
            self.coeffs
                .iter()
                .filter(|(&id, _)| &self.spec.letter(id).root == root)
                .map(|(&id, c)| (id, *c)),
        )
    }

    /// The commutator, reduced to the letter basis via structure constants.
    pub fn bracket(&self, other: &Self) -> Result<Self> {
        self.spec.check_same(&other.spec)?;
        let mut coeffs: BTreeMap<u16, Complex64> = BTreeMap::new();
        for (&i, a) in &self.coeffs {
            for (&j, b) in &other.coeffs {
                for (k, c) in self.spec.bracket_basis(i, j) {
                    *coeffs.entry(k).or_insert(Complex64::new(0.0, 0.0)) +=
                        a * b * ratio_to_f64(&c);
                }
            }
        }
        Ok(GradedLieElement::from_coeffs(self.spec.clone(), coeffs))
    }

    /// The degree action `x ↦ Σ z(α)·x_α` (the bracket with a grading
    /// element of the extended algebra).
    pub fn degree_action(&self, z: impl Fn(&DimVec) -> Complex64) -> Self {
        GradedLieElement::from_coeffs(
            self.spec.clone(),
            self.coeffs
                .iter()
                .map(|(&id, c)| (id, c * z(&self.spec.letter(id).root))),
        )
    }

    pub fn max_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        match self.sub(other) {
            Ok(d) => d.max_norm() <= tol,
            Err(_) => false,
        }
    }

    /// Embeds into the envelope as a sum of one-letter words.
    pub fn as_words(&self) -> EnvelopeElement {
        EnvelopeElement {
            spec: self.spec.clone(),
            coeffs: self.coeffs.iter().map(|(&id, c)| (vec![id], *c)).collect(),
        }
    }

    /// `exp` in the word envelope (terminates: letters have positive degree).
    pub fn exp_primitive(&self) -> EnvelopeElement {
        let x = self.as_words();
        let mut acc = EnvelopeElement::one(self.spec.clone());
        let mut pow = EnvelopeElement::one(self.spec.clone());
        let mut fact = 1.0;
        for n in 1..=self.spec.truncation as u64 {
            pow = pow.product(&x).expect("same spec");
            if pow.coeffs.is_empty() {
                break;
            }
            fact *= n as f64;
            acc = acc.add(&pow.scale(Complex64::new(1.0 / fact, 0.0))).expect("same spec");
        }
        acc
    }

    /// Realizes the element as a constructible function: each letter becomes
    /// the indicator of its iso-class (from [`LieAlgebraSpec::from_quiver`]).
    pub fn to_hall(&self, classes: &[IsoClass]) -> HallElement<Complex64> {
        HallElement::from_terms(
            self.coeffs
                .iter()
                .map(|(&id, c)| (classes[id as usize].clone(), *c)),
        )
    }

    /// Reads a primitive constructible function back into the Lie algebra.
    /// Coefficients on decomposables must be below `tol` (they are dropped);
    /// anything larger is an error.
    pub fn from_hall(
        spec: Arc<LieAlgebraSpec>,
        classes: &[IsoClass],
        f: &HallElement<Complex64>,
        tol: f64,
    ) -> Result<Self> {
        let lookup: HashMap<&IsoClass, u16> = classes
            .iter()
            .enumerate()
            .map(|(i, m)| (m, i as u16))
            .collect();
        let mut coeffs = BTreeMap::new();
        for (m, c) in f.terms() {
            match lookup.get(m) {
                Some(&id) => {
                    coeffs.insert(id, *c);
                }
                None => {
                    if !c.approx_zero(tol) {
                        return Err(Error::numerical(format!(
                            "non-primitive component {c:?} on {m:?} exceeds {tol:e}"
                        )));
                    }
                }
            }
        }
        Ok(GradedLieElement::from_coeffs(spec, coeffs))
    }
}

/// An element of the free word algebra on the letters, graded by summed
/// degree and truncated by the spec's total-degree bound.
#[derive(Clone, Debug)]
pub struct EnvelopeElement {
    spec: Arc<LieAlgebraSpec>,
    coeffs: BTreeMap<Vec<u16>, Complex64>,
}

impl EnvelopeElement {
    pub fn zero(spec: Arc<LieAlgebraSpec>) -> Self {
        EnvelopeElement { spec, coeffs: BTreeMap::new() }
    }

    /// The unit: the empty word with coefficient 1.
    pub fn one(spec: Arc<LieAlgebraSpec>) -> Self {
        EnvelopeElement { spec, coeffs: BTreeMap::from([(vec![], Complex64::new(1.0, 0.0))]) }
    }

    pub fn from_words(
        spec: Arc<LieAlgebraSpec>,
        words: impl IntoIterator<Item = (Vec<u16>, Complex64)>,
    ) -> Self {
        let mut out = EnvelopeElement { spec, coeffs: BTreeMap::new() };
        for (w, c) in words {
            if out.word_degree(&w) <= out.spec.truncation {
                *out.coeffs.entry(w).or_insert(Complex64::new(0.0, 0.0)) += c;
            }
        }
        out.coeffs.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        out
    }

    pub fn spec(&self) -> &Arc<LieAlgebraSpec> {
        &self.spec
    }

    pub fn coeffs(&self) -> &BTreeMap<Vec<u16>, Complex64> {
        &self.coeffs
    }

    pub fn word_degree(&self, w: &[u16]) -> u32 {
        w.iter().map(|&id| self.spec.degree_total(id)).sum()
    }

    pub fn scalar_part(&self) -> Complex64 {
        self.coeffs.get(&vec![]).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn coeff(&self, w: &[u16]) -> Complex64 {
        self.coeffs.get(w).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.spec.check_same(&other.spec)?;
        let mut coeffs = self.coeffs.clone();
        for (w, c) in &other.coeffs {
            *coeffs.entry(w.clone()).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        coeffs.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        Ok(EnvelopeElement { spec: self.spec.clone(), coeffs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, k: Complex64) -> Self {
        let mut coeffs: BTreeMap<Vec<u16>, Complex64> =
            self.coeffs.iter().map(|(w, c)| (w.clone(), c * k)).collect();
        coeffs.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        EnvelopeElement { spec: self.spec.clone(), coeffs }
    }

    /// Word concatenation, dropping degrees past the truncation.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.spec.check_same(&other.spec)?;
        let d = self.spec.truncation;
        let mut coeffs: BTreeMap<Vec<u16>, Complex64> = BTreeMap::new();
        for (w1, c1) in &self.coeffs {
            let d1 = self.word_degree(w1);
            for (w2, c2) in &other.coeffs {
                if d1 + self.word_degree(w2) > d {
                    continue;
                }
                let mut w = w1.clone();
                w.extend_from_slice(w2);
                *coeffs.entry(w).or_insert(Complex64::new(0.0, 0.0)) += c1 * c2;
            }
        }
        coeffs.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        Ok(EnvelopeElement { spec: self.spec.clone(), coeffs })
    }

    /// Drops components of total degree > `cap` (an exact quotient map).
    pub fn truncate(&self, cap: u32) -> Result<Self> {
        if cap > self.spec.truncation {
            return Err(Error::domain(format!(
                "truncation {cap} exceeds the spec bound {}",
                self.spec.truncation
            )));
        }
        let mut out = self.clone();
        out.coeffs.retain(|w, _| {
            w.iter().map(|&id| self.spec.degree_total(id)).sum::<u32>() <= cap
        });
        Ok(out)
    }

    /// `log(1 + (self − 1))` as words; domain error unless the scalar part
    /// is 1 (up to 1e−9).
    pub fn log_words(&self) -> Result<Self> {
        if (self.scalar_part() - Complex64::new(1.0, 0.0)).norm() > 1e-9 {
            return Err(Error::domain(format!(
                "log requires scalar part 1, got {}",
                self.scalar_part()
            )));
        }
        let mut x = self.clone();
        x.coeffs.remove(&vec![]);
        let mut acc = EnvelopeElement::zero(self.spec.clone());
        let mut pow = EnvelopeElement::one(self.spec.clone());
        for n in 1..=self.spec.truncation as i64 {
            pow = pow.product(&x)?;
            if pow.coeffs.is_empty() {
                break;
            }
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            acc = acc.add(&pow.scale(Complex64::new(sign / n as f64, 0.0)))?;
        }
        Ok(acc)
    }

    /// Projects a word series onto the Lie algebra by left-to-right
    /// bracketing: `w_1 w_2 ⋯ w_n ↦ [[…[w_1,w_2],…],w_n]/n`, reduced via the
    /// structure constants. This is the identity on Lie series (so on the
    /// log of any grouplike element) and a projection otherwise.
    pub fn lie_projection(&self) -> GradedLieElement {
        let mut coeffs: BTreeMap<u16, Complex64> = BTreeMap::new();
        for (w, c) in &self.coeffs {
            if w.is_empty() {
                continue;
            }
            // left-bracket the word down to a letter combination
            let mut acc: BTreeMap<u16, Complex64> =
                BTreeMap::from([(w[0], Complex64::new(1.0, 0.0))]);
            for &next in &w[1..] {
                let mut reduced: BTreeMap<u16, Complex64> = BTreeMap::new();
                for (&i, a) in &acc {
                    for (k, sc) in self.spec.bracket_basis(i, next) {
                        *reduced.entry(k).or_insert(Complex64::new(0.0, 0.0)) +=
                            a * ratio_to_f64(&sc);
                    }
                }
                acc = reduced;
                if acc.is_empty() {
                    break;
                }
            }
            let weight = c / w.len() as f64;
            for (id, a) in acc {
                *coeffs.entry(id).or_insert(Complex64::new(0.0, 0.0)) += a * weight;
            }
        }
        GradedLieElement::from_coeffs(self.spec.clone(), coeffs)
    }

    /// `log` followed by the projection back into the Lie algebra; exact on
    /// grouplike elements.
    pub fn log_grouplike(&self) -> Result<GradedLieElement> {
        Ok(self.log_words()?.lie_projection())
    }

    /// Realizes the words as Hall products of indicator functions.
    pub fn to_hall(&self, q: &QuiverSpec, classes: &[IsoClass]) -> HallElement<Complex64> {
        let mut acc = HallElement::zero();
        for (w, c) in &self.coeffs {
            let factors: Vec<HallElement<Complex64>> = w
                .iter()
                .map(|&id| HallElement::char_fn(classes[id as usize].clone()))
                .collect();
            acc = acc.add(&HallElement::product_of(&factors, q).scale(c));
        }
        acc
    }

    pub fn max_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        match self.sub(other) {
            Ok(d) => d.max_norm() <= tol,
            Err(_) => false,
        }
    }
}

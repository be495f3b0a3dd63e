//! Exact scalar types: arbitrary-precision rationals, Gaussian rationals,
//! and the coefficient trait shared by rational and complex Hall elements.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num::rational::BigRational;
use num::{BigInt, Signed, Zero};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parses a rational from `"p/q"` or `"p"` (arbitrary precision).
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = num
        .parse()
        .map_err(|_| Error::parse(format!("bad rational numerator in {s:?}")))?;
    let d: BigInt = den
        .parse()
        .map_err(|_| Error::parse(format!("bad rational denominator in {s:?}")))?;
    if d.is_zero() {
        return Err(Error::parse(format!("zero denominator in {s:?}")));
    }
    Ok(BigRational::new(n, d))
}

/// Formats a rational as `"p/q"`, dropping the slash for integers.
pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// A Gaussian rational `re + im·i`: the exact form of a stability value.
/// Serializes as a pair of `"p/q"` strings `[re, im]`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GaussianRational {
    pub re: BigRational,
    pub im: BigRational,
}

impl Serialize for GaussianRational {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        (format_rational(&self.re), format_rational(&self.im)).serialize(ser)
    }
}

impl<'de> Deserialize<'de> for GaussianRational {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let (re, im) = <(String, String)>::deserialize(de)?;
        Ok(GaussianRational {
            re: parse_rational(&re).map_err(serde::de::Error::custom)?,
            im: parse_rational(&im).map_err(serde::de::Error::custom)?,
        })
    }
}

impl GaussianRational {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        GaussianRational { re, im }
    }

    pub fn from_ints(re: i64, im: i64) -> Self {
        GaussianRational {
            re: BigRational::from_integer(re.into()),
            im: BigRational::from_integer(im.into()),
        }
    }

    pub fn zero() -> Self {
        GaussianRational::from_ints(0, 0)
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(ratio_to_f64(&self.re), ratio_to_f64(&self.im))
    }

    /// `Im(self · conj(other))`, exactly. Positive iff `self` points
    /// counterclockwise of `other` (within a half-turn).
    pub fn cross(&self, other: &GaussianRational) -> BigRational {
        &self.im * &other.re - &self.re * &other.im
    }

    /// `Re(self · conj(other))`, exactly.
    pub fn dot(&self, other: &GaussianRational) -> BigRational {
        &self.re * &other.re + &self.im * &other.im
    }

    pub fn is_zero(&self) -> bool {
        num::Zero::is_zero(&self.re) && num::Zero::is_zero(&self.im)
    }
}

impl Add for GaussianRational {
    type Output = GaussianRational;
    fn add(self, rhs: Self) -> Self {
        GaussianRational::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl<'a> Add<&'a GaussianRational> for GaussianRational {
    type Output = GaussianRational;
    fn add(self, rhs: &'a GaussianRational) -> Self {
        GaussianRational::new(self.re + &rhs.re, self.im + &rhs.im)
    }
}

/// Converts a big rational to `f64` (NaN if out of range).
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    use num::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Coefficient ring for Hall elements: exact rationals on the categorical
/// side, complex doubles on the analytic side.
pub trait Coeff:
    Clone
    + PartialEq
    + fmt::Debug
    + Add<Output = Self>
    + AddAssign
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn from_ratio(num: i64, den: i64) -> Self;
    /// `|self| ≤ tol`, with `tol = 0` meaning exact vanishing.
    fn approx_zero(&self, tol: f64) -> bool;
    /// Rendering used in JSON output (`"p/q"` or `[re, im]` handled upstream).
    fn render(&self) -> serde_json::Value;
}

impl Coeff for BigRational {
    fn zero() -> Self {
        num::Zero::zero()
    }
    fn one() -> Self {
        num::One::one()
    }
    fn is_zero(&self) -> bool {
        num::Zero::is_zero(self)
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(num.into(), den.into())
    }
    fn approx_zero(&self, tol: f64) -> bool {
        if num::Zero::is_zero(self) {
            return true;
        }
        tol > 0.0 && ratio_abs_f64(self) <= tol
    }
    fn render(&self) -> serde_json::Value {
        serde_json::Value::String(format_rational(self))
    }
}

impl Coeff for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        Complex64::new(num as f64 / den as f64, 0.0)
    }
    fn approx_zero(&self, tol: f64) -> bool {
        self.norm() <= tol
    }
    fn render(&self) -> serde_json::Value {
        serde_json::json!([self.re, self.im])
    }
}

/// Absolute value of a rational as `f64`, for reporting only.
pub fn ratio_abs_f64(r: &BigRational) -> f64 {
    ratio_to_f64(&r.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_roundtrip() {
        let r = parse_rational("-3/4").unwrap();
        assert_eq!(format_rational(&r), "-3/4");
        let r = parse_rational("5").unwrap();
        assert_eq!(format_rational(&r), "5");
        let r = parse_rational("6/4").unwrap();
        assert_eq!(format_rational(&r), "3/2");
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x/2").is_err());
    }

    #[test]
    fn gaussian_cross_sign_orders_by_angle() {
        // z1 = -1 + i (phase 3/4), z2 = 1 + i (phase 1/4): cross(z1, z2) > 0.
        let zero: BigRational = num::Zero::zero();
        let z1 = GaussianRational::from_ints(-1, 1);
        let z2 = GaussianRational::from_ints(1, 1);
        assert!(z1.cross(&z2) > zero);
        assert!(z2.cross(&z1) < zero);
        // Collinear, same direction: cross = 0, dot > 0.
        let z3 = GaussianRational::from_ints(2, 2);
        assert_eq!(z2.cross(&z3), zero);
        assert!(z2.dot(&z3) > zero);
    }
}

//! Mode-tagged numeric values and exact-rational helpers.
//!
//! Every verification path (n ≤ 20) runs in exact rational arithmetic; the
//! large-n experiment paths use IEEE doubles. A [`Scalar`] records which of
//! the two produced it. Float-mode values carry ordinary double-precision
//! rounding (relative error on the order of 1e-15 for the closed forms
//! evaluated here).

use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{invalid, Result};

/// A number tagged with the arithmetic mode that produced it.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Exact(BigRational),
    Float(f64),
}

impl Scalar {
    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(r) => ratio_to_f64(r),
            Scalar::Float(v) => *v,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn exact(&self) -> Option<&BigRational> {
        match self {
            Scalar::Exact(r) => Some(r),
            Scalar::Float(_) => None,
        }
    }

    pub fn into_exact(self) -> Option<BigRational> {
        match self {
            Scalar::Exact(r) => Some(r),
            Scalar::Float(_) => None,
        }
    }

    pub fn mode(&self) -> ArithmeticMode {
        match self {
            Scalar::Exact(_) => ArithmeticMode::Exact,
            Scalar::Float(_) => ArithmeticMode::Float,
        }
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Float(v)
    }
}

impl From<BigRational> for Scalar {
    fn from(r: BigRational) -> Self {
        Scalar::Exact(r)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(r) => write!(f, "{r}"),
            Scalar::Float(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("Scalar", 3)?;
        st.serialize_field("mode", &self.mode())?;
        st.serialize_field("value", &self.to_f64())?;
        match self {
            Scalar::Exact(r) => st.serialize_field("rational", &Some(r.to_string()))?,
            Scalar::Float(_) => st.serialize_field("rational", &None::<String>)?,
        }
        st.end()
    }
}

/// Arithmetic mode used by a computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArithmeticMode {
    Exact,
    Float,
}

/// A probability parameter held both exactly and as a double.
///
/// Doubles are converted through their shortest round-trip decimal form, so
/// `0.6` becomes `3/5` rather than the nearest dyadic rational.
#[derive(Debug, Clone, PartialEq)]
pub struct Prob {
    exact: BigRational,
    value: f64,
}

impl Prob {
    pub fn from_f64(v: f64) -> Result<Self> {
        let exact = rational_from_f64(v).ok_or_else(|| invalid(format!("not a finite probability: {v}")))?;
        Self::from_rational(exact)
    }

    pub fn from_ratio(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(invalid("zero denominator"));
        }
        Self::from_rational(ratio(num, den))
    }

    pub fn from_rational(exact: BigRational) -> Result<Self> {
        if exact.is_negative() || exact > BigRational::one() {
            return Err(invalid(format!("probability {exact} outside [0, 1]")));
        }
        let value = ratio_to_f64(&exact);
        Ok(Prob { exact, value })
    }

    pub fn one() -> Self {
        Prob { exact: BigRational::one(), value: 1.0 }
    }

    pub fn half() -> Self {
        Prob { exact: ratio(1, 2), value: 0.5 }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn exact(&self) -> &BigRational {
        &self.exact
    }

    pub fn complement(&self) -> Prob {
        let exact = BigRational::one() - &self.exact;
        let value = ratio_to_f64(&exact);
        Prob { exact, value }
    }
}

impl fmt::Display for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.exact)
    }
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

pub fn big(v: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Fallback for magnitudes the direct conversion rejects.
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Exact rational for the shortest decimal that round-trips to `v`.
pub fn rational_from_f64(v: f64) -> Option<BigRational> {
    if !v.is_finite() {
        return None;
    }
    parse_rational(&format!("{v}"))
}

/// Parses `"3/8"`, `"-0.375"`, `"2"` or `"1.25e-3"` into an exact rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut all = String::with_capacity(int_part.len() + frac_part.len());
    all.push_str(int_part);
    all.push_str(frac_part);
    let numer = BigInt::parse_bytes(if all.is_empty() { b"0" } else { all.as_bytes() }, 10)?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let mut r = BigRational::from_integer(numer);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -r } else { r })
}

pub fn pow(base: &BigRational, exp: usize) -> BigRational {
    num_traits::pow(base.clone(), exp)
}

/// Largest rational of the form `a / (den · 2^bits)` not exceeding `sqrt(x)`.
///
/// Used wherever a legal oracle answer must sit inside a band whose
/// half-width is a square root.
pub fn sqrt_lower(x: &BigRational, bits: u32) -> BigRational {
    if !x.is_positive() {
        return BigRational::zero();
    }
    let scale = BigInt::one() << bits as usize;
    let radicand = x.numer() * x.denom() * &scale * &scale;
    let root = radicand.sqrt();
    BigRational::new(root, x.denom() * scale)
}

/// Smallest rational of the same form not below `sqrt(x)`.
pub fn sqrt_upper(x: &BigRational, bits: u32) -> BigRational {
    if !x.is_positive() {
        return BigRational::zero();
    }
    let lo = sqrt_lower(x, bits);
    if &(&lo * &lo) == x {
        return lo;
    }
    let scale = BigInt::one() << bits as usize;
    lo + BigRational::new(BigInt::one(), x.denom() * scale)
}

pub fn min_rational(a: &BigRational, b: &BigRational) -> BigRational {
    if a <= b {
        a.clone()
    } else {
        b.clone()
    }
}

pub fn max_rational(a: &BigRational, b: &BigRational) -> BigRational {
    if a >= b {
        a.clone()
    } else {
        b.clone()
    }
}

pub fn clamp_rational(v: &BigRational, lo: &BigRational, hi: &BigRational) -> BigRational {
    if v < lo {
        lo.clone()
    } else if v > hi {
        hi.clone()
    } else {
        v.clone()
    }
}

pub fn is_negative_sign(r: &BigRational) -> bool {
    r.numer().sign() == Sign::Minus
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_decimal_conversion() {
        assert_eq!(rational_from_f64(0.6).unwrap(), ratio(3, 5));
        assert_eq!(rational_from_f64(0.75).unwrap(), ratio(3, 4));
        assert_eq!(rational_from_f64(1.0).unwrap(), int(1));
        assert_eq!(rational_from_f64(-0.125).unwrap(), ratio(-1, 8));
        assert_eq!(rational_from_f64(1e-20).unwrap(), BigRational::new(BigInt::one(), num_traits::pow(BigInt::from(10), 20)));
        assert!(rational_from_f64(f64::NAN).is_none());
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("3/8").unwrap(), ratio(3, 8));
        assert_eq!(parse_rational("1.25e-1").unwrap(), ratio(1, 8));
        assert_eq!(parse_rational(".5").unwrap(), ratio(1, 2));
        assert!(parse_rational("abc").is_none());
        assert!(parse_rational("1/0").is_none());
    }

    #[test]
    fn sqrt_bounds_bracket_the_root() {
        let x = ratio(2475, 1_000_000);
        let lo = sqrt_lower(&x, 40);
        let hi = sqrt_upper(&x, 40);
        assert!(&lo * &lo <= x);
        assert!(&hi * &hi >= x);
        assert!((ratio_to_f64(&hi) - ratio_to_f64(&lo)) < 1e-11);
        assert_eq!(sqrt_lower(&ratio(1, 4), 8), ratio(1, 2));
        assert_eq!(sqrt_upper(&ratio(1, 4), 8), ratio(1, 2));
    }

    #[test]
    fn prob_rejects_out_of_range() {
        assert!(Prob::from_f64(1.5).is_err());
        assert!(Prob::from_f64(-0.1).is_err());
        assert_eq!(Prob::from_f64(0.25).unwrap().complement().exact(), &ratio(3, 4));
    }
}

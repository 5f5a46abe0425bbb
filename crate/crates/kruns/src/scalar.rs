//! Pluggable arithmetic backend.
//!
//! Every distribution, constant and bound in this crate is generic over a
//! [`Scalar`], which is instantiated either with `f64` (fast, double
//! precision) or with [`num_rational::BigRational`] (exact arbitrary-precision
//! rational arithmetic). The exact backend is what lets the test suite assert
//! bit-for-bit agreement between independent computation routes; the double
//! backend is what makes large-`n` work interactive.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Field-like arithmetic used throughout the crate.
///
/// Operations are by value: both backends move cheaply and the algorithms are
/// written in expression style. `PartialOrd` is total on the values the crate
/// produces (no NaNs escape: inputs are validated probabilities).
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// True when arithmetic is exact (no rounding anywhere).
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_u64(v: u64) -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_bigint(v: &BigInt) -> Self;

    /// Exact embedding of the fraction `num / den`.
    fn from_ratio(num: i64, den: i64) -> Self;

    /// Parse a plain decimal literal such as `0.11` or `-2.5`.
    ///
    /// The exact backend turns `0.11` into the true rational 11/100 rather
    /// than the nearest double, which is what makes "evaluate the formula at
    /// q = 0.11" a well-defined exact statement. Exponent notation and other
    /// float syntax are rejected for both backends so the two modes accept the
    /// same language of inputs.
    fn from_decimal_str(s: &str) -> Result<Self>;

    /// Nearest double (used for reporting and for double-mode oracles).
    fn to_f64(&self) -> f64;

    fn abs(&self) -> Self;
    fn is_zero(&self) -> bool;

    /// `a^ea / b^eb` for machine-sized bases and signed exponents.
    ///
    /// The double backend evaluates this in log space so ratios like
    /// `(k+1)^(n-k) / (k+2)^(n-k-1)` stay finite even when the direct powers
    /// would overflow (they do for n around 700); the exact backend uses
    /// big-integer powers.
    fn pow_ratio(a: u64, ea: i64, b: u64, eb: i64) -> Self;

    /// `floor(self)` clamped into `u64` (negative values floor to 0).
    ///
    /// Used for the pseudo-binomial support end `floor(alpha)`.
    fn floor_u64(&self) -> u64;

    /// `self^e` by binary exponentiation.
    fn powu(&self, e: usize) -> Self {
        let mut e = e;
        let mut base = self.clone();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            e >>= 1;
            if e > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }
}

/// Validates the shared decimal syntax: optional sign, digits, optional
/// fractional part. Returns (negative, integer digits, fraction digits).
fn split_decimal(s: &str) -> Option<(bool, &str, &str)> {
    let s = s.trim();
    let (neg, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match rest.split_once('.') {
        Some((a, b)) => (a, b),
        None => (rest, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let all_digits =
        |t: &str| t.chars().all(|c| c.is_ascii_digit());
    if !all_digits(int_part) || !all_digits(frac_part) {
        return None;
    }
    Some((neg, int_part, frac_part))
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_u64(v: u64) -> Self {
        v as f64
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_bigint(v: &BigInt) -> Self {
        v.to_f64().unwrap_or(f64::NAN)
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn from_decimal_str(s: &str) -> Result<Self> {
        let err = || Error::InvalidDecimalLiteral {
            literal: s.to_string(),
        };
        // Validate with the shared grammar, then let the float parser do the
        // correctly rounded conversion.
        split_decimal(s).ok_or_else(err)?;
        s.trim().parse::<f64>().map_err(|_| err())
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn pow_ratio(a: u64, ea: i64, b: u64, eb: i64) -> Self {
        if a == 0 {
            return if ea > 0 { 0.0 } else { f64::INFINITY };
        }
        if b == 0 {
            return if eb > 0 { f64::INFINITY } else { 0.0 };
        }
        (ea as f64 * (a as f64).ln() - eb as f64 * (b as f64).ln()).exp()
    }
    fn floor_u64(&self) -> u64 {
        if *self <= 0.0 {
            0
        } else {
            self.floor() as u64
        }
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        <BigRational as One>::one()
    }
    fn from_u64(v: u64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_bigint(v: &BigInt) -> Self {
        BigRational::from_integer(v.clone())
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn from_decimal_str(s: &str) -> Result<Self> {
        let (neg, int_part, frac_part) = split_decimal(s).ok_or_else(|| {
            Error::InvalidDecimalLiteral {
                literal: s.to_string(),
            }
        })?;
        let mut digits = String::with_capacity(int_part.len() + frac_part.len());
        digits.push_str(int_part);
        digits.push_str(frac_part);
        let num: BigInt = digits.parse().map_err(|_| Error::InvalidDecimalLiteral {
            literal: s.to_string(),
        })?;
        let den = BigInt::from(10u32).pow(frac_part.len() as u32);
        let value = BigRational::new(num, den);
        Ok(if neg { -value } else { value })
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn pow_ratio(a: u64, ea: i64, b: u64, eb: i64) -> Self {
        fn power(base: u64, e: i64) -> (BigInt, BigInt) {
            let p = BigInt::from(base).pow(e.unsigned_abs() as u32);
            if e >= 0 {
                (p, BigInt::one())
            } else {
                (BigInt::one(), p)
            }
        }
        let (an, ad) = power(a, ea);
        let (bn, bd) = power(b, eb);
        // a^ea / b^eb = (an/ad) * (bd/bn)
        BigRational::new(an * bd, ad * bn)
    }
    fn floor_u64(&self) -> u64 {
        let floored = self.floor().to_integer();
        if Signed::is_negative(&floored) {
            0
        } else {
            ToPrimitive::to_u64(&floored).unwrap_or(u64::MAX)
        }
    }
}

/// Arithmetic mode selector used by callers that dispatch at runtime (the CLI).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// IEEE double precision.
    Double,
    /// Arbitrary-precision rational arithmetic.
    Exact,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "double" => Ok(Mode::Double),
            "exact" => Ok(Mode::Exact),
            other => Err(format!("unknown mode '{other}' (expected 'double' or 'exact')")),
        }
    }
}

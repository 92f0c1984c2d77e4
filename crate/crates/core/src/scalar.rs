//! Exact rationals and the right-hand-side scalar abstraction.

use std::cmp::Ordering;
use std::fmt::Debug;
use std::ops::{Add, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Scalar used on the right-hand side of a linear row.
///
/// Coefficients are always [`Rational`]; the bound may be a number or a
/// symbolic affine expression. `sign` decides orderings, so symbolic
/// implementations must carry a witness value.
pub trait Bound:
    Clone + Debug + PartialEq + Zero + Add<Output = Self> + Sub<Output = Self> + Neg<Output = Self> + Send + Sync + 'static
{
    fn from_rational(r: &Rational) -> Self;
    fn scale(&self, k: &Rational) -> Self;
    fn sign(&self) -> Ordering;
    /// The exact value when the scalar is a plain number.
    fn as_rational(&self) -> Option<Rational>;
    fn to_f64(&self) -> f64;
    fn render(&self) -> String;

    fn cmp_bound(&self, other: &Self) -> Ordering {
        (self.clone() - other.clone()).sign()
    }
}

impl Bound for Rational {
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn scale(&self, k: &Rational) -> Self {
        self * k
    }
    fn sign(&self) -> Ordering {
        self.cmp(&Rational::zero())
    }
    fn as_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }
    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn rat_frac(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    // Scale to ~25 significant digits and let the float parser round.
    let n = r.numer().abs();
    let d = r.denom();
    let digits = |x: &BigInt| x.to_string().len() as i64;
    let k = 25 - (digits(&n) - digits(d));
    let ten = BigInt::from(10);
    let q = if k >= 0 { n * ten.pow(k as u32) / d } else { n / (d * ten.pow((-k) as u32)) };
    let sign = if r.is_negative() { "-" } else { "" };
    format!("{sign}{q}e{}", -k).parse().unwrap_or(f64::NAN)
}

/// Converts a finite float through its shortest round-trip decimal form, so
/// `0.1` becomes exactly `1/10`.
pub fn rational_from_f64(x: f64) -> Result<Rational> {
    if !x.is_finite() {
        return Err(Error::Validation(format!("non-finite value {x}")));
    }
    parse_decimal(&format!("{x}"))
}

/// Parses `p`, `p/q`, or a decimal literal with optional exponent.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
        let d: BigInt = d.trim().parse().map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(n, d));
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Result<Rational> {
    let bad = || Error::Parse(format!("bad number {s:?}"));
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all: BigInt = format!("{int_part}{frac_part}0").parse().map_err(|_| bad())?;
    let all = all / BigInt::from(10);
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = Rational::from_integer(all);
    if scale >= 0 {
        r *= Rational::from_integer(ten.pow(scale as u32));
    } else {
        r /= Rational::from_integer(ten.pow((-scale) as u32));
    }
    Ok(if neg { -r } else { r })
}

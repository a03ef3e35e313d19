//! Scalar abstraction shared by the LP layer and the polytope code.
//!
//! Everything that touches a linear program is written against [`Scalar`],
//! so the same simplex runs over `f64` (fast, tolerance based) and over
//! [`Rational`] (exact, zero tolerance). The model layer itself is always
//! exact.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

use crate::error::ParseError;

/// Exact rational number used for all probabilities.
pub type Rational = BigRational;

pub trait Scalar:
    Clone + PartialOrd + Debug + Display + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// `true` when arithmetic is exact and comparisons need no tolerance.
    const EXACT: bool;

    /// Absolute tolerance for feasibility, optimality and support decisions.
    fn tolerance() -> Self;

    fn from_rational(q: &Rational) -> Self;

    fn to_rational(&self) -> Rational;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn is_positive_tol(&self) -> bool {
        *self > Self::tolerance()
    }

    fn is_negative_tol(&self) -> bool {
        *self < -Self::tolerance()
    }

    fn is_zero_tol(&self) -> bool {
        !self.is_positive_tol() && !self.is_negative_tol()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn tolerance() -> Self {
        1e-9
    }

    fn from_rational(q: &Rational) -> Self {
        rational_to_f64(q)
    }

    fn to_rational(&self) -> Rational {
        rationalize(*self, DEFAULT_DENOMINATOR_CAP)
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn tolerance() -> Self {
        1e-5
    }

    fn from_rational(q: &Rational) -> Self {
        rational_to_f64(q) as f32
    }

    fn to_rational(&self) -> Rational {
        rationalize(f64::from(*self), 1_000_000)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn tolerance() -> Self {
        Rational::zero()
    }

    fn from_rational(q: &Rational) -> Self {
        q.clone()
    }

    fn to_rational(&self) -> Rational {
        self.clone()
    }

    fn is_positive_tol(&self) -> bool {
        self.is_positive()
    }

    fn is_negative_tol(&self) -> bool {
        self.is_negative()
    }

    fn is_zero_tol(&self) -> bool {
        self.is_zero()
    }
}

/// Denominator cap used when turning float LP output into rationals.
pub const DEFAULT_DENOMINATOR_CAP: u64 = 1_000_000_000_000;

pub fn rational_to_f64(q: &Rational) -> f64 {
    if let Some(v) = q.to_f64() {
        return v;
    }
    // Very large numerator/denominator: scale down before dividing.
    let n = q.numer().to_f64().unwrap_or(f64::INFINITY);
    let d = q.denom().to_f64().unwrap_or(f64::INFINITY);
    n / d
}

/// Best rational approximation of `x` with denominator at most `max_den`,
/// computed from the continued-fraction convergents (and the best
/// semiconvergent at the cap).
pub fn rationalize(x: f64, max_den: u64) -> Rational {
    if !x.is_finite() {
        return Rational::zero();
    }
    let negative = x < 0.0;
    let exact = match Rational::from_float(x.abs()) {
        Some(q) => q,
        None => return Rational::zero(),
    };
    let cap = BigInt::from(max_den);
    if exact.denom() <= &cap {
        return if negative { -exact } else { exact };
    }

    // Convergents h/k of the exact binary value.
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut num = exact.numer().clone();
    let mut den = exact.denom().clone();
    let mut best = Rational::zero();
    while !den.is_zero() {
        let (a, r) = num.div_rem(&den);
        let h2 = &a * &h1 + &h0;
        let k2 = &a * &k1 + &k0;
        if k2 > cap {
            // Largest semiconvergent that still respects the cap.
            let t = (&cap - &k0) / &k1;
            let hs = &t * &h1 + &h0;
            let ks = &t * &k1 + &k0;
            let semi = Rational::new(hs, ks);
            let conv = Rational::new(h1.clone(), k1.clone());
            let d_semi = (&semi - &exact).abs();
            let d_conv = (&conv - &exact).abs();
            best = if d_semi < d_conv { semi } else { conv };
            break;
        }
        h0 = std::mem::replace(&mut h1, h2);
        k0 = std::mem::replace(&mut k1, k2);
        best = Rational::new(h1.clone(), k1.clone());
        num = std::mem::replace(&mut den, r);
    }
    if negative {
        -best
    } else {
        best
    }
}

/// Parses `p/q`, an integer, or a finite decimal (`0.3`, `-1.25e-2`) into an
/// exact rational. Decimals are converted digit by digit, never through a
/// float.
pub fn parse_rational(text: &str) -> Result<Rational, ParseError> {
    let s = text.trim();
    let bad = || ParseError::Number(s.to_string());
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }

    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let e: i32 = s[pos + 1..].parse().map_err(|_| bad())?;
            (&s[..pos], e)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
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
    let all: String = format!("{int_part}{frac_part}");
    let numer: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().map_err(|_| bad())? };
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(if negative { -value } else { value })
}

/// Formats an exact rational as `p/q` (or just `p` for integers).
pub fn format_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Formats an exact rational as a rounded decimal with `digits` fractional
/// digits.
pub fn format_decimal(q: &Rational, digits: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10u32), digits);
    let scaled = q * Rational::from_integer(scale.clone());
    let rounded = scaled.round().to_integer();
    let negative = rounded.is_negative();
    let abs = rounded.abs();
    let (int_part, frac_part) = abs.div_rem(&scale);
    let sign = if negative { "-" } else { "" };
    if digits == 0 {
        return format!("{sign}{int_part}");
    }
    format!("{sign}{int_part}.{:0>width$}", frac_part.to_string(), width = digits)
}

pub fn rat(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn rat_int(p: i64) -> Rational {
    Rational::from_integer(BigInt::from(p))
}

//! Exact scalars and the directed-rounding helpers the rate calculus needs.
//!
//! Every ceiling of an irrational expression is computed by an integer power
//! test, so outputs are bit-for-bit reproducible. Quantities that underflow
//! any sensible rational representation (the nonlinearity functions decay
//! doubly exponentially) are carried by [`BigFloat`], a float with an
//! unbounded exponent, rounded in a declared direction.

mod bigfloat;
mod real;

pub use bigfloat::BigFloat;
pub use real::Real;

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;
pub type BigNat = BigUint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoundingDirection {
    /// Result is at most the exact value.
    Down,
    /// Result is at least the exact value.
    Up,
}

impl RoundingDirection {
    pub fn flip(self) -> Self {
        match self {
            RoundingDirection::Down => RoundingDirection::Up,
            RoundingDirection::Up => RoundingDirection::Down,
        }
    }
}

/// `⌈a/b⌉`.
pub fn ceil_div(a: &BigNat, b: &BigNat) -> Result<BigNat> {
    if b.is_zero() {
        return Err(Error::domain("ceil_div by zero"));
    }
    Ok(Integer::div_ceil(a, b))
}

/// Least natural `m` with `m^b ≥ r^a`, i.e. `⌈r^{a/b}⌉`.
pub fn ceil_rat_pow(r: &Rational, a: u32, b: u32) -> Result<BigNat> {
    if r.is_negative() {
        return Err(Error::domain(format!("ceil_rat_pow of negative base {r}")));
    }
    if a == 0 || b == 0 {
        return Err(Error::domain("ceil_rat_pow exponents must be positive"));
    }
    let num = r.numer().magnitude().pow(a);
    let den = r.denom().magnitude().pow(a);
    // m^b is an integer, so m^b ≥ n/d iff m^b ≥ ⌈n/d⌉.
    let target = Integer::div_ceil(&num, &den);
    Ok(ceil_root(&target, b))
}

/// Least `m` with `m^n ≥ y`.
pub fn ceil_root(y: &BigNat, n: u32) -> BigNat {
    if y.is_zero() {
        return BigNat::zero();
    }
    let r = y.nth_root(n);
    if &r.pow(n) < y {
        r + 1u32
    } else {
        r
    }
}

/// Greatest `m` with `m^n ≤ y`.
pub fn floor_root(y: &BigNat, n: u32) -> BigNat {
    y.nth_root(n)
}

const SQRT2_RECIP_BITS: u64 = 64;

fn sqrt2_recip(dir: RoundingDirection) -> Rational {
    // 1/√2 · 2^k = √(2^{2k-1}).
    let k = SQRT2_RECIP_BITS;
    let radicand = BigNat::one() << (2 * k - 1) as usize;
    let root = match dir {
        RoundingDirection::Down => floor_root(&radicand, 2),
        RoundingDirection::Up => ceil_root(&radicand, 2),
    };
    Rational::new(BigInt::from(root), BigInt::one() << k as usize)
}

/// A fixed rational upper bound for `1/√2`, within `2^-64`.
pub fn sqrt2_recip_upper() -> &'static Rational {
    static UPPER: OnceLock<Rational> = OnceLock::new();
    UPPER.get_or_init(|| sqrt2_recip(RoundingDirection::Up))
}

/// A fixed rational lower bound for `1/√2`, within `2^-64`.
pub fn sqrt2_recip_lower() -> &'static Rational {
    static LOWER: OnceLock<Rational> = OnceLock::new();
    LOWER.get_or_init(|| sqrt2_recip(RoundingDirection::Down))
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn nat_to_rational(n: &BigNat) -> Rational {
    Rational::from_integer(BigInt::from(n.clone()))
}

/// `⌈r⌉` for a nonnegative rational.
pub fn ceil_nonneg(r: &Rational) -> Result<BigNat> {
    if r.is_negative() {
        return Err(Error::domain(format!(
            "expected a nonnegative rational, got {r}"
        )));
    }
    Ok(Integer::div_ceil(
        r.numer().magnitude(),
        r.denom().magnitude(),
    ))
}

/// `⌊r⌋` for a nonnegative rational.
pub fn floor_nonneg(r: &Rational) -> Result<BigNat> {
    if r.is_negative() {
        return Err(Error::domain(format!(
            "expected a nonnegative rational, got {r}"
        )));
    }
    Ok(r.numer().magnitude() / r.denom().magnitude())
}

/// Total bit size of a rational's representation.
pub fn rational_bits(r: &Rational) -> u64 {
    r.numer().bits() + r.denom().bits()
}

/// Parse `"p/q"`, an integer, or a plain decimal such as `"0.125"` into an
/// exact rational. Decimals are converted without rounding.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::invalid("empty rational"));
    }
    let bad = || Error::invalid(format!("cannot parse rational {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::invalid(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(n, d));
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
    let value = Rational::new(numer, denom);
    Ok(if negative { -value } else { value })
}

/// `"p/q"`, or `"p"` when the denominator is one.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Exact rational value of a finite double.
pub fn rational_from_f64(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::invalid(format!("non-finite double {x}")))
}

/// Nearest double, saturating for extreme magnitudes.
pub fn rational_to_f64(r: &Rational) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    let n = r.numer().bits() as i64;
    let d = r.denom().bits() as i64;
    let sign = if r.is_negative() { -1.0 } else { 1.0 };
    if n - d > 1100 {
        sign * f64::INFINITY
    } else if d - n > 1100 {
        0.0
    } else {
        // Shift both into range before dividing.
        let shift = (n.max(d) - 60).max(0) as usize;
        let nn = (r.numer().magnitude() >> shift).to_f64().unwrap_or(0.0);
        let dd = (r.denom().magnitude() >> shift)
            .to_f64()
            .unwrap_or(f64::INFINITY);
        sign * nn / dd
    }
}

/// Below this size exact powers of ten are cheap enough to compare against.
const EXACT_DIGITS_BITS: u64 = 4096;

/// `n` against `10^k`, decided in 128-bit directed rounding when possible.
fn cmp_pow10(n: &BigNat, k: u64) -> std::cmp::Ordering {
    use RoundingDirection::{Down, Up};
    if n.bits() > EXACT_DIGITS_BITS {
        if let Ok(k32) = u32::try_from(k) {
            let ten = BigFloat::from_nat(&BigNat::from(10u32), Down);
            let (lo, hi) = (BigFloat::from_nat(n, Down), BigFloat::from_nat(n, Up));
            if lo > ten.pow(k32, Up) {
                return std::cmp::Ordering::Greater;
            }
            if hi < ten.pow(k32, Down) {
                return std::cmp::Ordering::Less;
            }
        }
    }
    n.cmp(&num_traits::pow(BigNat::from(10u32), k as usize))
}

/// Decimal length of a natural number (`0` has one digit).
pub fn decimal_digits(n: &BigNat) -> u64 {
    if n.is_zero() {
        return 1;
    }
    // Largest k with 10^k ≤ n, starting from the bit-length estimate.
    let mut k = (((n.bits() - 1) as f64) * std::f64::consts::LOG10_2).floor() as u64;
    loop {
        if k > 0 && cmp_pow10(n, k) == std::cmp::Ordering::Less {
            k -= 1;
        } else if cmp_pow10(n, k + 1) != std::cmp::Ordering::Less {
            k += 1;
        } else {
            return k + 1;
        }
    }
}

/// Leading `count` decimal digits of `n`.
pub fn leading_digits(n: &BigNat, count: u64) -> String {
    use RoundingDirection::{Down, Up};
    let digits = decimal_digits(n);
    if digits <= count {
        return n.to_string();
    }
    let shift = digits - count;
    if n.bits() > EXACT_DIGITS_BITS {
        if let Ok(s32) = u32::try_from(shift) {
            let ten = BigFloat::from_nat(&BigNat::from(10u32), Down);
            let lo = BigFloat::from_nat(n, Down).div(&ten.pow(s32, Up), Down);
            let hi = BigFloat::from_nat(n, Up).div(&ten.pow(s32, Down), Up);
            let floor = |x: Option<BigFloat>| {
                x.and_then(|x| x.to_rational())
                    .map(|r| r.floor().to_integer())
            };
            if let (Some(a), Some(b)) = (floor(lo), floor(hi)) {
                if a == b {
                    return a.to_string();
                }
            }
        }
    }
    let divisor = num_traits::pow(BigNat::from(10u32), shift as usize);
    (n / divisor).to_string()
}

pub(crate) fn require_positive(r: &Rational, what: &str) -> Result<()> {
    if r.is_positive() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{what} must be positive, got {}",
            format_rational(r)
        )))
    }
}

pub(crate) fn require_nonnegative(r: &Rational, what: &str) -> Result<()> {
    if r.is_negative() {
        Err(Error::domain(format!(
            "{what} must be nonnegative, got {}",
            format_rational(r)
        )))
    } else {
        Ok(())
    }
}

pub(crate) fn nat_to_u64(n: &BigNat) -> Option<u64> {
    n.to_u64()
}

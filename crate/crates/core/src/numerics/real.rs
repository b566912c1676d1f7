use std::cmp::Ordering;
use std::fmt;

use num_traits::{Signed, Zero};

use super::{
    format_rational, rational_bits, rational_to_f64, BigFloat, Rational, RoundingDirection,
};

/// Rationals larger than this many bits are demoted to [`BigFloat`].
pub const EXACT_BITS_LIMIT: u64 = 4096;

/// A nonnegative real that is an exact rational for as long as that stays
/// affordable, then a directed-rounded big float.
#[derive(Clone, PartialEq, Eq)]
pub enum Real {
    Rat(Rational),
    Float(BigFloat),
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Real::Rat(r) => write!(f, "{}", format_rational(r)),
            Real::Float(x) => write!(f, "{}", x),
        }
    }
}

impl From<Rational> for Real {
    fn from(r: Rational) -> Self {
        Real::Rat(r)
    }
}

impl Real {
    pub fn zero() -> Self {
        Real::Rat(Rational::zero())
    }

    /// Keeps an exact result unless it has outgrown the bit limit.
    pub fn settle(r: Rational, dir: RoundingDirection) -> Real {
        if rational_bits(&r) > EXACT_BITS_LIMIT {
            Real::Float(BigFloat::from_rational(&r, dir))
        } else {
            Real::Rat(r)
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Real::Rat(r) => r.is_zero(),
            Real::Float(x) => x.is_zero(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Real::Rat(_))
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        match self {
            Real::Rat(r) => Some(r),
            Real::Float(_) => None,
        }
    }

    /// Exact rational value when one can be written out.
    pub fn to_rational(&self) -> Option<Rational> {
        match self {
            Real::Rat(r) => Some(r.clone()),
            Real::Float(x) => x.to_rational(),
        }
    }

    pub fn to_float(&self, dir: RoundingDirection) -> BigFloat {
        match self {
            Real::Rat(r) => BigFloat::from_rational(r, dir),
            Real::Float(x) => x.clone(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Real::Rat(r) => rational_to_f64(r),
            Real::Float(x) => x.to_f64(),
        }
    }

    pub fn log10(&self) -> f64 {
        match self {
            Real::Rat(r) => {
                if r.is_zero() {
                    f64::NEG_INFINITY
                } else {
                    BigFloat::from_rational(r, RoundingDirection::Down).log10()
                }
            }
            Real::Float(x) => x.log10(),
        }
    }

    pub fn mul_rat(&self, r: &Rational, dir: RoundingDirection) -> Real {
        match self {
            Real::Rat(a) => Real::settle(a * r, dir),
            Real::Float(x) => Real::Float(x.mul_rat(r, dir)),
        }
    }

    pub fn mul(&self, other: &Real, dir: RoundingDirection) -> Real {
        match (self, other) {
            (Real::Rat(a), Real::Rat(b)) => Real::settle(a * b, dir),
            _ => Real::Float(self.to_float(dir).mul(&other.to_float(dir), dir)),
        }
    }

    pub fn add(&self, other: &Real, dir: RoundingDirection) -> Real {
        match (self, other) {
            (Real::Rat(a), Real::Rat(b)) => Real::settle(a + b, dir),
            _ => Real::Float(self.to_float(dir).add(&other.to_float(dir), dir)),
        }
    }

    /// `self − other`, clamped at zero.
    pub fn sub(&self, other: &Real, dir: RoundingDirection) -> Real {
        match (self, other) {
            (Real::Rat(a), Real::Rat(b)) => {
                let d = a - b;
                if d.is_negative() {
                    Real::zero()
                } else {
                    Real::settle(d, dir)
                }
            }
            _ => Real::Float(self.to_float(dir).sub(&other.to_float(dir.flip()), dir)),
        }
    }

    pub fn pow(&self, n: u32, dir: RoundingDirection) -> Real {
        match self {
            Real::Rat(a) => {
                // Decide before materialising a huge power.
                if rational_bits(a).saturating_mul(n as u64) > 2 * EXACT_BITS_LIMIT {
                    Real::Float(BigFloat::from_rational(a, dir).pow(n, dir))
                } else {
                    Real::settle(num_traits::pow(a.clone(), n as usize), dir)
                }
            }
            Real::Float(x) => Real::Float(x.pow(n, dir)),
        }
    }

    /// `self^{a/d}`; exact for `d = 1`.
    pub fn pow_ratio(&self, a: u32, d: u32, dir: RoundingDirection) -> Real {
        if d == 1 {
            return self.pow(a, dir);
        }
        Real::Float(self.to_float(dir).pow_ratio(a, d, dir))
    }

    pub fn min(self, other: Real) -> Real {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Real) -> Real {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Real {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Real::Rat(a), Real::Rat(b)) => a.cmp(b),
            (Real::Float(x), Real::Float(y)) => x.cmp(y),
            (Real::Rat(a), Real::Float(y)) => cmp_rat_float(a, y),
            (Real::Float(x), Real::Rat(b)) => cmp_rat_float(b, x).reverse(),
        }
    }
}

fn cmp_rat_float(a: &Rational, y: &BigFloat) -> Ordering {
    let lo = BigFloat::from_rational(a, RoundingDirection::Down);
    let hi = BigFloat::from_rational(a, RoundingDirection::Up);
    if hi < *y {
        Ordering::Less
    } else if lo > *y {
        Ordering::Greater
    } else if let Some(ry) = y.to_rational() {
        a.cmp(&ry)
    } else {
        lo.cmp(y)
    }
}

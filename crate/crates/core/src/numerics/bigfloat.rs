use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{ceil_root, floor_root, Rational, RoundingDirection};

/// Mantissa width kept after every rounded operation.
pub const PRECISION: u64 = 128;

/// Largest binary exponent (in absolute value) that [`BigFloat::to_rational`]
/// will materialise.
const MATERIALIZE_LIMIT: u64 = 1 << 22;

/// A nonnegative binary float `mantissa · 2^exponent` with an unbounded
/// exponent.
///
/// Values are canonical: the mantissa is odd (or the value is zero with
/// exponent zero), so structural equality is numeric equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BigFloat {
    mantissa: BigUint,
    exponent: BigInt,
}

impl fmt::Debug for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*2^{}", self.mantissa, self.exponent)
    }
}

fn round_parts(mut mantissa: BigUint, mut exponent: BigInt, dir: RoundingDirection) -> BigFloat {
    if mantissa.is_zero() {
        return BigFloat::zero();
    }
    let bits = mantissa.bits();
    if bits > PRECISION {
        let shift = bits - PRECISION;
        let truncated = &mantissa >> shift as usize;
        let lost = truncated.clone() << shift as usize != mantissa;
        mantissa = truncated;
        if lost && dir == RoundingDirection::Up {
            mantissa += 1u32;
        }
        exponent += shift;
    }
    let tz = mantissa.trailing_zeros().unwrap_or(0);
    if tz > 0 {
        mantissa >>= tz as usize;
        exponent += tz;
    }
    BigFloat { mantissa, exponent }
}

/// `n/d` rounded, returned as (mantissa, exponent) before final rounding.
fn ratio(n: &BigUint, d: &BigUint, dir: RoundingDirection) -> BigFloat {
    if n.is_zero() {
        return BigFloat::zero();
    }
    let k = PRECISION as i64 + 2 + d.bits() as i64 - n.bits() as i64;
    let (num, den) = if k >= 0 {
        (n << k as usize, d.clone())
    } else {
        (n.clone(), d << (-k) as usize)
    };
    let (mut q, r) = num.div_rem(&den);
    if dir == RoundingDirection::Up && !r.is_zero() {
        q += 1u32;
    }
    round_parts(q, BigInt::from(-k), dir)
}

impl BigFloat {
    pub fn zero() -> Self {
        BigFloat {
            mantissa: BigUint::zero(),
            exponent: BigInt::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn mantissa(&self) -> &BigUint {
        &self.mantissa
    }

    pub fn exponent(&self) -> &BigInt {
        &self.exponent
    }

    pub fn from_parts(mantissa: BigUint, exponent: BigInt, dir: RoundingDirection) -> Self {
        round_parts(mantissa, exponent, dir)
    }

    pub fn from_nat(n: &BigUint, dir: RoundingDirection) -> Self {
        round_parts(n.clone(), BigInt::zero(), dir)
    }

    /// Rounds a nonnegative rational. Negative input is clamped to zero.
    pub fn from_rational(r: &Rational, dir: RoundingDirection) -> Self {
        if !r.is_positive() {
            return BigFloat::zero();
        }
        ratio(r.numer().magnitude(), r.denom().magnitude(), dir)
    }

    /// Exact value of a finite nonnegative double.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() || x < 0.0 {
            return None;
        }
        let r = Rational::from_float(x)?;
        Some(BigFloat::from_rational(&r, RoundingDirection::Down))
    }

    /// `⌊log2⌋ + 1` of the value, i.e. the position just above the top bit.
    pub fn top(&self) -> BigInt {
        &self.exponent + BigInt::from(self.mantissa.bits())
    }

    /// Exact rational value, if the exponent is small enough to write out.
    pub fn to_rational(&self) -> Option<Rational> {
        if self.is_zero() {
            return Some(Rational::zero());
        }
        let e = self.exponent.to_i64()?;
        if e.unsigned_abs() > MATERIALIZE_LIMIT {
            return None;
        }
        let m = BigInt::from(self.mantissa.clone());
        Some(if e >= 0 {
            Rational::from_integer(m << e as usize)
        } else {
            Rational::new(m, BigInt::one() << (-e) as usize)
        })
    }

    /// Nearest double; underflows to zero and overflows to infinity.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let top = match self.top().to_i64() {
            Some(t) => t,
            None => {
                return if self.exponent.is_negative() {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        };
        if top < -1100 {
            return 0.0;
        }
        if top > 1100 {
            return f64::INFINITY;
        }
        let bits = self.mantissa.bits();
        let shift = bits.saturating_sub(60);
        let m = (&self.mantissa >> shift as usize).to_f64().unwrap_or(0.0);
        let e = self.exponent.to_i64().unwrap_or(0) + shift as i64;
        m * 2f64.powi(e.clamp(-2000, 2000) as i32)
    }

    /// Approximate base-10 logarithm, usable for any exponent size.
    pub fn log10(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let bits = self.mantissa.bits();
        let shift = bits.saturating_sub(60);
        let m = (&self.mantissa >> shift as usize).to_f64().unwrap_or(1.0);
        let e = self.exponent.to_f64().unwrap_or(0.0) + shift as f64;
        m.log10() + e * std::f64::consts::LOG10_2
    }

    pub fn mul(&self, other: &BigFloat, dir: RoundingDirection) -> BigFloat {
        if self.is_zero() || other.is_zero() {
            return BigFloat::zero();
        }
        round_parts(
            &self.mantissa * &other.mantissa,
            &self.exponent + &other.exponent,
            dir,
        )
    }

    pub fn div(&self, other: &BigFloat, dir: RoundingDirection) -> Option<BigFloat> {
        if other.is_zero() {
            return None;
        }
        let mut q = ratio(&self.mantissa, &other.mantissa, dir);
        if !q.is_zero() {
            q.exponent += &self.exponent - &other.exponent;
        }
        Some(q)
    }

    /// Product with a nonnegative rational.
    pub fn mul_rat(&self, r: &Rational, dir: RoundingDirection) -> BigFloat {
        if self.is_zero() || !r.is_positive() {
            return BigFloat::zero();
        }
        let mut q = ratio(
            &(&self.mantissa * r.numer().magnitude()),
            r.denom().magnitude(),
            dir,
        );
        if !q.is_zero() {
            q.exponent += &self.exponent;
        }
        q
    }

    /// Mantissa widened to exactly `width` bits, with the matching exponent.
    fn widened(&self, width: u64) -> (BigUint, BigInt) {
        let bits = self.mantissa.bits();
        if bits >= width {
            return (self.mantissa.clone(), self.exponent.clone());
        }
        let s = width - bits;
        (
            &self.mantissa << s as usize,
            &self.exponent - BigInt::from(s),
        )
    }

    pub fn add(&self, other: &BigFloat, dir: RoundingDirection) -> BigFloat {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let (hi, lo) = if self >= other {
            (self, other)
        } else {
            (other, self)
        };
        let gap = hi.top() - lo.top();
        if gap > BigInt::from(PRECISION + 8) {
            return match dir {
                RoundingDirection::Down => hi.clone(),
                RoundingDirection::Up => {
                    let (m, e) = hi.widened(PRECISION + 4);
                    round_parts(m + 1u32, e, dir)
                }
            };
        }
        let (mh, eh) = (&hi.mantissa, &hi.exponent);
        let (ml, el) = (&lo.mantissa, &lo.exponent);
        if eh >= el {
            let s = (eh - el).to_usize().expect("aligned shift fits");
            round_parts((mh << s) + ml, el.clone(), dir)
        } else {
            let s = (el - eh).to_usize().expect("aligned shift fits");
            round_parts(mh + (ml << s), eh.clone(), dir)
        }
    }

    /// `self − other`, clamped at zero when `other > self`.
    pub fn sub(&self, other: &BigFloat, dir: RoundingDirection) -> BigFloat {
        if other.is_zero() {
            return self.clone();
        }
        if self <= other {
            return BigFloat::zero();
        }
        let gap = self.top() - other.top();
        if gap > BigInt::from(PRECISION + 8) {
            return match dir {
                RoundingDirection::Up => self.clone(),
                RoundingDirection::Down => {
                    let (m, e) = self.widened(PRECISION + 4);
                    round_parts(m - 1u32, e, dir)
                }
            };
        }
        let (ma, ea) = (&self.mantissa, &self.exponent);
        let (mb, eb) = (&other.mantissa, &other.exponent);
        if ea >= eb {
            let s = (ea - eb).to_usize().expect("aligned shift fits");
            round_parts((ma << s) - mb, eb.clone(), dir)
        } else {
            let s = (eb - ea).to_usize().expect("aligned shift fits");
            round_parts(ma - (mb << s), ea.clone(), dir)
        }
    }

    pub fn pow(&self, n: u32, dir: RoundingDirection) -> BigFloat {
        if n == 0 {
            return BigFloat::from_nat(&BigUint::one(), dir);
        }
        let mut base = self.clone();
        let mut acc: Option<BigFloat> = None;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul(&base, dir),
                });
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base, dir);
            }
        }
        acc.expect("n > 0")
    }

    /// `self^{1/n}`.
    pub fn root(&self, n: u32, dir: RoundingDirection) -> BigFloat {
        if self.is_zero() || n == 1 {
            return self.clone();
        }
        let nn = BigInt::from(n);
        let want = n as u64 * (PRECISION + 2);
        let s0 = want.saturating_sub(self.mantissa.bits());
        let r = (&self.exponent - BigInt::from(s0)).mod_floor(&nn);
        let s = BigInt::from(s0) + r;
        let shifted = &self.mantissa << s.to_usize().expect("root shift fits");
        let root = match dir {
            RoundingDirection::Down => floor_root(&shifted, n),
            RoundingDirection::Up => ceil_root(&shifted, n),
        };
        let e = (&self.exponent - s) / nn;
        round_parts(root, e, dir)
    }

    /// `self^{a/d}`.
    pub fn pow_ratio(&self, a: u32, d: u32, dir: RoundingDirection) -> BigFloat {
        self.pow(a, dir).root(d, dir)
    }
}

impl PartialOrd for BigFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BigFloat {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
        let by_top = self.top().cmp(&other.top());
        if by_top != Ordering::Equal {
            return by_top;
        }
        // Same top bit, so the exponent gap is below the mantissa widths.
        if self.exponent >= other.exponent {
            let s = (&self.exponent - &other.exponent)
                .to_usize()
                .expect("small gap");
            (&self.mantissa << s).cmp(&other.mantissa)
        } else {
            let s = (&other.exponent - &self.exponent)
                .to_usize()
                .expect("small gap");
            self.mantissa.cmp(&(&other.mantissa << s))
        }
    }
}

impl From<BigInt> for BigFloat {
    fn from(n: BigInt) -> Self {
        match n.sign() {
            Sign::Minus | Sign::NoSign => BigFloat::zero(),
            Sign::Plus => BigFloat::from_nat(n.magnitude(), RoundingDirection::Down),
        }
    }
}

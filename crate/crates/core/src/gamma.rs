//! Bruck's nonlinearity functions `γ₂`, `γₙ` and the diagonal `γ`.
//!
//! All values are `Down`-rounded lower bounds of the exact functions. They
//! decay doubly exponentially in `n`, so past a few levels only a
//! [`Real::Float`] can hold them.

use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::moduli::Modulus;
use crate::numerics::{
    ceil_rat_pow, format_rational, rat, rat_int, require_positive, BigNat, Rational, Real,
    RoundingDirection,
};

/// Deepest `γₙ` the ladder will build before giving up on an exact `γ`.
pub const DEFAULT_MAX_DEPTH: usize = 2048;

const DOWN: RoundingDirection = RoundingDirection::Down;

#[derive(Debug, Clone)]
pub struct GammaContext {
    b: Rational,
    modulus: Modulus,
    c: Rational,
    q: Rational,
    /// `q/(q−1)` in lowest terms.
    exponent: (u32, u32),
    max_depth: usize,
}

/// Outcome of asking for `γ(t)` under a depth limit.
#[derive(Debug, Clone, PartialEq)]
pub enum GammaBound {
    /// The implemented `γ(t)` itself.
    Exact(Real),
    /// Only an upper bound `γ_k(t/3) ≥ γ(t)` for the deepest level reached.
    AtMost {
        upper: Real,
        level: usize,
        p: BigNat,
    },
}

impl GammaBound {
    pub fn value(&self) -> &Real {
        match self {
            GammaBound::Exact(v) => v,
            GammaBound::AtMost { upper, .. } => upper,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, GammaBound::Exact(_))
    }
}

impl GammaContext {
    pub fn new(b: Rational, modulus: Modulus, c: Rational, q: Rational) -> Result<Self> {
        require_positive(&b, "diameter bound b")?;
        require_positive(&c, "B-convexity constant c")?;
        if q <= Rational::one() {
            return Err(Error::invalid(format!(
                "B-convexity exponent q must exceed 1, got {}",
                format_rational(&q)
            )));
        }
        let ratio = &q / (&q - rat_int(1));
        let a = ratio.numer().to_u32();
        let d = ratio.denom().to_u32();
        let exponent = match (a, d) {
            (Some(a), Some(d)) => (a, d),
            _ => {
                return Err(Error::invalid(format!(
                    "q = {} gives an exponent out of range",
                    format_rational(&q)
                )))
            }
        };
        Ok(GammaContext {
            b,
            modulus,
            c,
            q,
            exponent,
            max_depth: DEFAULT_MAX_DEPTH,
        })
    }

    pub fn with_max_depth(mut self, depth: usize) -> Self {
        self.max_depth = depth.max(2);
        self
    }

    pub fn b(&self) -> &Rational {
        &self.b
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn c(&self) -> &Rational {
        &self.c
    }

    pub fn q(&self) -> &Rational {
        &self.q
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// `γ₂(t) = min{t, (b/2)·η(4t/b)}` on exact rationals.
    pub fn gamma2(&self, t: &Rational) -> Result<Rational> {
        if t.is_negative() {
            return Err(Error::domain("gamma2 argument must be nonnegative"));
        }
        let eta = self.modulus.eval(&(t * rat_int(4) / &self.b), DOWN)?;
        Ok(t.clone().min(eta * &self.b / rat_int(2)))
    }

    pub fn gamma2_real(&self, t: &Real) -> Result<Real> {
        if t.is_zero() {
            return Ok(Real::zero());
        }
        let arg = t.mul_rat(&(rat_int(4) / &self.b), DOWN);
        let eta = self.modulus.eval_real(&arg, DOWN)?;
        let scaled = eta.mul_rat(&(&self.b / rat_int(2)), DOWN);
        Ok(t.clone().min(scaled))
    }

    /// `γₙ(t)`, built level by level on the dyadic arguments `t/2^j`.
    pub fn gamma_n(&self, n: usize, t: &Rational) -> Result<Real> {
        if n < 2 {
            return Err(Error::domain(format!("gamma_n needs n ≥ 2, got {n}")));
        }
        if t.is_negative() {
            return Err(Error::domain("gamma_n argument must be nonnegative"));
        }
        if n > self.max_depth {
            return Err(Error::resource(format!(
                "gamma_n depth {n} exceeds the limit {}",
                self.max_depth
            )));
        }
        let mut ladder = GammaLadder::new(self, Real::from(t.clone()))?;
        while ladder.level() < n {
            ladder.step()?;
        }
        Ok(ladder.value().clone())
    }

    /// `p(t) = max{2, ⌈(6bc/(√2 t))^{q/(q−1)}⌉}`, computed as the exact
    /// ceiling of `(18 b² c² / t²)^{q/(2(q−1))}`.
    pub fn p_of_t(&self, t: &Rational) -> Result<BigNat> {
        if !t.is_positive() {
            return Err(Error::domain("p(t) needs t > 0"));
        }
        let base = rat_int(18) * &self.b * &self.b * &self.c * &self.c / (t * t);
        let (a, d) = self.exponent;
        let p = ceil_rat_pow(&base, a, 2 * d)?;
        Ok(p.max(BigNat::from(2u32)))
    }

    /// `γ(t) = γ_{p(t)}(t/3)`, or a resource error past the depth limit.
    pub fn gamma_diag(&self, t: &Rational) -> Result<Real> {
        match self.gamma_diag_bound(t, |_| false)? {
            GammaBound::Exact(v) => Ok(v),
            GammaBound::AtMost { p, .. } => Err(Error::resource(format!(
                "γ({}) needs depth p = {p}, above the limit {}",
                format_rational(t),
                self.max_depth
            ))),
        }
    }

    /// Climbs the ladder `γ_k(t/3) ≥ γ(t)` until `k = p(t)`, until
    /// `enough` accepts the current upper bound, or until the depth limit.
    pub fn gamma_diag_bound(
        &self,
        t: &Rational,
        mut enough: impl FnMut(&Real) -> bool,
    ) -> Result<GammaBound> {
        if t.is_negative() {
            return Err(Error::domain("gamma argument must be nonnegative"));
        }
        if t.is_zero() {
            return Ok(GammaBound::Exact(Real::zero()));
        }
        let p = self.p_of_t(t)?;
        let target = p.to_usize().filter(|&n| n <= self.max_depth);
        let mut ladder = GammaLadder::new(self, Real::from(t / rat_int(3)))?;
        loop {
            if Some(ladder.level()) == target {
                return Ok(GammaBound::Exact(ladder.value().clone()));
            }
            if enough(ladder.value()) || ladder.level() >= self.max_depth {
                return Ok(GammaBound::AtMost {
                    upper: ladder.value().clone(),
                    level: ladder.level(),
                    p,
                });
            }
            ladder.step()?;
        }
    }

    /// Least `p` with `2c·p^{(1−q)/q} ≤ ε`.
    pub fn min_p_for_approx(&self, eps: &Rational) -> Result<BigNat> {
        require_positive(eps, "ε")?;
        let (a, d) = self.exponent;
        let p = ceil_rat_pow(&(rat_int(2) * &self.c / eps), a, d)?;
        Ok(p.max(BigNat::one()))
    }
}

/// The values `γ_{k−j}(t/2^j)`, `0 ≤ j ≤ k−2`, for a growing level `k`.
///
/// Raising the level costs one `γ₂` per stored entry; `value()` is `γ_k(t)`.
#[derive(Debug, Clone)]
pub struct GammaLadder<'a> {
    ctx: &'a GammaContext,
    t: Real,
    diag: Vec<Real>,
}

impl<'a> GammaLadder<'a> {
    pub fn new(ctx: &'a GammaContext, t: Real) -> Result<Self> {
        let first = ctx.gamma2_real(&t)?;
        Ok(GammaLadder {
            ctx,
            t,
            diag: vec![first],
        })
    }

    pub fn level(&self) -> usize {
        self.diag.len() + 1
    }

    pub fn value(&self) -> &Real {
        &self.diag[0]
    }

    pub fn step(&mut self) -> Result<()> {
        let k = self.level();
        let shift = Rational::new(1.into(), num_bigint::BigInt::one() << (k - 1));
        let tail = self.ctx.gamma2_real(&self.t.mul_rat(&shift, DOWN))?;
        self.diag.push(tail);
        for j in (0..k - 1).rev() {
            let inner = self.diag[j + 1].mul_rat(&rat(1, 3), DOWN);
            let candidate = self.ctx.gamma2_real(&inner)?;
            if candidate < self.diag[j] {
                self.diag[j] = candidate;
            }
        }
        Ok(())
    }
}

/// Direct recursion without sharing; exponential in `n`.
pub fn gamma_n_uncached(ctx: &GammaContext, n: usize, t: &Real) -> Result<Real> {
    if n < 2 {
        return Err(Error::domain("gamma_n needs n ≥ 2"));
    }
    if n == 2 {
        return ctx.gamma2_real(t);
    }
    let same = gamma_n_uncached(ctx, n - 1, t)?;
    let half = gamma_n_uncached(ctx, n - 1, &t.mul_rat(&rat(1, 2), DOWN))?;
    let other = ctx.gamma2_real(&half.mul_rat(&rat(1, 3), DOWN))?;
    Ok(same.min(other))
}

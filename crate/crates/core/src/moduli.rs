//! Moduli of uniform convexity.
//!
//! A modulus `η` satisfies `‖(x+y)/2‖ ≤ 1 − η(ε)` whenever `‖x‖, ‖y‖ ≤ 1` and
//! `‖x − y‖ ≥ ε`. Consumers always ask for a `Down`-rounded value, which is
//! again a modulus.

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::dynamics::Space;
use crate::error::{Error, Result};
use crate::numerics::{
    format_rational, parse_rational, rat, rat_int, rational_to_f64, require_nonnegative,
    sqrt2_recip_lower, sqrt2_recip_upper, BigFloat, Rational, Real, RoundingDirection,
};

/// Tolerance of the sampled inequality check.
pub const UC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Modulus {
    /// Closed form for `ℓ^p`.
    LpClosedForm { p: Rational },
    /// Piecewise linear through the origin and the grid points.
    PiecewiseConvex { grid: Vec<(Rational, Rational)> },
    /// Modulus of the product space `X × X` built from that of `X`.
    ProductLift(Box<Modulus>),
}

/// Serialized modulus descriptor, as found in scenario files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModulusSpec {
    Lp { p: String },
    Piecewise { grid: Vec<(String, String)> },
    Product { inner: Box<ModulusSpec> },
}

fn small_exponent(r: &Rational) -> Result<(u32, u32)> {
    let a = r.numer().to_u32();
    let d = r.denom().to_u32();
    match (a, d) {
        (Some(a), Some(d)) if a > 0 => Ok((a, d)),
        _ => Err(Error::invalid(format!(
            "exponent {} out of supported range",
            format_rational(r)
        ))),
    }
}

impl Modulus {
    pub fn lp(p: Rational) -> Result<Self> {
        if p <= Rational::one() {
            return Err(Error::invalid(format!(
                "L^p modulus needs p > 1, got {}",
                format_rational(&p)
            )));
        }
        small_exponent(&p)?;
        Ok(Modulus::LpClosedForm { p })
    }

    pub fn piecewise(grid: Vec<(Rational, Rational)>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::invalid(
                "piecewise modulus needs at least one grid point",
            ));
        }
        for (i, (e, v)) in grid.iter().enumerate() {
            if !e.is_positive() {
                return Err(Error::invalid("piecewise grid points must be positive"));
            }
            if v.is_negative() {
                return Err(Error::invalid("piecewise values must be nonnegative"));
            }
            if i > 0 {
                let (pe, pv) = &grid[i - 1];
                if e <= pe {
                    return Err(Error::invalid("piecewise grid must strictly increase"));
                }
                if v < pv {
                    return Err(Error::invalid("piecewise values must not decrease"));
                }
                // v/e ≥ pv/pe, cross-multiplied.
                if v * pe < pv * e {
                    return Err(Error::invalid(
                        "piecewise values violate value/ε monotonicity",
                    ));
                }
            }
        }
        Ok(Modulus::PiecewiseConvex { grid })
    }

    pub fn product(inner: Modulus) -> Self {
        Modulus::ProductLift(Box::new(inner))
    }

    pub fn from_spec(spec: &ModulusSpec) -> Result<Self> {
        match spec {
            ModulusSpec::Lp { p } => Modulus::lp(parse_rational(p)?),
            ModulusSpec::Piecewise { grid } => {
                let grid = grid
                    .iter()
                    .map(|(e, v)| Ok((parse_rational(e)?, parse_rational(v)?)))
                    .collect::<Result<Vec<_>>>()?;
                Modulus::piecewise(grid)
            }
            ModulusSpec::Product { inner } => Ok(Modulus::product(Modulus::from_spec(inner)?)),
        }
    }

    pub fn to_spec(&self) -> ModulusSpec {
        match self {
            Modulus::LpClosedForm { p } => ModulusSpec::Lp {
                p: format_rational(p),
            },
            Modulus::PiecewiseConvex { grid } => ModulusSpec::Piecewise {
                grid: grid
                    .iter()
                    .map(|(e, v)| (format_rational(e), format_rational(v)))
                    .collect(),
            },
            Modulus::ProductLift(inner) => ModulusSpec::Product {
                inner: Box::new(inner.to_spec()),
            },
        }
    }

    /// Parses the short command-line form `lp:P`.
    pub fn parse_short(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("lp", p)) => Modulus::lp(parse_rational(p)?),
            _ => Err(Error::invalid(format!(
                "unknown modulus {s:?}, expected lp:P"
            ))),
        }
    }

    /// `η(ε)` as a rational, rounded in `dir`.
    pub fn eval(&self, eps: &Rational, dir: RoundingDirection) -> Result<Rational> {
        require_nonnegative(eps, "modulus argument")?;
        let v = self.eval_real(&Real::from(eps.clone()), dir)?;
        v.to_rational().ok_or_else(|| {
            Error::resource(format!(
                "modulus value at {} is not representable",
                format_rational(eps)
            ))
        })
    }

    /// `η(ε)` on the extended scalars, rounded in `dir`.
    pub fn eval_real(&self, eps: &Real, dir: RoundingDirection) -> Result<Real> {
        if eps.is_zero() {
            return Ok(Real::zero());
        }
        match self {
            Modulus::LpClosedForm { p } => {
                let (a, d) = small_exponent(p)?;
                if p < &rat_int(2) {
                    let k = (p - rat_int(1)) / rat_int(8);
                    Ok(eps.pow(2, dir).mul_rat(&k, dir))
                } else if d == 1 {
                    let scale = Rational::new(1.into(), num_bigint::BigInt::from(a) << a as usize);
                    Ok(eps.pow(a, dir).mul_rat(&scale, dir))
                } else {
                    // ε^p / (p · 2^p) with 2^p irrational.
                    let num = eps.to_float(dir).pow_ratio(a, d, dir);
                    let two_p = BigFloat::from_nat(&2u32.into(), dir).pow_ratio(a, d, dir.flip());
                    let den = two_p.mul_rat(p, dir.flip());
                    Ok(Real::Float(num.div(&den, dir).expect("nonzero")))
                }
            }
            Modulus::PiecewiseConvex { grid } => Ok(eval_piecewise(grid, eps, dir)),
            Modulus::ProductLift(inner) => {
                let s = match dir {
                    RoundingDirection::Down => sqrt2_recip_lower(),
                    RoundingDirection::Up => sqrt2_recip_upper(),
                };
                let arg = eps.mul_rat(s, dir);
                let inner_v = inner.eval_real(&arg, dir)?;
                let x = arg.mul(&inner_v, dir).mul_rat(&rat(1, 8), dir);
                Ok(x.pow(2, dir).mul_rat(&rat(1, 8), dir))
            }
        }
    }

    pub fn eval_f64(&self, eps: f64) -> Result<f64> {
        let e = crate::numerics::rational_from_f64(eps)?;
        Ok(rational_to_f64(&self.eval(&e, RoundingDirection::Down)?))
    }

    /// The `p` the modulus was built for, if it is a closed form.
    pub fn lp_exponent(&self) -> Option<&Rational> {
        match self {
            Modulus::LpClosedForm { p } => Some(p),
            _ => None,
        }
    }
}

fn eval_piecewise(grid: &[(Rational, Rational)], eps: &Real, dir: RoundingDirection) -> Real {
    let (e0, v0) = &grid[0];
    let cell = grid
        .iter()
        .rposition(|(e, _)| Real::from(e.clone()) <= *eps);
    let (base_e, base_v, slope) = match cell {
        None => return eps.mul_rat(&(v0 / e0), dir),
        Some(i) if i + 1 < grid.len() => {
            let (ea, va) = &grid[i];
            let (eb, vb) = &grid[i + 1];
            (ea, va, (vb - va) / (eb - ea))
        }
        Some(i) => {
            let (ea, va) = &grid[i];
            let slope = if i == 0 {
                v0 / e0
            } else {
                let (ep, vp) = &grid[i - 1];
                (va - vp) / (ea - ep)
            };
            (ea, va, slope)
        }
    };
    let offset = eps.sub(&Real::from(base_e.clone()), dir);
    offset
        .mul_rat(&slope, dir)
        .add(&Real::from(base_v.clone()), dir)
}

/// `η(ε) = ½∫₀^ε η₁`, bounded below by left Riemann sums on the sample grid.
///
/// When the grid starts above zero the first cell contributes nothing; a
/// sample at zero is used as the value on the first cell.
pub fn convexify(samples: &[(Rational, Rational)]) -> Result<Modulus> {
    if samples.len() < 2 {
        return Err(Error::invalid("convexify needs at least two sample points"));
    }
    if samples[0].0.is_negative() {
        return Err(Error::invalid("sample grid must be nonnegative"));
    }
    if samples.last().expect("nonempty").0 < rat_int(2) {
        return Err(Error::invalid("sample grid must reach 2"));
    }
    for w in samples.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::invalid("sample grid must strictly increase"));
        }
        if w[1].1 < w[0].1 {
            return Err(Error::invalid("samples must be nondecreasing"));
        }
    }
    if samples[0].1.is_negative() {
        return Err(Error::invalid("samples must be nonnegative"));
    }
    let half = rat(1, 2);
    let mut sum = Rational::zero();
    let mut grid = Vec::with_capacity(samples.len());
    for (k, (e, _)) in samples.iter().enumerate() {
        if k > 0 {
            let (pe, pv) = &samples[k - 1];
            sum += pv * (e - pe);
        }
        if e.is_positive() {
            grid.push((e.clone(), &sum * &half));
        }
    }
    Modulus::piecewise(grid)
}

pub fn product_modulus(inner: Modulus) -> Modulus {
    Modulus::product(inner)
}

/// Checks `‖(x+y)/2‖ ≤ 1 − η(ε)` for one pair in `space`.
///
/// Inputs outside the hypotheses yield `Error::Precondition`, not `false`.
pub fn check_uc_sample(
    space: &Space,
    x: &[f64],
    y: &[f64],
    eps: &Rational,
    m: &Modulus,
) -> Result<bool> {
    space.check_vector(x, "x")?;
    space.check_vector(y, "y")?;
    let nx = space.norm(x);
    let ny = space.norm(y);
    if nx > 1.0 + UC_TOLERANCE || ny > 1.0 + UC_TOLERANCE {
        return Err(Error::Precondition(format!(
            "points must lie in the unit ball, norms {nx} and {ny}"
        )));
    }
    let gap = space.dist(x, y);
    let e = rational_to_f64(eps);
    if gap < e - UC_TOLERANCE {
        return Err(Error::Precondition(format!(
            "‖x − y‖ = {gap} is below ε = {e}"
        )));
    }
    let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
    let eta = rational_to_f64(&m.eval(eps, RoundingDirection::Down)?);
    Ok(space.norm(&mid) <= 1.0 - eta + UC_TOLERANCE)
}

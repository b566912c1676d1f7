//! Base rates `A(ε, g, h)` for the metastability of `α^i_n`.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use super::RateEnv;
use crate::counterfn::{CounterFn, Eval, IterCount};
use crate::error::{Error, Result};
use crate::gamma::{GammaBound, GammaContext};
use crate::numerics::{
    ceil_nonneg, ceil_rat_pow, format_rational, parse_rational, rat_int, require_positive,
    BigFloat, BigNat, Rational, Real, RoundingDirection,
};

/// The first argument of a base rate: a given rational, or `γ(t)` resolved
/// lazily because base rates often do not need it.
#[derive(Debug, Clone)]
pub enum EpsArg<'a> {
    Given(Rational),
    Gamma { ctx: &'a GammaContext, t: Rational },
}

/// What is known about the resolved argument.
#[derive(Debug, Clone, PartialEq)]
pub enum EpsValue {
    Exact(Real),
    /// The argument is positive and at most this value.
    AtMost(Real),
}

impl EpsValue {
    pub fn value(&self) -> &Real {
        match self {
            EpsValue::Exact(v) | EpsValue::AtMost(v) => v,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, EpsValue::Exact(_))
    }
}

impl<'a> EpsArg<'a> {
    /// Resolves the argument. `enough` may accept an upper bound early when
    /// the caller only needs to know the argument is small.
    pub fn resolve(&self, enough: impl FnMut(&Real) -> bool) -> Result<EpsValue> {
        match self {
            EpsArg::Given(e) => Ok(EpsValue::Exact(Real::from(e.clone()))),
            EpsArg::Gamma { ctx, t } => Ok(match ctx.gamma_diag_bound(t, enough)? {
                GammaBound::Exact(v) => EpsValue::Exact(v),
                GammaBound::AtMost { upper, .. } => EpsValue::AtMost(upper),
            }),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            EpsArg::Given(e) => format_rational(e),
            EpsArg::Gamma { t, .. } => format!("gamma({})", format_rational(t)),
        }
    }
}

/// A base rate together with what it recorded while computing.
#[derive(Debug, Clone)]
pub struct BaseOutcome {
    pub value: Eval,
    pub notes: BTreeMap<String, Value>,
}

pub trait BaseRate: Send + Sync {
    /// Name in the `--base` syntax.
    fn name(&self) -> String;
    fn eval(
        &self,
        env: &RateEnv,
        eps: &EpsArg,
        g: &CounterFn,
        h: &CounterFn,
    ) -> Result<BaseOutcome>;
}

/// `⌈num / e^power⌉`, or a lower bound of it when `e` is only bounded above
/// or too small to invert exactly. Results beyond `2^cap_bits` are clipped.
pub fn antitone_count(num: &Rational, e: &EpsValue, power: u32, cap_bits: u64) -> Result<Eval> {
    let v = e.value();
    if v.is_zero() {
        return Err(Error::domain("rate argument must be positive"));
    }
    let cap = || BigNat::one() << cap_bits as usize;
    if let Some(r) = v.to_rational() {
        let denom = num_traits::pow(r, power as usize);
        let q = ceil_nonneg(&(num / denom))?;
        let exact = e.is_exact();
        if q.bits() > cap_bits {
            return Ok(Eval::at_least(cap()));
        }
        return Ok(Eval { value: q, exact });
    }
    // Too small to write out: num / v^power in directed rounding.
    let down = RoundingDirection::Down;
    let denom = v
        .to_float(RoundingDirection::Up)
        .pow(power, RoundingDirection::Up);
    let q = BigFloat::from_rational(num, down)
        .div(&denom, down)
        .expect("positive denominator");
    if q.top() > BigInt::from(cap_bits) {
        return Ok(Eval::at_least(cap()));
    }
    let floor = q
        .to_rational()
        .map(|r| r.floor().to_integer())
        .unwrap_or_default();
    Ok(Eval::at_least(floor.to_biguint().unwrap_or_default()))
}

fn eval_note(e: &Eval) -> Value {
    json!({ "exact": e.exact, "bits": e.value.bits(), "value": if e.value.bits() <= 256 { Some(e.value.to_string()) } else { None } })
}

fn eps_note(e: &EpsValue) -> Value {
    match e {
        EpsValue::Exact(v) => json!({ "exact": true, "value": v.to_string(), "log10": v.log10() }),
        EpsValue::AtMost(v) => {
            json!({ "exact": false, "upper": v.to_string(), "log10": v.log10() })
        }
    }
}

/// Cheapest sufficiency test: once the count passes the iteration cap the
/// exact count no longer changes the outcome.
fn count_cap_bits(env: &RateEnv) -> u64 {
    64 - env.ev.limits().max_iterations.leading_zeros() as u64 + 1
}

/// `f̃^count(0)`. The first step `f(0)` is already known and bounds every
/// later one from below, which matters once the budget runs out.
fn iterate_from_zero(env: &RateEnv, f: &CounterFn, count: Eval, first: Eval) -> Result<Eval> {
    let positive = !count.value.is_zero();
    let it = CounterFn::tilde_iterate(
        f,
        IterCount {
            value: count.value,
            exact: count.exact,
        },
    );
    let value = it.eval_with(&env.ev, &Eval::from_u64(0))?;
    if value.exact || !positive || value.value >= first.value {
        return Ok(value);
    }
    Ok(Eval::at_least(first.value))
}

/// `A₁(ε, g, h) = (g+h)~^{⌈b²/ε²⌉}(0)` on Hilbert space.
#[derive(Debug, Clone)]
pub struct A1;

impl BaseRate for A1 {
    fn name(&self) -> String {
        "a1".into()
    }

    fn eval(
        &self,
        env: &RateEnv,
        eps: &EpsArg,
        g: &CounterFn,
        h: &CounterFn,
    ) -> Result<BaseOutcome> {
        let b = env.ctx.gamma.b().clone();
        let f = CounterFn::add(g, h);
        let mut notes = BTreeMap::new();
        let at_zero = f.eval_with(&env.ev, &Eval::from_u64(0))?;
        notes.insert("f(0)".into(), eval_note(&at_zero));
        if at_zero.exact && at_zero.value.is_zero() {
            // 0 is a fixed point of the tilde map, whatever the count.
            return Ok(BaseOutcome {
                value: Eval::exact(BigNat::zero()),
                notes,
            });
        }
        let bb = &b * &b;
        let cap_bits = count_cap_bits(env);
        let resolved = eps.resolve(|u| {
            antitone_count(&bb, &EpsValue::AtMost(u.clone()), 2, cap_bits)
                .map_or(false, |c| c.value.bits() >= cap_bits)
        })?;
        let count = antitone_count(&bb, &resolved, 2, cap_bits.max(4096))?;
        notes.insert("epsilon".into(), eps_note(&resolved));
        notes.insert("count".into(), eval_note(&count));
        let value = iterate_from_zero(env, &f, count, at_zero)?;
        Ok(BaseOutcome { value, notes })
    }
}

/// A modulus of total boundedness `Γ(ε, g)` for the orbit.
pub trait TotalBoundedness: Send + Sync {
    fn name(&self) -> String;
    /// `Γ(ε, seq)` for an exact `ε`; `seq(l)` is the subsequence index map.
    fn gamma(&self, eps: &Rational, seq: &dyn Fn(u64) -> Result<BigNat>) -> Result<BigNat>;
    /// Lower bound on `Γ(ε/2, ·)` at an argument that may be inexact.
    fn gamma_half_bound(&self, eps: &EpsValue, cap_bits: u64) -> Result<Eval>;
}

/// `⌈√dim · b / ε⌉`, exact through an integer square-root test.
pub fn gamma_tb_finite_dim(dim: u64, b: &Rational, eps: &Rational) -> Result<BigNat> {
    require_positive(eps, "ε")?;
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let r = Rational::from_integer(BigInt::from(dim)) * b * b / (eps * eps);
    ceil_rat_pow(&r, 1, 2)
}

/// Euclidean `ℝ^dim`: `Γ(ε, g) = γ(ε/2)` with `γ(ε) = ⌈√dim·b/ε⌉`.
#[derive(Debug, Clone)]
pub struct FiniteDim {
    pub dim: u64,
    pub b: Rational,
}

impl TotalBoundedness for FiniteDim {
    fn name(&self) -> String {
        format!("finite_dim(dim={})", self.dim)
    }

    fn gamma(&self, eps: &Rational, _seq: &dyn Fn(u64) -> Result<BigNat>) -> Result<BigNat> {
        gamma_tb_finite_dim(self.dim, &self.b, &(eps / rat_int(2)))
    }

    fn gamma_half_bound(&self, eps: &EpsValue, cap_bits: u64) -> Result<Eval> {
        // Γ(ε/2) = ⌈√(16·dim·b²/ε²)⌉.
        let num = rat_int(16) * Rational::from_integer(BigInt::from(self.dim)) * &self.b * &self.b;
        let sq = antitone_count(&num, eps, 2, 2 * cap_bits)?;
        let root = crate::numerics::ceil_root(&sq.value, 2);
        Ok(Eval {
            value: root,
            exact: sq.exact,
        })
    }
}

/// `A₂(ε, g) = g̃^K(0)` with `K = Γ(ε/2, l ↦ g̃^l(0))`, for an exact `ε`.
pub fn rate_a2(gamma: &dyn TotalBoundedness, eps: &Rational, g: &CounterFn) -> Result<BigNat> {
    require_positive(eps, "ε")?;
    let seq = |l: u64| crate::counterfn::tilde_iterate(g, &BigNat::from(l), &BigNat::zero());
    let k = gamma.gamma(&(eps / rat_int(2)), &seq)?;
    crate::counterfn::tilde_iterate(g, &k, &BigNat::zero())
}

#[derive(Clone)]
pub struct A2 {
    pub gamma: Arc<dyn TotalBoundedness>,
}

impl BaseRate for A2 {
    fn name(&self) -> String {
        format!("a2:{}", self.gamma.name())
    }

    fn eval(
        &self,
        env: &RateEnv,
        eps: &EpsArg,
        g: &CounterFn,
        _h: &CounterFn,
    ) -> Result<BaseOutcome> {
        let mut notes = BTreeMap::new();
        let at_zero = g.eval_with(&env.ev, &Eval::from_u64(0))?;
        notes.insert("g(0)".into(), eval_note(&at_zero));
        if at_zero.exact && at_zero.value.is_zero() {
            return Ok(BaseOutcome {
                value: Eval::exact(BigNat::zero()),
                notes,
            });
        }
        let cap_bits = count_cap_bits(env);
        let gamma = self.gamma.clone();
        let resolved = eps.resolve(|u| {
            gamma
                .gamma_half_bound(&EpsValue::AtMost(u.clone()), cap_bits)
                .map_or(false, |k| k.value.bits() >= cap_bits)
        })?;
        let k = self.gamma.gamma_half_bound(&resolved, cap_bits.max(4096))?;
        notes.insert("epsilon".into(), eps_note(&resolved));
        notes.insert("K".into(), eval_note(&k));
        let value = iterate_from_zero(env, g, k, at_zero)?;
        Ok(BaseOutcome { value, notes })
    }
}

/// The constant base rate `K`.
#[derive(Debug, Clone)]
pub struct StubConst(pub BigNat);

impl BaseRate for StubConst {
    fn name(&self) -> String {
        format!("stub:{}", self.0)
    }

    fn eval(
        &self,
        _env: &RateEnv,
        _eps: &EpsArg,
        _g: &CounterFn,
        _h: &CounterFn,
    ) -> Result<BaseOutcome> {
        Ok(BaseOutcome {
            value: Eval::exact(self.0.clone()),
            notes: BTreeMap::new(),
        })
    }
}

/// `A(ε, g, h) = ⌈1/ε⌉`, a structural probe of the argument passed down.
#[derive(Debug, Clone)]
pub struct StubInverse;

impl BaseRate for StubInverse {
    fn name(&self) -> String {
        "stub:inv".into()
    }

    fn eval(
        &self,
        env: &RateEnv,
        eps: &EpsArg,
        _g: &CounterFn,
        _h: &CounterFn,
    ) -> Result<BaseOutcome> {
        let cap_bits = env.ev.limits().max_bits;
        let resolved = eps.resolve(|u| {
            antitone_count(&rat_int(1), &EpsValue::AtMost(u.clone()), 1, cap_bits)
                .map_or(false, |c| c.value.bits() > cap_bits)
        })?;
        let value = antitone_count(&rat_int(1), &resolved, 1, cap_bits)?;
        let mut notes = BTreeMap::new();
        notes.insert("epsilon".into(), eps_note(&resolved));
        Ok(BaseOutcome { value, notes })
    }
}

/// A step function of `ε`: the value at the largest key `≤ ε`.
#[derive(Debug, Clone)]
pub struct UserTable {
    entries: Vec<(Rational, BigNat)>,
}

impl UserTable {
    pub fn new(mut entries: Vec<(Rational, BigNat)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("base table needs at least one entry"));
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::invalid("base table keys must be distinct"));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::invalid("base table values must not increase with ε"));
            }
        }
        if !entries[0].0.is_positive() {
            return Err(Error::invalid("base table keys must be positive"));
        }
        Ok(UserTable { entries })
    }
}

impl BaseRate for UserTable {
    fn name(&self) -> String {
        let parts: Vec<String> = self
            .entries
            .iter()
            .map(|(e, v)| format!("{}={v}", format_rational(e)))
            .collect();
        format!("table:{}", parts.join(","))
    }

    fn eval(
        &self,
        _env: &RateEnv,
        eps: &EpsArg,
        _g: &CounterFn,
        _h: &CounterFn,
    ) -> Result<BaseOutcome> {
        let smallest = Real::from(self.entries[0].0.clone());
        let resolved = eps.resolve(|u| u < &smallest)?;
        let pick = self
            .entries
            .iter()
            .rev()
            .find(|(e, _)| Real::from(e.clone()) <= *resolved.value());
        let (_, v) = pick.ok_or_else(|| Error::Evaluation {
            argument: resolved.value().to_string(),
            reason: "below the smallest key of the base table".into(),
        })?;
        let value = Eval {
            value: v.clone(),
            exact: resolved.is_exact(),
        };
        let mut notes = BTreeMap::new();
        notes.insert("epsilon".into(), eps_note(&resolved));
        Ok(BaseOutcome { value, notes })
    }
}

type BaseFactory = fn(&str, &Rational) -> Result<Arc<dyn BaseRate>>;

/// Base rates by `--base` name: `a1`, `a2:dim=D`, `stub:K`, `stub:inv`,
/// `table:E=V,E=V,…`.
pub struct BaseRegistry {
    entries: Vec<(&'static str, BaseFactory)>,
}

impl Default for BaseRegistry {
    fn default() -> Self {
        let mut r = BaseRegistry {
            entries: Vec::new(),
        };
        r.register("a1", |args, _| {
            if !args.is_empty() {
                return Err(Error::invalid("a1 takes no arguments"));
            }
            Ok(Arc::new(A1))
        });
        r.register("a2", |args, b| {
            let dim = args
                .strip_prefix("dim=")
                .and_then(|d| d.parse::<u64>().ok())
                .filter(|&d| d > 0)
                .ok_or_else(|| Error::invalid(format!("a2 expects dim=D, got {args:?}")))?;
            Ok(Arc::new(A2 {
                gamma: Arc::new(FiniteDim { dim, b: b.clone() }),
            }))
        });
        r.register("stub", |args, _| {
            if args == "inv" {
                return Ok(Arc::new(StubInverse));
            }
            let k: BigNat = args.parse().map_err(|_| {
                Error::invalid(format!("stub expects a natural or inv, got {args:?}"))
            })?;
            Ok(Arc::new(StubConst(k)))
        });
        r.register("table", |args, _| {
            let entries = args
                .split(',')
                .map(|kv| {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| Error::invalid(format!("bad table entry {kv:?}")))?;
                    let v: BigNat = v
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad table value {v:?}")))?;
                    Ok((parse_rational(k)?, v))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Arc::new(UserTable::new(entries)?))
        });
        r
    }
}

impl BaseRegistry {
    pub fn register(&mut self, name: &'static str, factory: BaseFactory) {
        self.entries.retain(|(n, _)| *n != name);
        self.entries.push((name, factory));
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }

    /// Builds a base rate from its `--base` spelling; `b` is the diameter bound.
    pub fn build(&self, spec: &str, b: &Rational) -> Result<Arc<dyn BaseRate>> {
        let (name, args) = spec.split_once(':').unwrap_or((spec, ""));
        let factory = self
            .entries
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, f)| f)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown base rate {name:?}; known: {}",
                    self.names().join(", ")
                ))
            })?;
        factory(args, b)
    }
}

/// `A₁` at an exact `ε` with default limits.
pub fn rate_a1(b: &Rational, eps: &Rational, g: &CounterFn, h: &CounterFn) -> Result<BigNat> {
    require_positive(eps, "ε")?;
    let count = ceil_nonneg(&(b * b / (eps * eps)))?;
    crate::counterfn::tilde_iterate(&CounterFn::add(g, h), &count, &BigNat::zero())
}

/// `g̃^{⌈R/ε⌉}(0)`, the rate for a non-increasing sequence in `[0, R]`.
pub fn rate_nonincreasing(range: &Rational, eps: &Rational, g: &CounterFn) -> Result<BigNat> {
    require_positive(eps, "ε")?;
    if range.is_negative() {
        return Err(Error::domain("range bound must be nonnegative"));
    }
    let count = ceil_nonneg(&(range / eps))?;
    crate::counterfn::tilde_iterate(g, &count, &BigNat::zero())
}

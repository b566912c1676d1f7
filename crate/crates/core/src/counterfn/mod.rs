//! Counterfunctions `ℕ → ℕ` as shared expression trees.
//!
//! Evaluation works on [`Eval`] values, which are either exact or certified
//! lower bounds. A lower bound arises when a configured [`Limits`] cap is hit:
//! values are saturated at `2^max_bits`, iterations stop at the work budget.
//! Every closed primitive is monotone, so lower bounds propagate soundly.

mod dsl;

pub use dsl::parse_counterfn;

use std::cell::{Cell, OnceCell};
use std::fmt;
use std::sync::{Arc, Mutex};

use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::numerics::{format_rational, BigNat, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Limits {
    /// Values wider than this saturate to `2^max_bits`.
    pub max_bits: u64,
    /// Cap on the steps of any single iteration node.
    pub max_iterations: u64,
    /// Total work units (machine words touched) for one evaluation session.
    pub budget: u64,
    /// Largest argument a monotone envelope will scan up to.
    pub envelope_scan: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_bits: 1 << 22,
            max_iterations: 1_000_000_000,
            budget: 50_000_000,
            envelope_scan: 10_000_000,
        }
    }
}

/// Tracks spent work across a whole computation. Not thread-safe by design.
#[derive(Debug)]
pub struct Evaluator {
    limits: Limits,
    spent: Cell<u64>,
    saturation: OnceCell<BigNat>,
    strict: bool,
}

impl Default for Evaluator {
    fn default() -> Self {
        Evaluator::new(Limits::default())
    }
}

impl Evaluator {
    pub fn new(limits: Limits) -> Self {
        Evaluator {
            limits,
            spent: Cell::new(0),
            saturation: OnceCell::new(),
            strict: false,
        }
    }

    /// An evaluator for callers that reject lower bounds: iterations that
    /// cannot finish within the limits fail immediately.
    pub fn strict(limits: Limits) -> Self {
        Evaluator {
            strict: true,
            ..Evaluator::new(limits)
        }
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }

    pub fn spent(&self) -> u64 {
        self.spent.get()
    }

    pub fn exhausted(&self) -> bool {
        self.spent.get() >= self.limits.budget
    }

    fn charge(&self, value: &BigNat) {
        let units = value.bits() / 64 + 1;
        self.spent.set(self.spent.get().saturating_add(units));
    }

    fn saturation(&self) -> &BigNat {
        self.saturation
            .get_or_init(|| BigNat::one() << self.limits.max_bits as usize)
    }

    fn is_saturated(&self, e: &Eval) -> bool {
        !e.exact && e.value.bits() > self.limits.max_bits
    }

    /// Wraps a freshly computed value, saturating oversized ones.
    pub fn settle(&self, value: BigNat, exact: bool) -> Eval {
        if value.bits() > self.limits.max_bits {
            self.charge(self.saturation());
            return self.saturated();
        }
        self.charge(&value);
        Eval { value, exact }
    }

    fn saturated(&self) -> Eval {
        Eval {
            value: self.saturation().clone(),
            exact: false,
        }
    }
}

/// A natural number that is exact or a certified lower bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Eval {
    pub value: BigNat,
    pub exact: bool,
}

impl Eval {
    pub fn exact(value: BigNat) -> Self {
        Eval { value, exact: true }
    }

    pub fn at_least(value: BigNat) -> Self {
        Eval {
            value,
            exact: false,
        }
    }

    pub fn from_u64(n: u64) -> Self {
        Eval::exact(BigNat::from(n))
    }

    /// Exact value, or a resource error naming `what`.
    pub fn into_exact(self, what: &str) -> Result<BigNat> {
        if self.exact {
            Ok(self.value)
        } else {
            Err(Error::resource(format!(
                "{what} exceeds the evaluation limits; only a lower bound of {} bits is known",
                self.value.bits()
            )))
        }
    }
}

/// Iteration count of a [`Node::TildeIterate`]; `exact = false` means the
/// true count is at least `value`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterCount {
    pub value: BigNat,
    pub exact: bool,
}

impl IterCount {
    pub fn exact(value: BigNat) -> Self {
        IterCount { value, exact: true }
    }

    pub fn at_least(value: BigNat) -> Self {
        IterCount {
            value,
            exact: false,
        }
    }
}

#[derive(Debug)]
enum Node {
    Zero,
    Const(BigNat),
    Identity,
    Add(CounterFn, CounterFn),
    Mul(CounterFn, CounterFn),
    Max(CounterFn, CounterFn),
    /// `n ↦ ⌈a·n/d⌉`.
    CeilScale {
        a: BigNat,
        d: BigNat,
    },
    /// `n ↦ outer(inner(n))`.
    Compose {
        outer: CounterFn,
        inner: CounterFn,
    },
    /// `n ↦ f̃^i(n)` with `f̃(n) = n + f(n)`.
    TildeIterate(CounterFn, IterCount),
    /// `n ↦ f^i(max{1, n})`.
    EpsIterate(CounterFn, u64),
    External {
        table: Arc<Vec<BigNat>>,
    },
    /// `n ↦ max_{m ≤ n} f(m)` with a memoized running maximum.
    Envelope {
        f: CounterFn,
        running: Mutex<Vec<BigNat>>,
    },
}

/// A counterfunction. Cloning shares the tree.
#[derive(Debug, Clone)]
pub struct CounterFn {
    node: Arc<Node>,
    monotone: bool,
    /// `f(n) ≥ n` for every `n`.
    inflationary: bool,
}

impl CounterFn {
    fn make(node: Node, monotone: bool, inflationary: bool) -> Self {
        CounterFn {
            node: Arc::new(node),
            monotone,
            inflationary,
        }
    }

    pub fn zero() -> Self {
        CounterFn::make(Node::Zero, true, false)
    }

    pub fn constant(k: impl Into<BigNat>) -> Self {
        CounterFn::make(Node::Const(k.into()), true, false)
    }

    pub fn identity() -> Self {
        CounterFn::make(Node::Identity, true, true)
    }

    pub fn add(f: &CounterFn, g: &CounterFn) -> Self {
        CounterFn::make(
            Node::Add(f.clone(), g.clone()),
            f.monotone && g.monotone,
            f.inflationary || g.inflationary,
        )
    }

    pub fn mul(f: &CounterFn, g: &CounterFn) -> Self {
        CounterFn::make(
            Node::Mul(f.clone(), g.clone()),
            f.monotone && g.monotone,
            false,
        )
    }

    pub fn max(f: &CounterFn, g: &CounterFn) -> Self {
        CounterFn::make(
            Node::Max(f.clone(), g.clone()),
            f.monotone && g.monotone,
            f.inflationary || g.inflationary,
        )
    }

    /// `n ↦ ⌈a·n/d⌉`.
    pub fn ceil_scale(a: impl Into<BigNat>, d: impl Into<BigNat>) -> Result<Self> {
        let (a, d) = (a.into(), d.into());
        if d.is_zero() {
            return Err(Error::domain("scale denominator must be positive"));
        }
        let inflationary = a >= d;
        Ok(CounterFn::make(
            Node::CeilScale { a, d },
            true,
            inflationary,
        ))
    }

    /// `n ↦ ⌈r·n⌉` for a nonnegative rational `r`.
    pub fn scale_by(r: &Rational) -> Result<Self> {
        let a = r
            .numer()
            .to_biguint()
            .ok_or_else(|| Error::domain("scale factor must be nonnegative"))?;
        let d = r.denom().to_biguint().expect("positive denominator");
        CounterFn::ceil_scale(a, d)
    }

    /// `n ↦ outer(inner(n))`.
    pub fn compose(outer: &CounterFn, inner: &CounterFn) -> Self {
        CounterFn::make(
            Node::Compose {
                outer: outer.clone(),
                inner: inner.clone(),
            },
            outer.monotone && inner.monotone,
            outer.inflationary && inner.inflationary,
        )
    }

    pub fn tilde_iterate(f: &CounterFn, count: IterCount) -> Self {
        CounterFn::make(Node::TildeIterate(f.clone(), count), f.monotone, true)
    }

    pub fn eps_iterate(f: &CounterFn, i: u64) -> Self {
        CounterFn::make(
            Node::EpsIterate(f.clone(), i),
            f.monotone,
            i == 0 || f.inflationary,
        )
    }

    /// A tabulated function on `0..table.len()`.
    pub fn external(table: Vec<BigNat>) -> Self {
        let monotone = table.windows(2).all(|w| w[0] <= w[1]);
        let inflationary = table.iter().enumerate().all(|(i, v)| v >= &BigNat::from(i));
        CounterFn::make(
            Node::External {
                table: Arc::new(table),
            },
            monotone,
            inflationary,
        )
    }

    /// `g^M(n) = max_{m ≤ n} g(m)`; a monotone function is returned as is.
    pub fn envelope(f: &CounterFn) -> Self {
        if f.monotone {
            return f.clone();
        }
        CounterFn::make(
            Node::Envelope {
                f: f.clone(),
                running: Mutex::new(Vec::new()),
            },
            true,
            f.inflationary,
        )
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    pub fn is_inflationary(&self) -> bool {
        self.inflationary
    }

    /// True when both handles share one tree.
    pub fn same_tree(&self, other: &CounterFn) -> bool {
        Arc::ptr_eq(&self.node, &other.node)
    }

    pub fn is_zero_fn(&self) -> bool {
        matches!(*self.node, Node::Zero)
    }

    /// Exact value with default limits.
    pub fn eval(&self, n: &BigNat) -> Result<BigNat> {
        let ev = Evaluator::strict(Limits::default());
        self.eval_with(&ev, &Eval::exact(n.clone()))?
            .into_exact("counterfunction value")
    }

    /// Value at a machine argument, saturating at `u64::MAX`.
    pub fn eval_u64(&self, n: u64) -> Result<u64> {
        let ev = Evaluator::default();
        let r = self.eval_with(&ev, &Eval::from_u64(n))?;
        Ok(r.value.to_u64().unwrap_or(u64::MAX))
    }

    pub fn eval_with(&self, ev: &Evaluator, n: &Eval) -> Result<Eval> {
        if !n.exact && !self.monotone {
            return Ok(Eval::at_least(BigNat::zero()));
        }
        match &*self.node {
            Node::Zero => Ok(Eval::exact(BigNat::zero())),
            Node::Const(k) => Ok(Eval::exact(k.clone())),
            Node::Identity => Ok(n.clone()),
            Node::Add(f, g) => {
                let a = f.eval_with(ev, n)?;
                let b = g.eval_with(ev, n)?;
                Ok(ev.settle(a.value + b.value, a.exact && b.exact))
            }
            Node::Mul(f, g) => {
                let a = f.eval_with(ev, n)?;
                let b = g.eval_with(ev, n)?;
                if a.value.is_zero() && a.exact || b.value.is_zero() && b.exact {
                    return Ok(Eval::exact(BigNat::zero()));
                }
                if a.value.bits() + b.value.bits() > ev.limits.max_bits + 1 {
                    return Ok(ev.saturated());
                }
                Ok(ev.settle(a.value * b.value, a.exact && b.exact))
            }
            Node::Max(f, g) => {
                let a = f.eval_with(ev, n)?;
                let b = g.eval_with(ev, n)?;
                let exact = a.exact && b.exact;
                Ok(Eval {
                    value: a.value.max(b.value),
                    exact,
                })
            }
            Node::CeilScale { a, d } => {
                if n.value.bits() + a.bits() > ev.limits.max_bits + d.bits() + 1 {
                    return Ok(ev.saturated());
                }
                let v = num_integer::Integer::div_ceil(&(a * &n.value), d);
                Ok(ev.settle(v, n.exact))
            }
            Node::Compose { outer, inner } => {
                let x = inner.eval_with(ev, n)?;
                outer.eval_with(ev, &x)
            }
            Node::TildeIterate(f, count) => tilde_loop(ev, f, count, n.clone()),
            Node::EpsIterate(f, i) => eps_loop(ev, f, *i, n),
            Node::External { table } => {
                let idx = n
                    .value
                    .to_usize()
                    .filter(|&i| i < table.len())
                    .ok_or_else(|| Error::Evaluation {
                        argument: n.value.to_string(),
                        reason: format!("tabulated function is defined on 0..{} only", table.len()),
                    })?;
                Ok(Eval {
                    value: table[idx].clone(),
                    exact: n.exact,
                })
            }
            Node::Envelope { f, running } => {
                let m = n
                    .value
                    .to_u64()
                    .filter(|&m| m <= ev.limits.envelope_scan)
                    .ok_or_else(|| {
                        Error::resource(format!("monotone envelope would scan up to {}", n.value))
                    })?;
                let mut memo = running.lock().expect("envelope memo poisoned");
                while memo.len() as u64 <= m {
                    let k = memo.len() as u64;
                    let v = f.eval_with(ev, &Eval::from_u64(k))?;
                    if !v.exact {
                        return Err(Error::resource(format!(
                            "envelope term at {k} exceeds the limits"
                        )));
                    }
                    let next = match memo.last() {
                        Some(prev) if prev > &v.value => prev.clone(),
                        _ => v.value,
                    };
                    memo.push(next);
                }
                Ok(Eval {
                    value: memo[m as usize].clone(),
                    exact: n.exact,
                })
            }
        }
    }
}

fn tilde_loop(ev: &Evaluator, f: &CounterFn, count: &IterCount, start: Eval) -> Result<Eval> {
    if ev.strict && count.value > BigNat::from(ev.limits.max_iterations) {
        let fx = f.eval_with(ev, &start)?;
        if start.exact && fx.exact && fx.value.is_zero() {
            return Ok(start);
        }
        return Err(Error::resource(format!(
            "iteration count of {} bits exceeds the limit of {} steps",
            count.value.bits(),
            ev.limits.max_iterations
        )));
    }
    let mut x = start;
    let mut steps = BigNat::zero();
    let mut done: u64 = 0;
    loop {
        if steps >= count.value {
            x.exact &= count.exact;
            if !count.exact && x.exact {
                // More steps remain; only a fixed point keeps the value exact.
                let fx = f.eval_with(ev, &x)?;
                if fx.exact && fx.value.is_zero() {
                    return Ok(x);
                }
                x.exact = false;
            }
            return Ok(x);
        }
        if done >= ev.limits.max_iterations || ev.exhausted() || ev.is_saturated(&x) {
            x.exact = false;
            return Ok(x);
        }
        let fx = f.eval_with(ev, &x)?;
        if fx.value.is_zero() && fx.exact && x.exact {
            return Ok(x);
        }
        let exact = x.exact && fx.exact;
        x = ev.settle(x.value + fx.value, exact);
        steps += 1u32;
        done += 1;
    }
}

fn eps_loop(ev: &Evaluator, f: &CounterFn, i: u64, n: &Eval) -> Result<Eval> {
    if ev.strict && i > ev.limits.max_iterations {
        return Err(Error::resource(format!(
            "{i} iterations exceed the limit of {}",
            ev.limits.max_iterations
        )));
    }
    let mut x = if n.value.is_zero() {
        Eval {
            value: BigNat::one(),
            exact: n.exact,
        }
    } else {
        n.clone()
    };
    let mut prev: Option<BigNat> = None;
    for k in 0..i {
        if k >= ev.limits.max_iterations || ev.exhausted() || ev.is_saturated(&x) {
            let rising = f.inflationary || prev.as_ref().map_or(false, |p| p <= &x.value);
            if f.monotone && rising {
                x.exact = false;
                return Ok(x);
            }
            return Ok(Eval::at_least(BigNat::zero()));
        }
        let next = f.eval_with(ev, &x)?;
        prev = Some(std::mem::replace(&mut x, next).value);
    }
    Ok(x)
}

/// `f̃^i(n)`, exact, with default limits.
pub fn tilde_iterate(f: &CounterFn, i: &BigNat, n: &BigNat) -> Result<BigNat> {
    CounterFn::tilde_iterate(f, IterCount::exact(i.clone())).eval(n)
}

/// `g_ε^{(i)}(n)`, exact, with default limits.
pub fn eps_iterate(g_eps: &CounterFn, i: u64, n: &BigNat) -> Result<BigNat> {
    CounterFn::eps_iterate(g_eps, i).eval(n)
}

pub fn monotone_envelope(f: &CounterFn) -> CounterFn {
    CounterFn::envelope(f)
}

impl fmt::Display for CounterFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.node {
            Node::Zero => write!(f, "zero"),
            Node::Const(k) => write!(f, "const:{k}"),
            Node::Identity => write!(f, "id"),
            Node::Add(a, b) => write!(f, "add({a},{b})"),
            Node::Mul(a, b) => write!(f, "mul({a},{b})"),
            Node::Max(a, b) => write!(f, "max({a},{b})"),
            Node::CeilScale { a, d } => write!(f, "scale:{a}/{d}"),
            Node::Compose { outer, inner } => write!(f, "compose({outer},{inner})"),
            Node::TildeIterate(g, c) => {
                let rel = if c.exact { "" } else { ">=" };
                write!(f, "tilde({g},{rel}{})", c.value)
            }
            Node::EpsIterate(g, i) => write!(f, "epsiter({g},{i})"),
            Node::External { table } => {
                let vals: Vec<String> = table.iter().map(|v| v.to_string()).collect();
                write!(f, "table[{}]", vals.join(","))
            }
            Node::Envelope { f: g, .. } => write!(f, "envelope({g})"),
        }
    }
}

/// Short human label for a rational scale, used in traces.
pub fn describe_scale(r: &Rational) -> String {
    format!("scale:{}", format_rational(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nat(n: u64) -> BigNat {
        BigNat::from(n)
    }

    fn id() -> CounterFn {
        CounterFn::identity()
    }

    fn c(k: u64) -> CounterFn {
        CounterFn::constant(k)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(id().eval(&nat(5)).unwrap(), nat(5));
        assert_eq!(CounterFn::add(&id(), &c(2)).eval(&nat(7)).unwrap(), nat(9));
        assert_eq!(
            CounterFn::ceil_scale(8u32, 1u32)
                .unwrap()
                .eval(&nat(3))
                .unwrap(),
            nat(24)
        );
        assert_eq!(
            CounterFn::ceil_scale(3u32, 2u32)
                .unwrap()
                .eval(&nat(3))
                .unwrap(),
            nat(5)
        );
        assert!(CounterFn::ceil_scale(3u32, 0u32).is_err());
        let sq = CounterFn::mul(&id(), &id());
        assert_eq!(
            CounterFn::compose(&sq, &CounterFn::add(&id(), &c(1)))
                .eval(&nat(4))
                .unwrap(),
            nat(25)
        );
    }

    #[test]
    fn external_domain() {
        let t = CounterFn::external(vec![nat(3), nat(1), nat(2)]);
        assert!(!t.is_monotone());
        assert_eq!(t.eval(&nat(1)).unwrap(), nat(1));
        match t.eval(&nat(3)).unwrap_err() {
            Error::Evaluation { argument, .. } => assert_eq!(argument, "3"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn envelope_examples() {
        let m = CounterFn::add(&id(), &c(1));
        assert!(CounterFn::envelope(&m).same_tree(&m));
        let t = CounterFn::external(vec![nat(3), nat(1), nat(2)]);
        let e = CounterFn::envelope(&t);
        assert!(e.is_monotone());
        let vals: Vec<BigNat> = (0..3).map(|k| e.eval(&nat(k)).unwrap()).collect();
        assert_eq!(vals, vec![nat(3), nat(3), nat(3)]);
        let ee = CounterFn::envelope(&e);
        for k in 0..3 {
            assert_eq!(ee.eval(&nat(k)).unwrap(), e.eval(&nat(k)).unwrap());
        }
        let t2 = CounterFn::external(vec![nat(1), nat(5), nat(2), nat(7), nat(0)]);
        let e2 = CounterFn::envelope(&t2);
        assert_eq!(e2.eval(&nat(4)).unwrap(), nat(7));
        assert_eq!(e2.eval(&nat(2)).unwrap(), nat(5));
    }

    #[test]
    fn envelope_of_large_argument_is_a_resource_error() {
        let t = CounterFn::external(vec![nat(3), nat(1)]);
        let e = CounterFn::envelope(&t);
        let err = e.eval(&nat(100_000_000)).unwrap_err();
        assert!(err.is_resource());
    }

    #[test]
    fn tilde_examples() {
        assert_eq!(tilde_iterate(&id(), &nat(3), &nat(1)).unwrap(), nat(8));
        assert_eq!(tilde_iterate(&c(5), &nat(0), &nat(11)).unwrap(), nat(11));
        assert_eq!(
            tilde_iterate(&CounterFn::zero(), &nat(1_000_000), &nat(42)).unwrap(),
            nat(42)
        );
        let huge = BigNat::one() << 4000usize;
        assert_eq!(
            tilde_iterate(&CounterFn::zero(), &huge, &nat(42)).unwrap(),
            nat(42)
        );
        // id has the fixed point 0.
        assert_eq!(tilde_iterate(&id(), &huge, &nat(0)).unwrap(), nat(0));
    }

    #[test]
    fn tilde_beyond_limits_is_a_lower_bound() {
        let huge = BigNat::one() << 100usize;
        let err = tilde_iterate(&c(1), &huge, &nat(0)).unwrap_err();
        assert!(err.is_resource());
        let ev = Evaluator::new(Limits {
            max_iterations: 1000,
            ..Limits::default()
        });
        let f = CounterFn::tilde_iterate(&c(1), IterCount::exact(huge));
        let r = f.eval_with(&ev, &Eval::from_u64(0)).unwrap();
        assert_eq!(r, Eval::at_least(nat(1000)));
    }

    #[test]
    fn saturation_is_a_lower_bound() {
        let ev = Evaluator::new(Limits {
            max_bits: 64,
            ..Limits::default()
        });
        let f = CounterFn::tilde_iterate(&id(), IterCount::exact(nat(200)));
        let r = f.eval_with(&ev, &Eval::from_u64(1)).unwrap();
        assert!(!r.exact);
        assert_eq!(r.value, BigNat::one() << 64usize);
    }

    #[test]
    fn eps_examples() {
        let sixteen = CounterFn::ceil_scale(16u32, 1u32).unwrap();
        assert_eq!(eps_iterate(&sixteen, 0, &nat(0)).unwrap(), nat(1));
        assert_eq!(eps_iterate(&c(9), 0, &nat(0)).unwrap(), nat(1));
        assert_eq!(eps_iterate(&sixteen, 2, &nat(1)).unwrap(), nat(256));
        assert_eq!(eps_iterate(&sixteen, 5, &nat(0)).unwrap(), nat(1_048_576));
        assert_eq!(eps_iterate(&sixteen, 1, &nat(3)).unwrap(), nat(48));
    }

    #[test]
    fn eps_iterate_budget_stop() {
        let ev = Evaluator::new(Limits {
            max_iterations: 3,
            ..Limits::default()
        });
        let f = CounterFn::eps_iterate(&CounterFn::ceil_scale(2u32, 1u32).unwrap(), 10);
        let r = f.eval_with(&ev, &Eval::from_u64(1)).unwrap();
        assert_eq!(r, Eval::at_least(nat(8)));
        // A non-monotone step function gives no usable prefix.
        let t = CounterFn::external((0..20).map(|k| nat(19 - k)).collect());
        let r = CounterFn::eps_iterate(&t, 10)
            .eval_with(&ev, &Eval::from_u64(1))
            .unwrap();
        assert_eq!(r, Eval::at_least(nat(0)));
    }

    #[test]
    fn inexact_argument_to_non_monotone_function() {
        let ev = Evaluator::default();
        let t = CounterFn::external(vec![nat(3), nat(1)]);
        assert_eq!(
            t.eval_with(&ev, &Eval::at_least(nat(0))).unwrap(),
            Eval::at_least(nat(0))
        );
        assert_eq!(
            id().eval_with(&ev, &Eval::at_least(nat(5))).unwrap(),
            Eval::at_least(nat(5))
        );
    }

    #[test]
    fn display_is_dsl() {
        let f = CounterFn::add(
            &id(),
            &CounterFn::compose(&c(2), &CounterFn::ceil_scale(3u32, 2u32).unwrap()),
        );
        assert_eq!(f.to_string(), "add(id,compose(const:2,scale:3/2))");
    }

    fn arb_fn() -> impl Strategy<Value = CounterFn> {
        let leaf = prop_oneof![
            Just(CounterFn::zero()),
            Just(CounterFn::identity()),
            (0u64..5).prop_map(CounterFn::constant),
            (0u64..5, 1u64..4).prop_map(|(a, d)| CounterFn::ceil_scale(a, d).unwrap()),
        ];
        leaf.prop_recursive(3, 16, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(f, g)| CounterFn::add(&f, &g)),
                (inner.clone(), inner.clone()).prop_map(|(f, g)| CounterFn::mul(&f, &g)),
                (inner.clone(), inner.clone()).prop_map(|(f, g)| CounterFn::max(&f, &g)),
                (inner.clone(), inner.clone()).prop_map(|(f, g)| CounterFn::compose(&f, &g)),
                (inner.clone(), 0u64..3).prop_map(|(f, i)| CounterFn::tilde_iterate(
                    &f,
                    IterCount::exact(BigNat::from(i))
                )),
            ]
        })
    }

    proptest! {
        #[test]
        fn closed_primitives_are_monotone(f in arb_fn()) {
            prop_assert!(f.is_monotone());
            let vals: Vec<BigNat> = (0..=100u64).map(|n| f.eval(&nat(n)).unwrap()).collect();
            prop_assert!(vals.windows(2).all(|w| w[0] <= w[1]));
            if f.is_inflationary() {
                prop_assert!(vals.iter().enumerate().all(|(n, v)| v >= &nat(n as u64)));
            }
        }

        #[test]
        fn eval_is_deterministic(f in arb_fn(), n in 0u64..1000) {
            prop_assert_eq!(f.eval(&nat(n)).unwrap(), f.clone().eval(&nat(n)).unwrap());
        }

        #[test]
        fn tilde_composes(k in 0u64..4, i in 0u64..6, j in 0u64..6, n in 0u64..50) {
            let f = CounterFn::add(&CounterFn::identity(), &CounterFn::constant(k));
            let direct = tilde_iterate(&f, &nat(i + j), &nat(n)).unwrap();
            let split = tilde_iterate(&f, &nat(j), &tilde_iterate(&f, &nat(i), &nat(n)).unwrap()).unwrap();
            prop_assert_eq!(direct, split);
        }

        #[test]
        fn envelope_matches_running_max(vals in prop::collection::vec(0u64..100, 1..30)) {
            let t = CounterFn::external(vals.iter().map(|&v| nat(v)).collect());
            let e = CounterFn::envelope(&t);
            let mut best = 0;
            for (k, v) in vals.iter().enumerate() {
                best = best.max(*v);
                prop_assert_eq!(e.eval(&nat(k as u64)).unwrap(), nat(best));
            }
        }
    }
}

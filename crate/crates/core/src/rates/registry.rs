use std::sync::Arc;

use num_traits::Zero;
use serde_json::json;

use super::base::{BaseRate, EpsArg, FiniteDim, A1, A2};
use super::combinators::{n_eps_fn, Combinators};
use super::report::{NatSummary, RateResult};
use super::{RateContext, RateEnv};
use crate::counterfn::{CounterFn, Eval, IterCount};
use crate::error::{Error, Result};
use crate::numerics::{ceil_nonneg, require_nonnegative, require_positive, BigNat, Rational};

/// Inputs of one rate request. Unused fields are ignored by a combinator.
#[derive(Debug, Clone)]
pub struct RateQuery {
    pub epsilon: Rational,
    pub g: CounterFn,
    pub h: CounterFn,
    /// Argument of `n_eps`.
    pub n: Option<BigNat>,
    /// Dimension for the finite-dimensional `A₂`.
    pub dim: Option<u64>,
    /// Range bound `R` for the non-increasing rate.
    pub range: Option<Rational>,
}

impl RateQuery {
    pub fn new(epsilon: Rational, g: CounterFn, h: CounterFn) -> Self {
        RateQuery {
            epsilon,
            g,
            h,
            n: None,
            dim: None,
            range: None,
        }
    }
}

pub trait RateCombinator: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn compute(&self, env: &RateEnv, q: &RateQuery) -> Result<Eval>;
}

struct Tower {
    name: &'static str,
    summary: &'static str,
    run: fn(&Combinators, &RateQuery) -> Result<Eval>,
}

impl RateCombinator for Tower {
    fn name(&self) -> &'static str {
        self.name
    }

    fn summary(&self) -> &'static str {
        self.summary
    }

    fn compute(&self, env: &RateEnv, q: &RateQuery) -> Result<Eval> {
        (self.run)(&Combinators { env }, q)
    }
}

struct Direct<F> {
    name: &'static str,
    summary: &'static str,
    run: F,
}

impl<F> RateCombinator for Direct<F>
where
    F: Fn(&RateEnv, &RateQuery) -> Result<Eval> + Send + Sync,
{
    fn name(&self) -> &'static str {
        self.name
    }

    fn summary(&self) -> &'static str {
        self.summary
    }

    fn compute(&self, env: &RateEnv, q: &RateQuery) -> Result<Eval> {
        (self.run)(env, q)
    }
}

fn direct_base(env: &RateEnv, q: &RateQuery, label: &str, base: &dyn BaseRate) -> Result<Eval> {
    let out = base.eval(env, &EpsArg::Given(q.epsilon.clone()), &q.g, &q.h)?;
    let mut fields = out.notes;
    fields.insert(
        "value".into(),
        serde_json::to_value(NatSummary::of(&out.value)).expect("serializes"),
    );
    env.record(label, &q.epsilon, fields);
    Ok(out.value)
}

/// Rates by name, as accepted by `--rate`.
pub struct RateRegistry {
    entries: Vec<Arc<dyn RateCombinator>>,
}

impl Default for RateRegistry {
    fn default() -> Self {
        let mut r = RateRegistry {
            entries: Vec::new(),
        };
        let towers: [(
            &'static str,
            &'static str,
            fn(&Combinators, &RateQuery) -> Result<Eval>,
        ); 8] = [
            ("b", "B(ε,g,h): base rate at γ(ε)", |c, q| {
                c.rate_b(&q.epsilon, &q.g, &q.h)
            }),
            ("theta", "Θ(ε,g)", |c, q| c.rate_theta(&q.epsilon, &q.g)),
            ("theta_b", "Θ^B(ε,g,h)", |c, q| {
                c.rate_theta_b(&q.epsilon, &q.g, &q.h)
            }),
            ("delta", "Δ(ε,g)", |c, q| c.rate_delta(&q.epsilon, &q.g)),
            ("delta_b", "Δ^B(ε,g,h)", |c, q| {
                c.rate_delta_b(&q.epsilon, &q.g, &q.h)
            }),
            ("psi", "Ψ(ε,g,h)", |c, q| {
                c.rate_psi(&q.epsilon, &q.g, &q.h)
            }),
            ("phi", "Φ(ε,g,h)", |c, q| {
                c.rate_phi(&q.epsilon, &q.g, &q.h)
            }),
            (
                "simultaneous",
                "Φ(2ε/5,g,h), all three statements at once",
                |c, q| c.rate_simultaneous(&q.epsilon, &q.g, &q.h),
            ),
        ];
        for (name, summary, run) in towers {
            r.register(Arc::new(Tower { name, summary, run }));
        }
        r.register(Arc::new(Direct {
            name: "a1",
            summary: "A₁(ε,g,h) = (g+h)~^{⌈b²/ε²⌉}(0)",
            run: |env: &RateEnv, q: &RateQuery| direct_base(env, q, "A1", &A1),
        }));
        r.register(Arc::new(Direct {
            name: "a2",
            summary: "A₂(ε,g) for Euclidean ℝ^dim; needs dim",
            run: |env: &RateEnv, q: &RateQuery| {
                let dim = q
                    .dim
                    .ok_or_else(|| Error::invalid("a2 needs a dimension"))?;
                let base = A2 {
                    gamma: Arc::new(FiniteDim {
                        dim,
                        b: env.ctx.gamma.b().clone(),
                    }),
                };
                direct_base(env, q, "A2", &base)
            },
        }));
        r.register(Arc::new(Direct {
            name: "nonincreasing",
            summary: "g̃^{⌈R/ε⌉}(0) for a non-increasing sequence in [0,R]; needs range",
            run: |env: &RateEnv, q: &RateQuery| {
                require_positive(&q.epsilon, "ε")?;
                let range = q
                    .range
                    .as_ref()
                    .ok_or_else(|| Error::invalid("nonincreasing needs a range bound"))?;
                require_nonnegative(range, "range bound")?;
                let count = ceil_nonneg(&(range / &q.epsilon))?;
                let it = CounterFn::tilde_iterate(&q.g, IterCount::exact(count.clone()));
                let value = it.eval_with(&env.ev, &Eval::exact(BigNat::zero()))?;
                env.record(
                    "nonincreasing",
                    &q.epsilon,
                    [("count".to_string(), json!(count.to_string()))]
                        .into_iter()
                        .collect(),
                );
                Ok(value)
            },
        }));
        r.register(Arc::new(Direct {
            name: "n_eps",
            summary: "N_ε(n) = max{n, ⌈6nb/ε⌉}; needs n",
            run: |env: &RateEnv, q: &RateQuery| {
                require_positive(&q.epsilon, "ε")?;
                let n =
                    q.n.clone()
                        .ok_or_else(|| Error::invalid("n_eps needs an argument n"))?;
                n_eps_fn(&q.epsilon, env.ctx.gamma.b()).eval_with(&env.ev, &Eval::exact(n))
            },
        }));
        r.register(Arc::new(Direct {
            name: "p_of_t",
            summary: "p(t), the ladder depth of γ(t), with t given as ε",
            run: |env: &RateEnv, q: &RateQuery| Ok(Eval::exact(env.ctx.gamma.p_of_t(&q.epsilon)?)),
        }));
        r
    }
}

impl RateRegistry {
    /// Adds a rate, replacing any rate of the same name.
    pub fn register(&mut self, rate: Arc<dyn RateCombinator>) {
        self.entries.retain(|e| e.name() != rate.name());
        self.entries.push(rate);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn get(&self, name: &str) -> Result<&Arc<dyn RateCombinator>> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown rate {name:?}; known: {}",
                    self.names().join(", ")
                ))
            })
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn RateCombinator>> {
        self.entries.iter()
    }

    /// Runs one rate. A lower bound is an error unless the context allows it.
    pub fn run(&self, ctx: &RateContext, name: &str, q: &RateQuery) -> Result<RateResult> {
        let rate = self.get(name)?;
        let env = ctx.env();
        let value = rate.compute(&env, q)?;
        if !value.exact && !ctx.allow_lower_bound {
            return Err(Error::resource(format!(
                "{name} at ε = {} exceeds the evaluation limits; a lower bound of {} bits is known",
                crate::numerics::format_rational(&q.epsilon),
                if value.value.is_zero() {
                    0
                } else {
                    value.value.bits()
                }
            )));
        }
        Ok(RateResult {
            rate: name.to_string(),
            epsilon: q.epsilon.clone(),
            value: value.value,
            exact: value.exact,
            trace: env.take_trace(),
        })
    }
}

//! Rates of metastability built from a base rate by the combinators
//! `B`, `Θ`, `Θ^B`, `Δ`, `Δ^B`, `Ψ`, `Φ`.
//!
//! Every combinator runs against one [`RateEnv`], which owns the work budget
//! for the whole computation and collects a trace of intermediate values.

mod base;
mod combinators;
mod registry;
mod report;

pub use base::{
    antitone_count, gamma_tb_finite_dim, rate_a1, rate_a2, rate_nonincreasing, BaseOutcome,
    BaseRate, BaseRegistry, EpsArg, EpsValue, FiniteDim, StubConst, StubInverse, TotalBoundedness,
    UserTable, A1, A2,
};
pub use combinators::{
    b_arguments, delta_eps, delta_g_prime, g_eps, n_eps, n_eps_fn, phi_arguments, psi_g, theta_k,
    Combinators,
};
pub use registry::{RateCombinator, RateQuery, RateRegistry};
pub use report::{NatSummary, RateResult, TraceStep, PREVIEW_DIGITS};

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::Value;

use crate::counterfn::{Evaluator, Limits};
use crate::gamma::GammaContext;

/// Everything a rate computation needs besides `ε`, `g`, `h`.
#[derive(Clone)]
pub struct RateContext {
    pub gamma: GammaContext,
    pub base: Arc<dyn BaseRate>,
    pub limits: Limits,
    /// Accept certified lower bounds instead of failing with a resource error.
    pub allow_lower_bound: bool,
}

impl RateContext {
    pub fn new(gamma: GammaContext, base: Arc<dyn BaseRate>) -> Self {
        RateContext {
            gamma,
            base,
            limits: Limits::default(),
            allow_lower_bound: false,
        }
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub fn allowing_lower_bound(mut self, allow: bool) -> Self {
        self.allow_lower_bound = allow;
        self
    }

    pub fn env(&self) -> RateEnv<'_> {
        let ev = if self.allow_lower_bound {
            Evaluator::new(self.limits.clone())
        } else {
            Evaluator::strict(self.limits.clone())
        };
        RateEnv {
            ctx: self,
            ev,
            trace: RefCell::new(Vec::new()),
        }
    }
}

/// One running computation.
pub struct RateEnv<'a> {
    pub ctx: &'a RateContext,
    pub ev: Evaluator,
    trace: RefCell<Vec<TraceStep>>,
}

impl RateEnv<'_> {
    pub fn record(
        &self,
        combinator: &str,
        epsilon: &crate::numerics::Rational,
        fields: BTreeMap<String, Value>,
    ) {
        self.trace.borrow_mut().push(TraceStep {
            combinator: combinator.to_string(),
            epsilon: crate::numerics::format_rational(epsilon),
            fields,
        });
    }

    pub fn take_trace(&self) -> Vec<TraceStep> {
        std::mem::take(&mut self.trace.borrow_mut())
    }
}

#[cfg(test)]
mod tests;

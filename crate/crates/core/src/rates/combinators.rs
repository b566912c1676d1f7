use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::base::EpsArg;
use super::report::NatSummary;
use super::RateEnv;
use crate::counterfn::{CounterFn, Eval};
use crate::error::{Error, Result};
use crate::gamma::GammaContext;
use crate::numerics::{
    ceil_nonneg, format_rational, nat_to_u64, rat_int, require_positive, BigNat, Rational,
    RoundingDirection,
};

fn scale(r: &Rational) -> CounterFn {
    CounterFn::scale_by(r).expect("nonnegative scale factor")
}

fn twice(f: &CounterFn) -> CounterFn {
    CounterFn::compose(&scale(&rat_int(2)), f)
}

/// `g'(N) = N + 2g(N) + h(N)` and `h'(N) = 2(N + g(N))`.
pub fn b_arguments(g: &CounterFn, h: &CounterFn) -> (CounterFn, CounterFn) {
    let id = CounterFn::identity();
    let g1 = CounterFn::add(&CounterFn::add(&id, &twice(g)), h);
    let h1 = twice(&CounterFn::add(&id, g));
    (g1, h1)
}

/// `K = ⌈2b/ε⌉`.
pub fn theta_k(b: &Rational, eps: &Rational) -> Result<u64> {
    require_positive(eps, "ε")?;
    let k = ceil_nonneg(&(rat_int(2) * b / eps))?;
    nat_to_u64(&k)
        .filter(|k| k.checked_add(2).is_some())
        .ok_or_else(|| Error::resource(format!("K = {k} exceeds machine range")))
}

/// `g_ε(n) = n' + g^M(n')` with `n' = max{n, ⌈4nb/ε⌉}`.
pub fn g_eps(b: &Rational, eps: &Rational, g: &CounterFn) -> CounterFn {
    let id = CounterFn::identity();
    let n1 = CounterFn::max(&id, &scale(&(rat_int(4) * b / eps)));
    CounterFn::compose(&CounterFn::add(&id, &CounterFn::envelope(g)), &n1)
}

/// `δ(ε) = min{b, ε/4, ε/8·η(ε/2b)}` with `η` rounded down.
pub fn delta_eps(ctx: &GammaContext, eps: &Rational) -> Result<Rational> {
    require_positive(eps, "ε")?;
    let b = ctx.b();
    let eta = ctx
        .modulus()
        .eval(&(eps / (rat_int(2) * b)), RoundingDirection::Down)?;
    let third = eps / rat_int(8) * eta;
    Ok(b.clone().min(eps / rat_int(4)).min(third))
}

/// `g'_ε(n) = ⌈6b(n + g(n))/δ⌉`.
pub fn delta_g_prime(b: &Rational, delta: &Rational, g: &CounterFn) -> CounterFn {
    CounterFn::compose(
        &scale(&(rat_int(6) * b / delta)),
        &CounterFn::add(&CounterFn::identity(), g),
    )
}

/// `g''(N) = max{g(N), ⌈4b·h(N)/ε⌉}`.
pub fn psi_g(b: &Rational, eps: &Rational, g: &CounterFn, h: &CounterFn) -> CounterFn {
    CounterFn::max(g, &CounterFn::compose(&scale(&(rat_int(4) * b / eps)), h))
}

/// `N_ε(n) = max{n, ⌈6nb/ε⌉}`.
pub fn n_eps(eps: &Rational, b: &Rational, n: &BigNat) -> Result<BigNat> {
    require_positive(eps, "ε")?;
    n_eps_fn(eps, b).eval(n)
}

pub fn n_eps_fn(eps: &Rational, b: &Rational) -> CounterFn {
    CounterFn::max(&CounterFn::identity(), &scale(&(rat_int(6) * b / eps)))
}

/// `g'(n) = N_ε(n) + g(N_ε(n))` and `h'(n) = g(n) + h(N_ε(n))`.
pub fn phi_arguments(
    eps: &Rational,
    b: &Rational,
    g: &CounterFn,
    h: &CounterFn,
) -> (CounterFn, CounterFn) {
    let ne = n_eps_fn(eps, b);
    let g1 = CounterFn::add(&ne, &CounterFn::compose(g, &ne));
    let h1 = CounterFn::add(g, &CounterFn::compose(h, &ne));
    (g1, h1)
}

fn summary(e: &Eval) -> Value {
    serde_json::to_value(NatSummary::of(e)).expect("summary serializes")
}

fn fields(pairs: Vec<(&str, Value)>) -> BTreeMap<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// The combinator tower over one [`RateEnv`].
pub struct Combinators<'e, 'c> {
    pub env: &'e RateEnv<'c>,
}

impl Combinators<'_, '_> {
    fn b(&self) -> &Rational {
        self.env.ctx.gamma.b()
    }

    pub fn rate_b(&self, eps: &Rational, g: &CounterFn, h: &CounterFn) -> Result<Eval> {
        require_positive(eps, "ε")?;
        let (g1, h1) = b_arguments(g, h);
        let arg = EpsArg::Gamma {
            ctx: &self.env.ctx.gamma,
            t: eps.clone(),
        };
        let out = self.env.ctx.base.eval(self.env, &arg, &g1, &h1)?;
        let mut f = fields(vec![
            ("base", json!(self.env.ctx.base.name())),
            ("base_argument", json!(arg.describe())),
            ("g_prime", json!(g1.to_string())),
            ("h_prime", json!(h1.to_string())),
            ("value", summary(&out.value)),
        ]);
        for (k, v) in out.notes {
            f.insert(format!("base.{k}"), v);
        }
        self.env.record("B", eps, f);
        Ok(out.value)
    }

    pub fn rate_theta(&self, eps: &Rational, g: &CounterFn) -> Result<Eval> {
        require_positive(eps, "ε")?;
        let k = theta_k(self.b(), eps)?;
        let ge = g_eps(self.b(), eps, g);
        let outer = CounterFn::eps_iterate(&ge, k + 1);
        let inner = self.rate_b(&(eps / rat_int(4)), &outer, &twice(&outer))?;
        let value = outer.eval_with(&self.env.ev, &inner)?;
        self.env.record(
            "Theta",
            eps,
            fields(vec![
                ("K", json!(k)),
                ("g_eps", json!(ge.to_string())),
                ("iterate", json!(k + 1)),
                ("inner", summary(&inner)),
                ("value", summary(&value)),
            ]),
        );
        Ok(value)
    }

    pub fn rate_theta_b(&self, eps: &Rational, g: &CounterFn, h: &CounterFn) -> Result<Eval> {
        self.theta_b_labelled("ThetaB", eps, g, h)
    }

    fn theta_b_labelled(
        &self,
        label: &str,
        eps: &Rational,
        g: &CounterFn,
        h: &CounterFn,
    ) -> Result<Eval> {
        require_positive(eps, "ε")?;
        let k = theta_k(self.b(), eps)?;
        let ge = g_eps(self.b(), eps, g);
        let outer = CounterFn::eps_iterate(&ge, k + 1);
        let second = CounterFn::eps_iterate(&ge, k + 2);
        let third = CounterFn::max(
            &twice(&outer),
            &CounterFn::compose(&CounterFn::envelope(h), &outer),
        );
        let inner = self.rate_b(&(eps / rat_int(4)), &second, &third)?;
        let value = outer.eval_with(&self.env.ev, &inner)?;
        self.env.record(
            label,
            eps,
            fields(vec![
                ("K", json!(k)),
                ("g_eps", json!(ge.to_string())),
                ("iterate", json!(k + 1)),
                ("inner_iterate", json!(k + 2)),
                ("inner", summary(&inner)),
                ("value", summary(&value)),
            ]),
        );
        Ok(value)
    }

    fn delta_common(
        &self,
        label: &str,
        eps: &Rational,
        g: &CounterFn,
        h: Option<&CounterFn>,
    ) -> Result<Eval> {
        require_positive(eps, "ε")?;
        let delta = delta_eps(&self.env.ctx.gamma, eps)?;
        let gp = delta_g_prime(self.b(), &delta, g);
        let g_arg = CounterFn::add(g, &gp);
        let id = CounterFn::identity();
        let core = CounterFn::add(&CounterFn::add(&id, g), &twice(&gp));
        let h_arg = match h {
            Some(h) => CounterFn::max(&core, h),
            None => core,
        };
        let value = self.theta_b_labelled("ThetaB", &delta, &g_arg, &h_arg)?;
        self.env.record(
            label,
            eps,
            fields(vec![
                ("delta", json!(format_rational(&delta))),
                ("g_prime_eps", json!(gp.to_string())),
                ("value", summary(&value)),
            ]),
        );
        Ok(value)
    }

    pub fn rate_delta(&self, eps: &Rational, g: &CounterFn) -> Result<Eval> {
        self.delta_common("Delta", eps, g, None)
    }

    pub fn rate_delta_b(&self, eps: &Rational, g: &CounterFn, h: &CounterFn) -> Result<Eval> {
        self.delta_common("DeltaB", eps, g, Some(h))
    }

    pub fn rate_psi(&self, eps: &Rational, g: &CounterFn, h: &CounterFn) -> Result<Eval> {
        require_positive(eps, "ε")?;
        let g2 = psi_g(self.b(), eps, g, h);
        let value = self.rate_delta_b(&(eps / rat_int(4)), &g2, h)?;
        self.env.record(
            "Psi",
            eps,
            fields(vec![
                ("g_second", json!(g2.to_string())),
                ("value", summary(&value)),
            ]),
        );
        Ok(value)
    }

    pub fn rate_phi(&self, eps: &Rational, g: &CounterFn, h: &CounterFn) -> Result<Eval> {
        self.phi_labelled("Phi", eps, g, h)
    }

    fn phi_labelled(
        &self,
        label: &str,
        eps: &Rational,
        g: &CounterFn,
        h: &CounterFn,
    ) -> Result<Eval> {
        require_positive(eps, "ε")?;
        let (g1, h1) = phi_arguments(eps, self.b(), g, h);
        let inner = self.rate_psi(&(eps / rat_int(2)), &g1, &h1)?;
        let value = n_eps_fn(eps, self.b()).eval_with(&self.env.ev, &inner)?;
        self.env.record(
            label,
            eps,
            fields(vec![
                ("g_prime", json!(g1.to_string())),
                ("h_prime", json!(h1.to_string())),
                ("inner", summary(&inner)),
                ("value", summary(&value)),
            ]),
        );
        Ok(value)
    }

    /// `Φ(2ε/5, g, h)`.
    pub fn rate_simultaneous(&self, eps: &Rational, g: &CounterFn, h: &CounterFn) -> Result<Eval> {
        require_positive(eps, "ε")?;
        let inner_eps = eps * Rational::new(2.into(), 5.into());
        let value = self.phi_labelled("Phi", &inner_eps, g, h)?;
        self.env.record(
            "simultaneous",
            eps,
            fields(vec![
                ("inner_epsilon", json!(format_rational(&inner_eps))),
                ("value", summary(&value)),
            ]),
        );
        Ok(value)
    }
}

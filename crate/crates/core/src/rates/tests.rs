use std::collections::HashMap;
use std::sync::Arc;

use num_traits::{One, Zero};
use proptest::prelude::*;

use super::*;
use crate::counterfn::{parse_counterfn, CounterFn, Eval};
use crate::error::Error;
use crate::gamma::GammaContext;
use crate::moduli::Modulus;
use crate::numerics::{ceil_nonneg, rat, rat_int, BigNat, Rational, Real, RoundingDirection};

fn f(src: &str) -> CounterFn {
    parse_counterfn(src).unwrap()
}

fn gamma_ctx(b: i64) -> GammaContext {
    GammaContext::new(
        rat_int(b),
        Modulus::lp(rat_int(2)).unwrap(),
        rat_int(1),
        rat_int(2),
    )
    .unwrap()
}

fn ctx_with(base: &str) -> RateContext {
    let g = gamma_ctx(2);
    let base = BaseRegistry::default().build(base, g.b()).unwrap();
    RateContext::new(g, base)
}

fn run(ctx: &RateContext, rate: &str, eps: Rational, g: &str, h: &str) -> RateResult {
    RateRegistry::default()
        .run(ctx, rate, &RateQuery::new(eps, f(g), f(h)))
        .unwrap()
}

fn nat(n: u64) -> BigNat {
    BigNat::from(n)
}

/// `g_ε^{(i)}(n)` by plain iteration on machine integers.
fn eps_iter_u128(step: impl Fn(u128) -> u128, i: u64, n: u128) -> u128 {
    (0..i).fold(n.max(1), |x, _| step(x))
}

#[test]
fn delta_examples() {
    let g = gamma_ctx(2);
    assert_eq!(delta_eps(&g, &rat_int(1)).unwrap(), rat(1, 1024));
    assert_eq!(delta_eps(&g, &rat_int(100)).unwrap(), rat_int(2));
    for k in 1..=16 {
        let eps = rat(k, 1);
        let d = delta_eps(&g, &eps).unwrap();
        assert!(d > Rational::zero() && d <= rat_int(2) && d <= &eps / rat_int(4));
    }
}

#[test]
fn b_with_constant_base_is_constant() {
    let ctx = ctx_with("stub:0");
    for eps in [rat(1, 3), rat_int(1), rat_int(7)] {
        let r = run(&ctx, "b", eps, "id", "const:2");
        assert_eq!(r.value, nat(0));
        assert!(r.exact);
    }
    let (g1, _) = b_arguments(&f("id"), &f("const:2"));
    assert_eq!(g1.eval_u64(3).unwrap(), 11);
}

/// `γ_n(t)` by memoized recursion over `(n, j)` with argument `t/2^j`.
fn gamma_oracle(ctx: &GammaContext, n: usize, t: &Rational) -> Real {
    fn go(
        ctx: &GammaContext,
        n: usize,
        j: u32,
        t: &Rational,
        memo: &mut HashMap<(usize, u32), Real>,
    ) -> Real {
        if let Some(v) = memo.get(&(n, j)) {
            return v.clone();
        }
        let arg = t / Rational::from_integer(num_bigint::BigInt::one() << j);
        let v = if n == 2 {
            Real::from(ctx.gamma2(&arg).unwrap())
        } else {
            let a = go(ctx, n - 1, j, t, memo);
            let half = go(ctx, n - 1, j + 1, t, memo);
            let third = half.mul_rat(&rat(1, 3), RoundingDirection::Down);
            a.min(ctx.gamma2_real(&third).unwrap())
        };
        memo.insert((n, j), v.clone());
        v
    }
    go(ctx, n, 0, t, &mut HashMap::new())
}

#[test]
fn b_with_inverse_base_reads_gamma() {
    let ctx = ctx_with("stub:inv");
    let eps = rat_int(2);
    let p = ctx.gamma.p_of_t(&eps).unwrap();
    assert_eq!(p, nat(18));
    let g = gamma_oracle(&ctx.gamma, 18, &(&eps / rat_int(3)));
    let expected = ceil_nonneg(&(Rational::one() / g.to_rational().unwrap())).unwrap();
    let r = run(&ctx, "b", eps, "id", "id");
    assert!(r.exact);
    assert_eq!(r.value, expected);
    assert!(r.value.bits() > 30_000);
}

#[test]
fn b_with_inverse_base_at_one_is_a_lower_bound() {
    // ⌈1/γ(1)⌉ has about 2^70 bits.
    let ctx = ctx_with("stub:inv").allowing_lower_bound(true);
    let r = run(&ctx, "b", rat_int(1), "id", "id");
    assert!(!r.exact);
    assert_eq!(r.value.bits(), ctx.limits.max_bits + 1);
    let strict = ctx_with("stub:inv");
    let err = RateRegistry::default()
        .run(&strict, "b", &RateQuery::new(rat_int(1), f("id"), f("id")))
        .unwrap_err();
    assert!(err.is_resource(), "{err:?}");
}

#[test]
fn theta_examples() {
    let ctx = ctx_with("stub:0");
    let r = run(&ctx, "theta", rat_int(1), "id", "zero");
    assert_eq!(r.value, nat(1_048_576));
    let step = r.step("Theta").unwrap();
    assert_eq!(step.fields["K"], 4);
    assert_eq!(step.fields["iterate"], 5);

    // g = zero gives g_ε(n) = 8n.
    let r = run(&ctx, "theta", rat_int(1), "zero", "zero");
    assert_eq!(r.value, nat(8u64.pow(5)));
    assert_eq!(theta_k(&rat_int(2), &rat_int(1)).unwrap(), 4);
    assert_eq!(theta_k(&rat_int(2), &rat(3, 1)).unwrap(), 2);
}

#[test]
fn theta_b_examples() {
    let ctx = ctx_with("stub:0");
    let r = run(&ctx, "theta_b", rat_int(1), "id", "zero");
    assert_eq!(r.value, nat(1_048_576));
    let step = r.step("ThetaB").unwrap();
    assert_eq!(step.fields["iterate"], 5);
    assert_eq!(step.fields["inner_iterate"], 6);
}

#[test]
fn theta_b_monotone_in_h_for_a1() {
    let ctx = ctx_with("a1");
    let values: Vec<BigNat> = ["zero", "const:1", "id", "scale:2/1", "mul(id,id)"]
        .iter()
        .map(|h| run(&ctx, "theta_b", rat_int(400), "id", h).value)
        .collect();
    assert!(values.windows(2).all(|w| w[0] <= w[1]), "{values:?}");
}

#[test]
fn theta_trace_recomposes() {
    let ctx = ctx_with("stub:7");
    let eps = rat(3, 2);
    let r = run(&ctx, "theta", eps.clone(), "scale:3/1", "zero");
    let step = r.step("Theta").unwrap();
    let k = step.fields["K"].as_u64().unwrap();
    assert_eq!(k, 3);
    let inner: u128 = step.fields["inner"]["value"]
        .as_str()
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(inner, 7);
    // n' = max{n, ⌈16n/3⌉}; g_ε(n) = n' + 3n'.
    let step_fn = |n: u128| {
        let n1 = n.max((16 * n).div_ceil(3));
        4 * n1
    };
    let expected = eps_iter_u128(step_fn, k + 1, inner);
    assert_eq!(r.value, BigNat::from(expected));
}

#[test]
fn delta_examples_and_h_zero() {
    let gp = delta_g_prime(&rat_int(2), &rat(1, 1024), &f("id"));
    assert_eq!(gp.eval_u64(1).unwrap(), 24576);

    let ctx = ctx_with("stub:0");
    let a = run(&ctx, "delta", rat_int(1000), "id", "zero");
    let b = run(&ctx, "delta_b", rat_int(1000), "id", "zero");
    assert!(a.exact && b.exact);
    assert_eq!(a.value, b.value);
    assert_eq!(a.step("Delta").unwrap().fields["delta"], "2");
}

#[test]
fn delta_at_one_records_g_prime() {
    let ctx = ctx_with("stub:0").allowing_lower_bound(true);
    let r = run(&ctx, "delta", rat_int(1), "id", "zero");
    let step = r.step("Delta").unwrap();
    assert_eq!(step.fields["delta"], "1/1024");
    let gp = parse_counterfn(step.fields["g_prime_eps"].as_str().unwrap()).unwrap();
    assert_eq!(gp.eval_u64(1).unwrap(), 24576);
    assert!(r.digit_count() > 1);
}

#[test]
fn psi_examples() {
    let g2 = psi_g(&rat_int(2), &rat_int(1), &f("id"), &f("const:3"));
    assert_eq!(g2.eval_u64(5).unwrap(), 24);
    let g2 = psi_g(&rat_int(2), &rat_int(1), &f("scale:5/2"), &f("zero"));
    for n in 0..50 {
        assert_eq!(g2.eval_u64(n).unwrap(), (5 * n).div_ceil(2));
    }
    let ctx = ctx_with("stub:0");
    let a = run(&ctx, "psi", rat_int(4000), "id", "const:1");
    let b = run(&ctx, "psi", rat_int(4000), "id", "const:1");
    assert_eq!(a, b);
}

#[test]
fn n_eps_examples() {
    assert_eq!(n_eps(&rat_int(2), &rat_int(2), &nat(5)).unwrap(), nat(30));
    assert_eq!(n_eps(&rat(1, 7), &rat_int(3), &nat(0)).unwrap(), nat(0));
    assert_eq!(n_eps(&rat_int(100), &rat_int(1), &nat(7)).unwrap(), nat(7));
    assert!(matches!(
        n_eps(&rat_int(0), &rat_int(1), &nat(7)),
        Err(Error::Domain(_))
    ));
}

#[test]
fn phi_examples() {
    let (g1, h1) = phi_arguments(&rat_int(2), &rat_int(2), &f("id"), &f("const:1"));
    assert_eq!(g1.eval_u64(5).unwrap(), 60);
    assert_eq!(h1.eval_u64(5).unwrap(), 6);
}

#[test]
fn phi_equals_n_eps_of_psi() {
    let ctx = ctx_with("stub:3");
    let eps = rat_int(8000);
    let phi = run(&ctx, "phi", eps.clone(), "id", "const:1");
    let (g1, h1) = phi_arguments(&eps, &rat_int(2), &f("id"), &f("const:1"));
    let psi = RateRegistry::default()
        .run(&ctx, "psi", &RateQuery::new(&eps / rat_int(2), g1, h1))
        .unwrap();
    assert_eq!(phi.value, n_eps(&eps, &rat_int(2), &psi.value).unwrap());
}

#[test]
fn simultaneous_rescales() {
    let ctx = ctx_with("stub:0");
    let s = run(&ctx, "simultaneous", rat(5, 2) * rat_int(1000), "id", "id");
    let p = run(&ctx, "phi", rat_int(1000), "id", "id");
    assert!(s.exact);
    assert_eq!(s.value, p.value);
    let last = s.trace.last().unwrap();
    assert_eq!(last.combinator, "simultaneous");
    assert_eq!(last.fields["inner_epsilon"], "1000");
}

#[test]
fn nonincreasing_examples() {
    assert_eq!(
        rate_nonincreasing(&rat_int(1), &rat(1, 2), &f("const:1")).unwrap(),
        nat(2)
    );
    assert_eq!(
        rate_nonincreasing(&rat_int(9), &rat(1, 9), &f("zero")).unwrap(),
        nat(0)
    );
    assert_eq!(
        rate_nonincreasing(&rat_int(0), &rat(1, 9), &f("const:4")).unwrap(),
        nat(0)
    );
}

#[test]
fn a1_examples() {
    assert_eq!(
        rate_a1(&rat_int(2), &rat_int(1), &f("id"), &f("id")).unwrap(),
        nat(0)
    );
    assert_eq!(
        rate_a1(&rat_int(2), &rat_int(1), &f("const:1"), &f("const:1")).unwrap(),
        nat(8)
    );
    assert_eq!(
        rate_a1(&rat_int(1), &rat_int(2), &f("const:3"), &f("const:4")).unwrap(),
        nat(7)
    );
    let ctx = ctx_with("stub:0");
    let r = run(&ctx, "a1", rat_int(1), "const:1", "const:1");
    assert_eq!(r.value, nat(8));
    assert!(r.to_json().contains("\"value\": \"8\""));
}

struct ZeroGamma;

impl TotalBoundedness for ZeroGamma {
    fn name(&self) -> String {
        "zero".into()
    }

    fn gamma(
        &self,
        _eps: &Rational,
        _seq: &dyn Fn(u64) -> crate::Result<BigNat>,
    ) -> crate::Result<BigNat> {
        Ok(BigNat::zero())
    }

    fn gamma_half_bound(&self, _eps: &EpsValue, _cap_bits: u64) -> crate::Result<Eval> {
        Ok(Eval::exact(BigNat::zero()))
    }
}

#[test]
fn a2_examples() {
    let fd = FiniteDim {
        dim: 4,
        b: rat_int(2),
    };
    // K = Γ(1/2) = γ(1/4) = ⌈2·2·4⌉.
    assert_eq!(rate_a2(&fd, &rat_int(1), &f("const:1")).unwrap(), nat(16));
    assert_eq!(rate_a2(&fd, &rat_int(1), &f("zero")).unwrap(), nat(0));
    assert_eq!(
        rate_a2(&ZeroGamma, &rat_int(1), &f("const:5")).unwrap(),
        nat(0)
    );
    let ctx = ctx_with("stub:0");
    let q = RateQuery {
        dim: Some(4),
        ..RateQuery::new(rat_int(1), f("const:1"), f("zero"))
    };
    assert_eq!(
        RateRegistry::default().run(&ctx, "a2", &q).unwrap().value,
        nat(16)
    );
}

#[test]
fn finite_dim_gamma_examples() {
    assert_eq!(
        gamma_tb_finite_dim(4, &rat_int(2), &rat_int(1)).unwrap(),
        nat(4)
    );
    assert_eq!(
        gamma_tb_finite_dim(2, &rat_int(1), &rat_int(1)).unwrap(),
        nat(2)
    );
    assert_eq!(
        gamma_tb_finite_dim(1, &rat_int(1), &rat_int(1)).unwrap(),
        nat(1)
    );
    assert_eq!(
        gamma_tb_finite_dim(3, &rat_int(1), &rat(1, 10)).unwrap(),
        nat(18)
    );
}

#[test]
fn base_registry_parses() {
    let reg = BaseRegistry::default();
    let b = rat_int(2);
    for (spec, name) in [
        ("a1", "a1"),
        ("stub:12", "stub:12"),
        ("stub:inv", "stub:inv"),
        ("a2:dim=3", "a2:finite_dim(dim=3)"),
    ] {
        assert_eq!(reg.build(spec, &b).unwrap().name(), name);
    }
    assert_eq!(
        reg.build("table:1=4,1/2=10", &b).unwrap().name(),
        "table:1/2=10,1=4"
    );
    for bad in [
        "a3",
        "stub:x",
        "a2:dim=0",
        "table:1=4,2=5",
        "table:",
        "a1:x",
    ] {
        assert!(
            matches!(reg.build(bad, &b), Err(Error::InvalidInput(_))),
            "{bad}"
        );
    }
}

#[test]
fn table_base_steps() {
    let g = gamma_ctx(2);
    let base: Arc<dyn BaseRate> = BaseRegistry::default()
        .build("table:1=4,1/2=10", g.b())
        .unwrap();
    let ctx = RateContext::new(g, base);
    let env = ctx.env();
    let at = |e: Rational| ctx.base.eval(&env, &EpsArg::Given(e), &f("id"), &f("id"));
    assert_eq!(at(rat_int(3)).unwrap().value, Eval::exact(nat(4)));
    assert_eq!(at(rat(3, 4)).unwrap().value, Eval::exact(nat(10)));
    assert!(matches!(at(rat(1, 4)), Err(Error::Evaluation { .. })));
}

#[test]
fn antitone_count_bounds() {
    let exact = EpsValue::Exact(Real::from(rat(1, 3)));
    assert_eq!(
        antitone_count(&rat_int(4), &exact, 2, 64).unwrap(),
        Eval::exact(nat(36))
    );
    let upper = EpsValue::AtMost(Real::from(rat(1, 3)));
    assert_eq!(
        antitone_count(&rat_int(4), &upper, 2, 64).unwrap(),
        Eval::at_least(nat(36))
    );
    let clipped = antitone_count(
        &rat_int(1),
        &EpsValue::Exact(Real::from(rat(1, 1 << 40))),
        1,
        20,
    )
    .unwrap();
    assert_eq!(clipped, Eval::at_least(nat(1 << 20)));
}

#[test]
fn unknown_rate_and_json_shape() {
    let ctx = ctx_with("stub:0");
    let reg = RateRegistry::default();
    assert!(matches!(
        reg.run(&ctx, "omega", &RateQuery::new(rat_int(1), f("id"), f("id"))),
        Err(Error::InvalidInput(_))
    ));
    let r = run(&ctx, "theta", rat_int(1), "id", "zero");
    let v = r.to_json_value();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    for k in ["rate", "epsilon", "value_digits", "value", "trace"] {
        assert!(keys.contains(&k), "{k}");
    }
    assert_eq!(v["value"], "1048576");
    assert_eq!(v["value_digits"], 7);
    assert_eq!(v["epsilon"], "1");
    let q = RateQuery {
        n: Some(nat(5)),
        ..RateQuery::new(rat_int(2), f("id"), f("id"))
    };
    assert_eq!(reg.run(&ctx, "n_eps", &q).unwrap().value, nat(30));
    assert_eq!(run(&ctx, "p_of_t", rat_int(1), "id", "id").value, nat(72));
}

proptest! {
    #[test]
    fn a1_zero_functions(bn in 1i64..50, en in 1i64..50, ed in 1i64..50) {
        let v = rate_a1(&rat_int(bn), &rat(en, ed), &CounterFn::zero(), &CounterFn::zero()).unwrap();
        prop_assert_eq!(v, nat(0));
    }

    #[test]
    fn n_eps_dominates(en in 1i64..40, ed in 1i64..40, b in 1i64..10, n in 0u64..1000) {
        let eps = rat(en, ed);
        let v = n_eps(&eps, &rat_int(b), &nat(n)).unwrap();
        let scaled = ceil_nonneg(&(rat_int(6 * b) * Rational::from_integer(n.into()) / &eps)).unwrap();
        prop_assert_eq!(v, nat(n).max(scaled));
    }

    #[test]
    fn theta_monotone_in_constant_base(k in 0u64..50) {
        let ctx = ctx_with(&format!("stub:{k}"));
        let lo = run(&ctx, "theta", rat_int(2), "id", "zero").value;
        let ctx = ctx_with(&format!("stub:{}", k + 1));
        let hi = run(&ctx, "theta", rat_int(2), "id", "zero").value;
        prop_assert!(lo <= hi);
    }

    #[test]
    fn g_eps_matches_definition(en in 1i64..20, ed in 1i64..20, n in 0u64..500) {
        let eps = rat(en, ed);
        let ge = g_eps(&rat_int(2), &eps, &f("add(id,const:1)"));
        let n1 = nat(n).max(ceil_nonneg(&(rat_int(8) * Rational::from_integer(n.into()) / &eps)).unwrap());
        prop_assert_eq!(ge.eval(&nat(n)).unwrap(), &n1 + &n1 + 1u32);
    }
}

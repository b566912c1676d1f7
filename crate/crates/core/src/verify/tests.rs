use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::counterfn::parse_counterfn;
use crate::dynamics::{bundled, direct, AffineContraction, Operator, Space};
use crate::moduli::Modulus;
use crate::numerics::rat;
use crate::rates::{RateQuery, RateRegistry};

fn identity_scenario() -> Scenario {
    Scenario::new(
        "identity",
        Space::euclidean(2),
        Arc::new(AffineContraction::identity(2)),
        vec![0.5, 0.25],
        rat(2, 1),
        Modulus::lp(rat(2, 1)).unwrap(),
        rat(1, 1),
        rat(2, 1),
        vec![0.5, 0.25],
        "a1".into(),
    )
    .unwrap()
}

fn query(target: Target, eps: Rational, g: &str, h: &str, cap: u64) -> WitnessQuery {
    WitnessQuery {
        target,
        epsilon: eps,
        g: parse_counterfn(g).unwrap(),
        h: parse_counterfn(h).unwrap(),
        cap,
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Independent scan for the Euclidean scenarios: no cache, no parallelism,
/// every quantity recomputed from the start point.
fn oracle_minimal(
    s: &Scenario,
    target: Target,
    eps: f64,
    g: impl Fn(u64) -> u64,
    h: impl Fn(u64) -> u64,
) -> u64 {
    let op: &dyn Operator = s.operator.as_ref();
    let x = &s.x;
    let mean = |n: u64, k: u64| direct::cesaro(op, x, n.max(1) as usize, k as usize);
    let pt = |i: u64| direct::point(op, x, i as usize);
    let ok = |v: f64| v < eps + TOLERANCE;
    for at in 0.. {
        let (lo, hi, hh) = (at, at + g(at), h(at));
        let holds = match target {
            Target::AlphaMetastable => (lo..=hi).all(|m| {
                (lo..=hi).all(|n| {
                    (0..=hh)
                        .all(|i| ok((dist(&pt(m), &pt(m + i)) - dist(&pt(n), &pt(n + i))).abs()))
                })
            }),
            Target::PsiStatement => (lo..=hi).all(|n| {
                let y = mean(n, n);
                (0..=hh).all(|l| ok(dist(&direct::point(op, &y, l as usize), &y)))
            }),
            Target::PhiStatement => (lo..=hi)
                .all(|m| (lo..=hi).all(|n| (0..=hh).all(|k| ok(dist(&mean(m, m), &mean(n, k)))))),
            Target::SimultaneousStatement => (lo..=hi).all(|m| {
                (lo..=hi).all(|n| {
                    (0..=hh).all(|k| {
                        (0..=hh).all(|l| {
                            let snn = mean(n, n);
                            let snk = mean(n, k);
                            let a = dist(&mean(m, m), &snk);
                            let b = dist(&direct::point(op, &snn, l as usize), &snn);
                            let c = dist(&direct::point(op, &snk, l as usize), &snk);
                            ok(a.max(b).max(c))
                        })
                    })
                })
            }),
        };
        if holds {
            return at;
        }
    }
    unreachable!()
}

#[test]
fn identity_witness_is_zero() {
    let s = identity_scenario();
    for t in Target::ALL {
        for (g, h) in [
            ("id", "const:5"),
            ("add(mul(id,id),const:3)", "id"),
            ("zero", "zero"),
        ] {
            let r = find_witness(&s, &query(t, rat(1, 1000), g, h, 50)).unwrap();
            assert_eq!(r.minimal_n, Some(0), "{t:?}");
            assert!(r.found && r.violations.is_empty());
        }
    }
}

#[test]
fn rotation_phi_witness_matches_oracle() {
    let s = bundled("rotation").unwrap();
    let r = find_witness(
        &s,
        &query(Target::PhiStatement, rat(1, 5), "id", "const:5", 100_000),
    )
    .unwrap();
    let want = oracle_minimal(&s, Target::PhiStatement, 0.2, |n| n, |_| 5);
    assert_eq!(r.minimal_n, Some(want));
    assert!((15..=30).contains(&want), "{want}");
    assert_eq!(r.checked_up_to, want);
    assert_eq!(r.violations.len() as u64, want);
    for (i, v) in r.violations.iter().enumerate() {
        assert_eq!(v.at, i as u64);
        assert!(v.value >= 0.2);
    }
}

#[test]
fn other_targets_match_oracle() {
    let s = bundled("rotation").unwrap();
    for (t, eps, ef) in [
        (Target::AlphaMetastable, rat(1, 5), 0.2),
        (Target::PsiStatement, rat(1, 5), 0.2),
        (Target::SimultaneousStatement, rat(1, 2), 0.5),
    ] {
        let r = find_witness(&s, &query(t, eps, "id", "const:5", 1000)).unwrap();
        assert_eq!(
            r.minimal_n,
            Some(oracle_minimal(&s, t, ef, |n| n, |_| 5)),
            "{t:?}"
        );
    }
    let p = bundled("projected_rotation").unwrap();
    for t in Target::ALL {
        let r = find_witness(&p, &query(t, rat(1, 4), "const:3", "const:2", 1000)).unwrap();
        assert_eq!(
            r.minimal_n,
            Some(oracle_minimal(&p, t, 0.25, |_| 3, |_| 2)),
            "{t:?}"
        );
    }
}

#[test]
fn exhausted_cap_reports_not_found() {
    let s = bundled("rotation").unwrap();
    let r = find_witness(
        &s,
        &query(Target::PhiStatement, rat(1, 5), "id", "const:5", 3),
    )
    .unwrap();
    assert!(!r.found);
    assert_eq!(r.minimal_n, None);
    assert_eq!(r.checked_up_to, 3);
    assert_eq!(r.violations.len(), 4);
    let j = r.to_json_value();
    assert_eq!(j["found"], false);
    assert!(j["minimal_N"].is_null());
    assert_eq!(j["checked_up_to"], 3);
    let keys: Vec<&String> = j.as_object().unwrap().keys().collect();
    assert_eq!(keys.len(), 5);
}

#[test]
fn interval_past_orbit_cap_is_a_resource_error() {
    let s = bundled("rotation").unwrap();
    let e = find_witness(
        &s,
        &query(
            Target::PhiStatement,
            rat(1, 1000),
            "const:10000000",
            "zero",
            10,
        ),
    )
    .unwrap_err();
    assert!(e.is_resource());
    assert!(e.to_string().contains("N = 0"), "{e}");
    let orbit = OrbitCache::with_cap(&s, 100).unwrap();
    assert!(find_witness_in(
        &orbit,
        &query(Target::PhiStatement, rat(1, 5), "id", "zero", 1000),
        4
    )
    .is_err());
    assert!(find_witness(
        &s,
        &query(Target::PhiStatement, rat(0, 1), "id", "zero", 10)
    )
    .is_err());
}

#[test]
fn scan_is_independent_of_partitioning() {
    let s = bundled("projected_rotation").unwrap();
    let q = query(
        Target::SimultaneousStatement,
        rat(1, 3),
        "id",
        "const:3",
        500,
    );
    let orbit = OrbitCache::for_scenario(&s);
    let reports: Vec<WitnessReport> = [1, 3, 16, 64]
        .iter()
        .map(|&b| find_witness_in(&orbit, &q, b).unwrap())
        .collect();
    for r in &reports[1..] {
        assert_eq!(r, &reports[0]);
        assert_eq!(r.to_json(), reports[0].to_json());
    }
}

#[test]
fn domination() {
    let s = bundled("rotation").unwrap();
    let ctx = s.rate_context().unwrap();
    let reg = RateRegistry::default();
    let q = query(Target::AlphaMetastable, rat(1, 5), "id", "const:5", 1000);
    let w = find_witness(&s, &q).unwrap();
    let rate = reg
        .run(
            &ctx,
            "a1",
            &RateQuery::new(q.epsilon.clone(), q.g.clone(), q.h.clone()),
        )
        .unwrap();
    assert!(assert_witness_dominated(&w, &rate));

    let zero_ctx = crate::rates::RateContext::new(
        s.gamma_context(),
        Arc::new(crate::rates::StubConst(0u32.into())),
    );
    let zero = reg
        .run(
            &zero_ctx,
            "b",
            &RateQuery::new(rat(1, 1), CounterFn::zero(), CounterFn::zero()),
        )
        .unwrap();
    assert_eq!(zero.value, BigNat::from(0u32));
    let at_zero = WitnessReport {
        target: Target::PhiStatement,
        found: true,
        minimal_n: Some(0),
        checked_up_to: 0,
        violations: vec![],
    };
    assert!(assert_witness_dominated(&at_zero, &zero));
    let at_five = WitnessReport {
        minimal_n: Some(5),
        checked_up_to: 5,
        ..at_zero.clone()
    };
    assert!(!assert_witness_dominated(&at_five, &zero));
    let missing = WitnessReport {
        found: false,
        minimal_n: None,
        ..at_zero
    };
    assert!(!assert_witness_dominated(&missing, &zero));
}

#[test]
fn identity_passes_every_proof_check() {
    let r = check_proof_inequalities(&identity_scenario(), &SweepBounds::default()).unwrap();
    for c in &r.checks {
        assert!(c.passed, "{c:?}");
        if c.applicable {
            assert!(c.instances > 0, "{}", c.name);
            assert!(c.worst_margin.unwrap() >= 0.0, "{c:?}");
        }
    }
}

#[test]
fn small_sweeps_pass_on_bundled_scenarios() {
    let bounds = SweepBounds {
        mn: 12,
        il: 6,
        samples: 200,
        ..SweepBounds::default()
    };
    for s in crate::dynamics::bundled_all() {
        let r = check_proof_inequalities(&s, &bounds).unwrap();
        assert!(r.all_passed(), "{}: {}", s.name, r.to_json());
        assert_eq!(
            r.check("hilbert_squares").unwrap().applicable,
            s.is_hilbert_wittmann()
        );
    }
}

#[test]
fn expanding_maps_are_rejected() {
    let s = Scenario::new(
        "stretch",
        Space::euclidean(1),
        Arc::new(AffineContraction {
            matrix: vec![vec![-1.5]],
            offset: vec![0.0],
            norm_bound: 1.0,
        }),
        vec![1e-6],
        rat(2, 1),
        Modulus::lp(rat(2, 1)).unwrap(),
        rat(1, 1),
        rat(2, 1),
        vec![0.0],
        "a1".into(),
    );
    assert!(s.is_err());
}

#[test]
fn monotone_structure_in_bundled_scenarios() {
    for s in crate::dynamics::bundled_all() {
        for c in check_monotone_structure(&s, 1000, 20).unwrap() {
            assert!(c.passed, "{}: {c:?}", s.name);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn phi_holds_for_smaller_counterfunctions(c1 in 0u64..6, c2 in 0u64..6, d1 in 0u64..6, d2 in 0u64..6) {
        let s = bundled("rotation").unwrap();
        let orbit = OrbitCache::for_scenario(&s);
        let (gbig, gsmall) = (c1.max(c2), c1.min(c2));
        let (hbig, hsmall) = (d1.max(d2), d1.min(d2));
        let big = query(Target::PhiStatement, rat(1, 4), &format!("add(id,const:{gbig})"), &format!("const:{hbig}"), 400);
        let w = find_witness_in(&orbit, &big, 8).unwrap();
        let at = w.minimal_n.unwrap();
        let small = query(Target::PhiStatement, rat(1, 4), &format!("add(id,const:{gsmall})"), &format!("const:{hsmall}"), 400);
        prop_assert!(violation_at(&orbit, &small, at).unwrap().is_none());
    }
}

//! Brute-force witnesses for the metastability statements, and sweeps over
//! the inequalities the rate constructions rest on.

mod inequalities;

pub use inequalities::{
    check_monotone_structure, check_nonlinearity, check_proof_inequalities, CheckReport,
    ProofReport, SweepBounds,
};

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::counterfn::CounterFn;
use crate::dynamics::{OrbitCache, Scenario, TOLERANCE};
use crate::error::{Error, Result};
use crate::numerics::{format_rational, rational_to_f64, BigNat, Rational};
use crate::rates::RateResult;

/// Violations kept in the JSON form of a report.
pub const VIOLATION_SAMPLE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    /// `|α^i_m − α^i_n| < ε` for `m, n ∈ [N, N+g(N)]`, `i ≤ h(N)`.
    AlphaMetastable,
    /// `‖T^l S_n T^n x − S_n T^n x‖ < ε` for `n ∈ [N, N+g(N)]`, `l ≤ h(N)`.
    PsiStatement,
    /// `‖S_m T^m x − S_n T^k x‖ < ε` for `m, n ∈ [N, N+g(N)]`, `k ≤ h(N)`.
    PhiStatement,
    /// The three norms of the two statements above and `‖T^l S_n T^k x − S_n T^k x‖`,
    /// for `m, n ∈ [N, N+g(N)]`, `k, l ≤ h(N)`.
    SimultaneousStatement,
}

impl Target {
    pub const ALL: [Target; 4] = [
        Target::AlphaMetastable,
        Target::PsiStatement,
        Target::PhiStatement,
        Target::SimultaneousStatement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Target::AlphaMetastable => "AlphaMetastable",
            Target::PsiStatement => "PsiStatement",
            Target::PhiStatement => "PhiStatement",
            Target::SimultaneousStatement => "SimultaneousStatement",
        }
    }

    /// Accepts the long names and `alpha`, `psi`, `phi`, `simultaneous`.
    pub fn parse(s: &str) -> Result<Self> {
        let t = match s.to_ascii_lowercase().as_str() {
            "alpha" | "alphametastable" => Target::AlphaMetastable,
            "psi" | "psistatement" => Target::PsiStatement,
            "phi" | "phistatement" => Target::PhiStatement,
            "simultaneous" | "simultaneousstatement" => Target::SimultaneousStatement,
            _ => {
                return Err(Error::invalid(format!(
                    "unknown target {s:?}; use alpha, psi, phi or simultaneous"
                )))
            }
        };
        Ok(t)
    }

    /// The rate whose theorem bounds this target's witnesses.
    pub fn rate_name(self) -> &'static str {
        match self {
            Target::AlphaMetastable => "a1",
            Target::PsiStatement => "psi",
            Target::PhiStatement => "phi",
            Target::SimultaneousStatement => "simultaneous",
        }
    }
}

impl Serialize for Target {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct WitnessQuery {
    pub target: Target,
    pub epsilon: Rational,
    pub g: CounterFn,
    pub h: CounterFn,
    /// Largest `N` scanned.
    pub cap: u64,
}

/// One tuple that breaks the statement at `N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    #[serde(rename = "N")]
    pub at: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    pub n: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i: Option<u64>,
    /// The norm that reached `ε`.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessReport {
    pub target: Target,
    pub found: bool,
    pub minimal_n: Option<u64>,
    pub checked_up_to: u64,
    /// One violation for every `N` below the witness, in order.
    pub violations: Vec<Violation>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    target: Target,
    found: bool,
    #[serde(rename = "minimal_N")]
    minimal_n: Option<u64>,
    checked_up_to: u64,
    violations_sample: &'a [Violation],
}

impl WitnessReport {
    /// The last violations before the witness, or before the cap.
    pub fn violations_sample(&self) -> &[Violation] {
        &self.violations[self.violations.len().saturating_sub(VIOLATION_SAMPLE)..]
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    fn json(&self) -> ReportJson<'_> {
        ReportJson {
            target: self.target,
            found: self.found,
            minimal_n: self.minimal_n,
            checked_up_to: self.checked_up_to,
            violations_sample: self.violations_sample(),
        }
    }
}

impl Serialize for WitnessReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.json().serialize(s)
    }
}

/// Largest orbit index the check at `N` touches, or `None` on overflow.
fn orbit_need(target: Target, n: u64, g: u64, h: u64) -> Option<u64> {
    let hi = n.checked_add(g)?;
    let means = hi.checked_mul(2)?;
    match target {
        Target::AlphaMetastable => hi.checked_add(h),
        Target::PsiStatement => Some(means),
        Target::PhiStatement | Target::SimultaneousStatement => Some(means.max(hi.checked_add(h)?)),
    }
}

struct Checker<'a> {
    orbit: &'a OrbitCache,
    target: Target,
    eps: f64,
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p - q).collect()
}

impl Checker<'_> {
    fn fails(&self, v: f64) -> bool {
        !(v < self.eps + TOLERANCE)
    }

    fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        self.orbit.space().norm(&sub(a, b))
    }

    /// `S_n T^k x`, with `S_0` read as `S_1`.
    fn mean(&self, n: u64, k: u64) -> Result<Vec<f64>> {
        self.orbit.cesaro0(n as usize, k as usize)
    }

    /// First violation at `N` in lexicographic order, if any.
    fn check(&self, at: u64, g: u64, h: u64) -> Result<Option<Violation>> {
        let (lo, hi) = (at, at + g);
        let blank = Violation {
            at,
            m: None,
            n: 0,
            k: None,
            l: None,
            i: None,
            value: 0.0,
        };
        match self.target {
            Target::AlphaMetastable => {
                for i in 0..=h {
                    let a: Vec<f64> = (lo..=hi)
                        .map(|n| self.orbit.alpha(n as usize, i as usize))
                        .collect::<Result<_>>()?;
                    let (min, max) = a.iter().enumerate().fold((0, 0), |(mi, ma), (j, v)| {
                        (
                            if *v < a[mi] { j } else { mi },
                            if *v > a[ma] { j } else { ma },
                        )
                    });
                    let d = a[max] - a[min];
                    if self.fails(d) {
                        let (m, n) = (lo + max as u64, lo + min as u64);
                        return Ok(Some(Violation {
                            m: Some(m),
                            n,
                            i: Some(i),
                            value: d,
                            ..blank
                        }));
                    }
                }
                Ok(None)
            }
            Target::PsiStatement => {
                for n in lo..=hi {
                    if let Some((l, d)) = self.drift(&self.mean(n, n)?, h) {
                        return Ok(Some(Violation {
                            n,
                            l: Some(l),
                            value: d,
                            ..blank
                        }));
                    }
                }
                Ok(None)
            }
            Target::PhiStatement | Target::SimultaneousStatement => {
                let diag: Vec<Vec<f64>> =
                    (lo..=hi).map(|m| self.mean(m, m)).collect::<Result<_>>()?;
                for n in lo..=hi {
                    if self.target == Target::SimultaneousStatement {
                        if let Some((l, d)) = self.drift(&diag[(n - lo) as usize], h) {
                            return Ok(Some(Violation {
                                n,
                                l: Some(l),
                                value: d,
                                ..blank
                            }));
                        }
                    }
                    for k in 0..=h {
                        let snk = self.mean(n, k)?;
                        for (j, smm) in diag.iter().enumerate() {
                            let d = self.dist(smm, &snk);
                            if self.fails(d) {
                                return Ok(Some(Violation {
                                    m: Some(lo + j as u64),
                                    n,
                                    k: Some(k),
                                    value: d,
                                    ..blank
                                }));
                            }
                        }
                        if self.target == Target::SimultaneousStatement {
                            if let Some((l, d)) = self.drift(&snk, h) {
                                return Ok(Some(Violation {
                                    n,
                                    k: Some(k),
                                    l: Some(l),
                                    value: d,
                                    ..blank
                                }));
                            }
                        }
                    }
                }
                Ok(None)
            }
        }
    }

    /// First `l ≤ h` with `‖T^l y − y‖` not below `ε`.
    fn drift(&self, y: &[f64], h: u64) -> Option<(u64, f64)> {
        let mut v = y.to_vec();
        for l in 0..=h {
            let d = self.dist(&v, y);
            if self.fails(d) {
                return Some((l, d));
            }
            v = self.orbit.operator().apply(&v);
        }
        None
    }
}

/// The target's predicate at a single `N`: `None` if it holds, otherwise
/// the first violating tuple.
pub fn violation_at(orbit: &OrbitCache, q: &WitnessQuery, at: u64) -> Result<Option<Violation>> {
    let g = q.g.eval_u64(at)?;
    let h = q.h.eval_u64(at)?;
    match orbit_need(q.target, at, g, h).filter(|&need| need <= orbit.cap() as u64) {
        Some(need) => orbit.ensure(need as usize)?,
        None => {
            return Err(Error::resource(format!(
                "N = {at}: the check reaches past the orbit cap {}",
                orbit.cap()
            )))
        }
    }
    Checker {
        orbit,
        target: q.target,
        eps: rational_to_f64(&q.epsilon),
    }
    .check(at, g, h)
}

/// Scans `N = 0, 1, …, cap` for the least `N` at which the target holds.
///
/// The scan runs in parallel blocks; the result does not depend on the
/// block size or on the number of workers.
pub fn find_witness(scenario: &Scenario, q: &WitnessQuery) -> Result<WitnessReport> {
    let orbit = OrbitCache::for_scenario(scenario);
    find_witness_in(&orbit, q, rayon::current_num_threads().max(1) * 4)
}

/// [`find_witness`] on a given orbit and scan block size.
pub fn find_witness_in(
    orbit: &OrbitCache,
    q: &WitnessQuery,
    block: usize,
) -> Result<WitnessReport> {
    if rational_to_f64(&q.epsilon) <= 0.0 || q.epsilon <= Rational::from_integer(0.into()) {
        return Err(Error::invalid(format!(
            "ε must be positive, got {}",
            format_rational(&q.epsilon)
        )));
    }
    if q.cap > orbit.cap() as u64 {
        return Err(Error::invalid(format!(
            "scan cap {} exceeds the orbit cap {}",
            q.cap,
            orbit.cap()
        )));
    }
    let checker = Checker {
        orbit,
        target: q.target,
        eps: rational_to_f64(&q.epsilon),
    };
    let block = block.max(1) as u64;
    let mut violations = Vec::new();
    let mut start = 0u64;
    while start <= q.cap {
        let end = (start + block - 1).min(q.cap);
        // Counterfunctions and orbit growth are sequential; the checks are not.
        let mut jobs = Vec::new();
        let mut overflow = None;
        for at in start..=end {
            let g = q.g.eval_u64(at)?;
            let h = q.h.eval_u64(at)?;
            match orbit_need(q.target, at, g, h).filter(|&need| need <= orbit.cap() as u64) {
                Some(need) => {
                    orbit.ensure(need as usize)?;
                    jobs.push((at, g, h));
                }
                None => {
                    overflow = Some(at);
                    break;
                }
            }
        }
        let outcomes: Vec<Result<Option<Violation>>> = jobs
            .par_iter()
            .map(|&(at, g, h)| checker.check(at, g, h))
            .collect();
        for (&(at, _, _), outcome) in jobs.iter().zip(outcomes) {
            match outcome? {
                None => {
                    return Ok(WitnessReport {
                        target: q.target,
                        found: true,
                        minimal_n: Some(at),
                        checked_up_to: at,
                        violations,
                    })
                }
                Some(v) => violations.push(v),
            }
        }
        if let Some(at) = overflow {
            return Err(Error::resource(format!(
                "N = {at}: the interval [N, N+g(N)] with h(N) reaches past the orbit cap {}",
                orbit.cap()
            )));
        }
        start = end + 1;
    }
    Ok(WitnessReport {
        target: q.target,
        found: false,
        minimal_n: None,
        checked_up_to: q.cap,
        violations,
    })
}

/// Whether the witness lies below the rate. A lower-bound rate can only
/// confirm domination, never refute it.
pub fn assert_witness_dominated(report: &WitnessReport, rate: &RateResult) -> bool {
    match report.minimal_n {
        Some(n) if report.found => BigNat::from(n) <= rate.value,
        _ => false,
    }
}

#[cfg(test)]
mod tests;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::counterfn::CounterFn;
use crate::dynamics::{OrbitCache, Scenario, TOLERANCE};
use crate::error::Result;
use crate::gamma::GammaContext;
use crate::numerics::{rat, rational_from_f64, rational_to_f64, Rational, Real, RoundingDirection};

/// Index ranges of the sweeps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepBounds {
    /// Bound on `m`, `n`, `k` (and `N` in the subsequence check).
    pub mn: usize,
    /// Bound on `i`, `l` and on the gap `k` of the Hilbert check.
    pub il: usize,
    /// Random convex combinations for the nonlinearity check.
    pub samples: usize,
    /// `γ̂` is replaced by this multiple of itself; anything above 1 is a
    /// deliberately wrong harness.
    pub gamma_factor: u32,
    pub seed: u64,
}

impl Default for SweepBounds {
    fn default() -> Self {
        SweepBounds {
            mn: 40,
            il: 20,
            samples: 1000,
            gamma_factor: 1,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: &'static str,
    pub applicable: bool,
    pub passed: bool,
    pub instances: u64,
    pub violations: u64,
    /// Least `rhs − lhs` seen; negative beyond `−10⁻⁹` is a violation.
    pub worst_margin: Option<f64>,
    pub sample: Vec<String>,
}

impl CheckReport {
    fn new(name: &'static str) -> Self {
        CheckReport {
            name,
            applicable: true,
            passed: true,
            instances: 0,
            violations: 0,
            worst_margin: None,
            sample: Vec::new(),
        }
    }

    fn skipped(name: &'static str) -> Self {
        CheckReport {
            applicable: false,
            ..CheckReport::new(name)
        }
    }

    fn record(&mut self, ok: bool, margin: f64, what: impl FnOnce() -> String) {
        self.instances += 1;
        self.worst_margin = Some(self.worst_margin.map_or(margin, |w| w.min(margin)));
        if !ok {
            self.violations += 1;
            self.passed = false;
            if self.sample.len() < 10 {
                self.sample.push(what());
            }
        }
    }

    fn compare(&mut self, lhs: f64, rhs: f64, what: impl FnOnce() -> String) {
        let m = rhs - lhs;
        self.record(m >= -TOLERANCE, m, || {
            format!("{} (lhs {lhs:e}, rhs {rhs:e})", what())
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProofReport {
    pub scenario: String,
    pub bounds: SweepBounds,
    pub checks: Vec<CheckReport>,
}

impl ProofReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Decides `factor·γ̂(t) ≤ rhs + 10⁻⁹`.
struct GammaJudge {
    ctx: GammaContext,
    factor: Rational,
}

impl GammaJudge {
    /// `(holds, rhs − factor·γ̂(t))`. An undecided comparison does not hold.
    fn holds(&self, t: f64, rhs: f64) -> Result<(bool, f64)> {
        let limit = rhs + TOLERANCE;
        if t <= 0.0 {
            return Ok((limit >= 0.0, rhs));
        }
        if limit < 0.0 {
            return Ok((false, rhs));
        }
        let cap = Real::from(rational_from_f64(limit)?);
        let scaled = |v: &Real| v.mul_rat(&self.factor, RoundingDirection::Up);
        let bound = self
            .ctx
            .gamma_diag_bound(&rational_from_f64(t)?, |u| scaled(u) <= cap)?;
        let v = scaled(bound.value());
        // An `AtMost` bound above the limit leaves the comparison undecided.
        Ok((v <= cap, rhs - v.to_f64()))
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p - q).collect()
}

/// Runs the five proof checks on one scenario.
pub fn check_proof_inequalities(s: &Scenario, bounds: &SweepBounds) -> Result<ProofReport> {
    let orbit = OrbitCache::for_scenario(s);
    let judge = GammaJudge {
        ctx: s.gamma_context(),
        factor: rat(bounds.gamma_factor as i64, 1),
    };
    let checks = vec![
        nonlinearity(s, &orbit, &judge, bounds)?,
        beta_gamma(&orbit, &judge, bounds)?,
        theta_recursion(s, &orbit, bounds)?,
        if s.is_hilbert_wittmann() {
            hilbert_squares(&orbit, bounds)?
        } else {
            CheckReport::skipped("hilbert_squares")
        },
        subsequence(&orbit, bounds)?,
    ];
    Ok(ProofReport {
        scenario: s.name.clone(),
        bounds: bounds.clone(),
        checks,
    })
}

/// Runs only the nonlinearity check.
pub fn check_nonlinearity(s: &Scenario, bounds: &SweepBounds) -> Result<CheckReport> {
    let orbit = OrbitCache::for_scenario(s);
    let judge = GammaJudge {
        ctx: s.gamma_context(),
        factor: rat(bounds.gamma_factor as i64, 1),
    };
    nonlinearity(s, &orbit, &judge, bounds)
}

/// `γ̂(‖T(Σλ_i x_i) − Σλ_i T x_i‖) ≤ max_{i,j}(‖x_i − x_j‖ − ‖Tx_i − Tx_j‖)` on
/// random convex combinations of up to eight orbit points.
fn nonlinearity(
    s: &Scenario,
    orbit: &OrbitCache,
    judge: &GammaJudge,
    b: &SweepBounds,
) -> Result<CheckReport> {
    let mut rep = CheckReport::new("nonlinearity");
    let mut rng = ChaCha8Rng::seed_from_u64(b.seed);
    let pool = 4 * b.mn.max(1);
    orbit.ensure(pool + 1)?;
    let op = orbit.operator();
    for _ in 0..b.samples {
        let k = rng.gen_range(1..=8usize);
        let idx: Vec<usize> = (0..k).map(|_| rng.gen_range(0..=pool)).collect();
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0f64) + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let lambda: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let xs: Vec<Vec<f64>> = idx.iter().map(|&i| orbit.point(i)).collect::<Result<_>>()?;
        let txs: Vec<Vec<f64>> = idx
            .iter()
            .map(|&i| orbit.point(i + 1))
            .collect::<Result<_>>()?;
        let comb = |vs: &[Vec<f64>]| {
            let mut out = vec![0.0; s.space.dim()];
            for (v, l) in vs.iter().zip(&lambda) {
                for (o, c) in out.iter_mut().zip(v) {
                    *o += l * c;
                }
            }
            out
        };
        let t = s.space.norm(&sub(&op.apply(&comb(&xs)), &comb(&txs)));
        let mut rhs = f64::NEG_INFINITY;
        for i in 0..k {
            for j in 0..k {
                rhs = rhs.max(s.space.dist(&xs[i], &xs[j]) - s.space.dist(&txs[i], &txs[j]));
            }
        }
        let (ok, margin) = judge.holds(t, rhs)?;
        rep.record(ok, margin, || {
            format!("points {idx:?}: γ̂({t:e}) above {rhs:e}")
        });
    }
    Ok(rep)
}

/// `γ̂(β^l_{m,n}) ≤ max{α^p_k − α^p_{l+k} : min{m,n} ≤ k < 2·max{m,n}, p < 2·max{m,n}}`.
fn beta_gamma(orbit: &OrbitCache, judge: &GammaJudge, b: &SweepBounds) -> Result<CheckReport> {
    let mut rep = CheckReport::new("beta_gamma");
    let top = 2 * b.mn;
    // alpha[p][k] = α^p_k
    let alpha: Vec<Vec<f64>> = (0..top)
        .map(|p| {
            (0..top + b.il)
                .map(|k| orbit.alpha(k, p))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    for l in 0..=b.il {
        // colmax[mx][k] = max_{p < 2mx} (α^p_k − α^p_{l+k})
        let mut colmax = vec![vec![f64::NEG_INFINITY; top]; b.mn + 1];
        for mx in 1..=b.mn {
            let prev = colmax[mx - 1].clone();
            colmax[mx] = prev;
            for p in 2 * (mx - 1)..2 * mx {
                for k in 0..top {
                    colmax[mx][k] = colmax[mx][k].max(alpha[p][k] - alpha[p][l + k]);
                }
            }
        }
        for m in 0..=b.mn {
            for n in m..=b.mn {
                let mx = n.max(m);
                let rhs = if mx == 0 {
                    f64::NEG_INFINITY
                } else {
                    colmax[mx][m.min(n)..2 * mx]
                        .iter()
                        .cloned()
                        .fold(f64::NEG_INFINITY, f64::max)
                };
                let beta = orbit.beta(m, n, l)?;
                if mx == 0 {
                    // Empty maximum: only β = 0 can satisfy it.
                    rep.record(beta == 0.0, 0.0, || format!("m = n = 0, l = {l}"));
                    continue;
                }
                let (ok, margin) = judge.holds(beta, rhs)?;
                rep.record(ok, margin, || {
                    format!("m = {m}, n = {n}, l = {l}: γ̂({beta:e}) above {rhs:e}")
                });
            }
        }
    }
    Ok(rep)
}

/// `θ_{m+n} ≤ θ_m + (m−1)/(m+n)·‖x−f‖ + 1/(m+n)·Σ_{i<m+n} β_m^{n+i}` for `m ≥ 1`.
fn theta_recursion(s: &Scenario, orbit: &OrbitCache, b: &SweepBounds) -> Result<CheckReport> {
    let mut rep = CheckReport::new("theta_recursion");
    let f = &s.fixed_point;
    let xf = s.space.dist(&s.x, f);
    let lmax = 3 * b.mn;
    for m in 1..=b.mn {
        // β_m^l = ‖S_m T^{l+m} x − T^l S_m T^m x‖
        let base = orbit.cesaro(m, m)?;
        let mut moved = base.clone();
        let mut beta = Vec::with_capacity(lmax + 1);
        for l in 0..=lmax {
            beta.push(s.space.dist(&orbit.cesaro(m, l + m)?, &moved));
            moved = orbit.operator().apply(&moved);
        }
        let theta_m = orbit.theta(m, f)?;
        for n in 0..=b.mn {
            let j = (m + n) as f64;
            let sum: f64 = (0..m + n).map(|i| beta[n + i]).sum();
            let rhs = theta_m + (m as f64 - 1.0) / j * xf + sum / j;
            let lhs = orbit.theta(m + n, f)?;
            rep.compare(lhs, rhs, || format!("m = {m}, n = {n}"));
        }
    }
    Ok(rep)
}

/// `(α^i_m)² − (α^i_{m+k})² ≤ 4(‖T^m x‖² − ‖T^{m+k+i} x‖²)`.
fn hilbert_squares(orbit: &OrbitCache, b: &SweepBounds) -> Result<CheckReport> {
    let mut rep = CheckReport::new("hilbert_squares");
    let sq = |i: usize| -> Result<f64> { Ok(orbit.space().norm(&orbit.point(i)?).powi(2)) };
    for m in 0..=b.mn {
        for k in 0..=b.mn {
            for i in 0..=b.il {
                let lhs = orbit.alpha(m, i)?.powi(2) - orbit.alpha(m + k, i)?.powi(2);
                let rhs = 4.0 * (sq(m)? - sq(m + k + i)?);
                rep.compare(lhs, rhs, || format!("m = {m}, k = {k}, i = {i}"));
            }
        }
    }
    Ok(rep)
}

/// Given `M ≥ N+g(N)` with `‖T^M x − T^N x‖ < ε/2`, checks
/// `|α^i_m − α^i_n| < ε` for `m, n ∈ [N, N+g(N)]`.
fn subsequence(orbit: &OrbitCache, b: &SweepBounds) -> Result<CheckReport> {
    let mut rep = CheckReport::new("subsequence");
    let gs = [
        CounterFn::identity(),
        CounterFn::constant(3u32),
        CounterFn::zero(),
    ];
    let sp = orbit.space();
    for eps in [rat(1, 2), rat(1, 4), rat(1, 10)] {
        let e = rational_to_f64(&eps);
        for g in &gs {
            for at in 0..=b.mn {
                let gn = g.eval_u64(at as u64)? as usize;
                let hi = at + gn;
                let xn = orbit.point(at)?;
                let mut found = None;
                for big in hi..=hi + 4 * b.mn {
                    if sp.dist(&orbit.point(big)?, &xn) < e / 2.0 {
                        found = Some(big);
                        break;
                    }
                }
                if found.is_none() {
                    continue;
                }
                for i in 0..=b.il {
                    let a: Vec<f64> = (at..=hi)
                        .map(|m| orbit.alpha(m, i))
                        .collect::<Result<_>>()?;
                    let spread = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                        - a.iter().cloned().fold(f64::INFINITY, f64::min);
                    rep.compare(spread, e, || {
                        format!("ε = {e}, N = {at}, M = {found:?}, i = {i}")
                    });
                }
            }
        }
    }
    Ok(rep)
}

/// `α^i_{n+1} ≤ α^i_n` and `θ^f_n ≤ b` for `n ≤ n_max`, `i ≤ i_max`.
pub fn check_monotone_structure(
    s: &Scenario,
    n_max: usize,
    i_max: usize,
) -> Result<Vec<CheckReport>> {
    let orbit = OrbitCache::for_scenario(s);
    let mut alpha = CheckReport::new("alpha_monotone");
    for i in 0..=i_max {
        let mut prev = orbit.alpha(0, i)?;
        for n in 1..=n_max {
            let cur = orbit.alpha(n, i)?;
            alpha.compare(cur, prev, || format!("n = {n}, i = {i}"));
            prev = cur;
        }
    }
    let mut theta = CheckReport::new("theta_bounded");
    let b = s.b_f64();
    for n in 1..=n_max {
        theta.compare(orbit.theta(n, &s.fixed_point)?, b, || format!("n = {n}"));
    }
    Ok(vec![alpha, theta])
}

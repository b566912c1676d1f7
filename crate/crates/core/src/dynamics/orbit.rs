use std::sync::{Arc, RwLock};

use super::operator::{Operator, TOLERANCE};
use super::Space;
use crate::error::{Error, Result};

/// Default number of orbit points a cache may hold.
pub const DEFAULT_ORBIT_CAP: usize = 200_000;

/// Error-free `a + b = s + e`.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Double-double accumulator, enough to difference prefix sums of `2·10⁵`
/// terms without losing the short averages.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn add(self, x: f64) -> Dd {
        let (s, e) = two_sum(self.hi, x);
        let (hi, lo) = two_sum(s, e + self.lo);
        Dd { hi, lo }
    }

    fn sub(self, o: Dd) -> f64 {
        let (s, e) = two_sum(self.hi, -o.hi);
        s + (e + (self.lo - o.lo))
    }
}

#[derive(Debug, Default)]
struct Filled {
    points: Vec<Vec<f64>>,
    /// `prefix[i] = Σ_{j<i} T^j x`.
    prefix: Vec<Vec<Dd>>,
}

/// The orbit `T^i x` and its prefix sums, filled on demand up to a cap.
///
/// Readers share the filled prefix; growth takes a short write lock and
/// recomputes nothing already stored.
#[derive(Debug)]
pub struct OrbitCache {
    op: Arc<dyn Operator>,
    space: Space,
    cap: usize,
    inner: RwLock<Filled>,
}

impl OrbitCache {
    pub fn new(op: Arc<dyn Operator>, space: Space, x: Vec<f64>, cap: usize) -> Result<Self> {
        space.check_vector(&x, "x")?;
        if cap == 0 {
            return Err(Error::invalid("orbit cap must be positive"));
        }
        let dim = space.dim();
        let filled = Filled {
            points: vec![x],
            prefix: vec![vec![Dd::default(); dim]],
        };
        Ok(OrbitCache {
            op,
            space,
            cap,
            inner: RwLock::new(filled),
        })
    }

    pub fn for_scenario(s: &super::Scenario) -> Self {
        OrbitCache::new(
            s.operator.clone(),
            s.space.clone(),
            s.x.clone(),
            DEFAULT_ORBIT_CAP,
        )
        .expect("valid scenario")
    }

    pub fn with_cap(s: &super::Scenario, cap: usize) -> Result<Self> {
        OrbitCache::new(s.operator.clone(), s.space.clone(), s.x.clone(), cap)
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn operator(&self) -> &Arc<dyn Operator> {
        &self.op
    }

    /// Makes `T^i x` available for every `i ≤ last`.
    pub fn ensure(&self, last: usize) -> Result<()> {
        if last > self.cap {
            return Err(Error::resource(format!(
                "orbit index {last} exceeds the cap {}",
                self.cap
            )));
        }
        if self.inner.read().expect("orbit lock").points.len() > last {
            return Ok(());
        }
        let mut f = self.inner.write().expect("orbit lock");
        while f.points.len() <= last {
            let prev = f.points.last().expect("nonempty");
            let next = self.op.apply(prev);
            let sums = f
                .prefix
                .last()
                .expect("nonempty")
                .iter()
                .zip(prev)
                .map(|(s, v)| s.add(*v))
                .collect();
            f.points.push(next);
            f.prefix.push(sums);
        }
        Ok(())
    }

    /// `T^i x`.
    pub fn point(&self, i: usize) -> Result<Vec<f64>> {
        self.ensure(i)?;
        Ok(self.inner.read().expect("orbit lock").points[i].clone())
    }

    /// `S_n T^k x = (1/n)·Σ_{i<n} T^{k+i} x`.
    pub fn cesaro(&self, n: usize, k: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::domain("Cesàro mean needs n ≥ 1"));
        }
        let end = n
            .checked_add(k)
            .ok_or_else(|| Error::resource("orbit index overflows"))?;
        self.ensure(end)?;
        let f = self.inner.read().expect("orbit lock");
        Ok(f.prefix[end]
            .iter()
            .zip(&f.prefix[k])
            .map(|(a, b)| a.sub(*b) / n as f64)
            .collect())
    }

    /// `S_n T^k x` with `S_0` read as `S_1`.
    pub fn cesaro0(&self, n: usize, k: usize) -> Result<Vec<f64>> {
        self.cesaro(n.max(1), k)
    }

    /// `T^l y` for an arbitrary point.
    pub fn iterate_point(&self, y: &[f64], l: usize) -> Vec<f64> {
        let mut v = y.to_vec();
        for _ in 0..l {
            v = self.op.apply(&v);
        }
        v
    }

    /// `α^i_n = ‖T^n x − T^{n+i} x‖`.
    pub fn alpha(&self, n: usize, i: usize) -> Result<f64> {
        let j = n
            .checked_add(i)
            .ok_or_else(|| Error::resource("orbit index overflows"))?;
        self.ensure(j)?;
        let f = self.inner.read().expect("orbit lock");
        Ok(self.space.dist(&f.points[n], &f.points[j]))
    }

    /// `β^l_{m,n}`, zero when `m = 0` or `n = 0`.
    pub fn beta(&self, m: usize, n: usize, l: usize) -> Result<f64> {
        if m == 0 || n == 0 {
            return Ok(0.0);
        }
        let a = self.cesaro(m, l + m)?;
        let b = self.cesaro(n, l + n)?;
        let u = self.cesaro(m, m)?;
        let v = self.cesaro(n, n)?;
        let mid: Vec<f64> = u.iter().zip(&v).map(|(p, q)| (p + q) / 2.0).collect();
        let tmid = self.iterate_point(&mid, l);
        let d: Vec<f64> = a
            .iter()
            .zip(&b)
            .zip(&tmid)
            .map(|((p, q), t)| (p + q) / 2.0 - t)
            .collect();
        Ok(self.space.norm(&d))
    }

    /// `β^l_n = β^l_{n,n}`.
    pub fn beta_diag(&self, n: usize, l: usize) -> Result<f64> {
        self.beta(n, n, l)
    }

    /// `θ^f_n = ‖S_n T^n x − f‖` for a fixed point `f`.
    pub fn theta(&self, n: usize, f: &[f64]) -> Result<f64> {
        self.space.check_vector(f, "fixed point")?;
        if self.space.dist(&self.op.apply(f), f) > TOLERANCE {
            return Err(Error::invalid(format!("{f:?} is not a fixed point")));
        }
        let s = self.cesaro(n, n)?;
        Ok(self.space.dist(&s, f))
    }
}

/// From-scratch evaluations without a cache, used as a cross-check.
pub mod direct {
    use super::Operator;

    pub fn point(op: &dyn Operator, x: &[f64], i: usize) -> Vec<f64> {
        let mut v = x.to_vec();
        for _ in 0..i {
            v = op.apply(&v);
        }
        v
    }

    pub fn cesaro(op: &dyn Operator, x: &[f64], n: usize, k: usize) -> Vec<f64> {
        let mut v = point(op, x, k);
        let mut sum = vec![0.0; x.len()];
        for _ in 0..n {
            for (s, c) in sum.iter_mut().zip(&v) {
                *s += c;
            }
            v = op.apply(&v);
        }
        sum.iter().map(|s| s / n as f64).collect()
    }
}

//! Nonexpansive operators on `(ℝ^d, ‖·‖_p)`, their orbits and Cesàro
//! means, and the quantities `α`, `β`, `θ` built from them.
//!
//! Everything here runs in `f64`; inequalities are checked with the single
//! slack [`TOLERANCE`].

mod operator;
mod orbit;
mod scenario;
mod space;

pub use operator::{
    AffineContraction, AveragedPermutation, Operator, OperatorRegistry, ProjectedRotation,
    Rotation, TOLERANCE,
};
pub use orbit::{direct, OrbitCache, DEFAULT_ORBIT_CAP};
pub use scenario::{bundled, bundled_all, bundled_names, Scenario};
pub use space::{Space, SpaceSpec};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Worst `‖x − y‖ − ‖Tx − Ty‖` over random pairs drawn around the orbit.
pub fn nonexpansive_margin(s: &Scenario, pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..pairs {
        let (x, y) = (domain_sample(s, &mut rng), domain_sample(s, &mut rng));
        let m = s.space.dist(&x, &y) - s.space.dist(&s.operator.apply(&x), &s.operator.apply(&y));
        worst = worst.min(m);
    }
    worst
}

/// Worst `‖x + y‖ − ‖Tx + Ty‖` over random pairs, and `‖T0‖`.
pub fn wittmann_margin(s: &Scenario, pairs: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..pairs {
        let (x, y) = (domain_sample(s, &mut rng), domain_sample(s, &mut rng));
        let (tx, ty) = (s.operator.apply(&x), s.operator.apply(&y));
        let plus = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p + q).collect::<Vec<_>>();
        worst = worst.min(s.space.norm(&plus(&x, &y)) - s.space.norm(&plus(&tx, &ty)));
    }
    (
        worst,
        s.space.norm(&s.operator.apply(&vec![0.0; s.space.dim()])),
    )
}

/// A point of the domain: an orbit point of a random start, so box
/// constraints are respected.
fn domain_sample(s: &Scenario, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let r = s.b_f64() / 2.0;
    let raw: Vec<f64> = (0..s.space.dim())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let n = s.space.norm(&raw);
    let scale = if n > 0.0 {
        r * rng.gen_range(0.0..1.0) / n
    } else {
        0.0
    };
    let v: Vec<f64> = raw.iter().map(|c| c * scale).collect();
    s.operator.apply(&v)
}

use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{format_rational, parse_rational, rational_to_f64, Rational};

/// `ℝ^dim` with an `ℓ^p` norm, `1 ≤ p < ∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct Space {
    dim: usize,
    p: Rational,
    pf: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub dim: usize,
    pub p: String,
}

impl Space {
    pub fn new(dim: usize, p: Rational) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("space dimension must be positive"));
        }
        if p < Rational::one() {
            return Err(Error::invalid(format!(
                "norm exponent must be at least 1, got {}",
                format_rational(&p)
            )));
        }
        let pf = rational_to_f64(&p);
        Ok(Space { dim, p, pf })
    }

    pub fn euclidean(dim: usize) -> Self {
        Space::new(dim, Rational::from_integer(2.into())).expect("valid")
    }

    pub fn from_spec(spec: &SpaceSpec) -> Result<Self> {
        Space::new(spec.dim, parse_rational(&spec.p)?)
    }

    pub fn to_spec(&self) -> SpaceSpec {
        SpaceSpec {
            dim: self.dim,
            p: format_rational(&self.p),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> &Rational {
        &self.p
    }

    pub fn is_euclidean(&self) -> bool {
        self.p.is_integer() && self.p.to_integer().to_u32() == Some(2)
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        if self.pf == 2.0 {
            return v.iter().map(|x| x * x).sum::<f64>().sqrt();
        }
        if self.pf == 1.0 {
            return v.iter().map(|x| x.abs()).sum();
        }
        // Scale by the max coordinate to avoid overflow in |x|^p.
        let m = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if m == 0.0 {
            return 0.0;
        }
        m * v
            .iter()
            .map(|x| (x.abs() / m).powf(self.pf))
            .sum::<f64>()
            .powf(1.0 / self.pf)
    }

    pub fn dist(&self, x: &[f64], y: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        self.norm(&d)
    }

    pub fn check_vector(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::invalid(format!(
                "{what} has length {}, expected {}",
                v.len(),
                self.dim
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!(
                "{what} has a non-finite coordinate"
            )));
        }
        Ok(())
    }
}

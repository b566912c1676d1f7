use std::sync::Arc;

use num_traits::Signed;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::operator::{Operator, OperatorRegistry, TOLERANCE};
use super::{Space, SpaceSpec};
use crate::error::{Error, Result};
use crate::gamma::GammaContext;
use crate::moduli::{Modulus, ModulusSpec};
use crate::numerics::{format_rational, parse_rational, rat, rational_to_f64, Rational};
use crate::rates::{BaseRegistry, RateContext};

/// A space, an operator with a known fixed point, a start `x` and the
/// constants the rates need.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub space: Space,
    pub operator: Arc<dyn Operator>,
    pub x: Vec<f64>,
    pub b: Rational,
    pub modulus: Modulus,
    pub c: Rational,
    pub q: Rational,
    pub fixed_point: Vec<f64>,
    /// Base rate descriptor, as for `--base`.
    pub base: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    space: SpaceSpec,
    operator: Value,
    x: Vec<f64>,
    b: String,
    modulus: ModulusSpec,
    c: String,
    q: String,
    fixed_point: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base: Option<String>,
}

const BUNDLED: [(&str, &str); 4] = [
    ("rotation", include_str!("../../scenarios/rotation.json")),
    (
        "averaged_permutation",
        include_str!("../../scenarios/averaged_permutation.json"),
    ),
    (
        "affine_contraction",
        include_str!("../../scenarios/affine_contraction.json"),
    ),
    (
        "projected_rotation",
        include_str!("../../scenarios/projected_rotation.json"),
    ),
];

/// Names of the scenarios shipped with the crate.
pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

/// A shipped scenario by name, with or without the `.json` suffix.
pub fn bundled(name: &str) -> Result<Scenario> {
    let stem = name.strip_suffix(".json").unwrap_or(name);
    let (n, src) = BUNDLED.iter().find(|(n, _)| *n == stem).ok_or_else(|| {
        Error::invalid(format!(
            "no bundled scenario {name:?}; known: {}",
            bundled_names().join(", ")
        ))
    })?;
    Scenario::from_json(n, src)
}

pub fn bundled_all() -> Vec<Scenario> {
    BUNDLED
        .iter()
        .map(|(n, src)| Scenario::from_json(n, src).expect("bundled scenario is valid"))
        .collect()
}

impl Scenario {
    pub fn from_json(name: &str, src: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(src)
            .map_err(|e| Error::invalid(format!("scenario {name}: {e}")))?;
        let space = Space::from_spec(&file.space)?;
        let operator = OperatorRegistry::default().build(&file.operator)?;
        Scenario::new(
            name,
            space,
            operator,
            file.x,
            parse_rational(&file.b)?,
            Modulus::from_spec(&file.modulus)?,
            parse_rational(&file.c)?,
            parse_rational(&file.q)?,
            file.fixed_point,
            file.base.unwrap_or_else(|| "a1".to_string()),
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        space: Space,
        operator: Arc<dyn Operator>,
        x: Vec<f64>,
        b: Rational,
        modulus: Modulus,
        c: Rational,
        q: Rational,
        fixed_point: Vec<f64>,
        base: String,
    ) -> Result<Self> {
        space.check_vector(&x, "x")?;
        space.check_vector(&fixed_point, "fixed point")?;
        if operator.dim() != space.dim() {
            return Err(Error::invalid(format!(
                "{} acts on dimension {}, the space has {}",
                operator.kind(),
                operator.dim(),
                space.dim()
            )));
        }
        if operator.requires_euclidean() && !space.is_euclidean() {
            return Err(Error::invalid(format!(
                "{} is only nonexpansive for p = 2",
                operator.kind()
            )));
        }
        if !b.is_positive() {
            return Err(Error::invalid("diameter bound b must be positive"));
        }
        let radius = rational_to_f64(&(&b / rat(2, 1)));
        if space.norm(&x) > radius + TOLERANCE {
            return Err(Error::invalid(format!(
                "‖x‖ = {} exceeds b/2 = {radius}",
                space.norm(&x)
            )));
        }
        if let Some(p) = modulus.lp_exponent() {
            if p != space.p() {
                return Err(Error::invalid(format!(
                    "modulus is for p = {}, the space has p = {}",
                    format_rational(p),
                    format_rational(space.p())
                )));
            }
        }
        let tf = operator.apply(&fixed_point);
        if space.dist(&tf, &fixed_point) > TOLERANCE {
            return Err(Error::invalid(format!(
                "declared fixed point {fixed_point:?} is moved to {tf:?}"
            )));
        }
        operator.validate(&space)?;
        // Fail early on bad constants.
        GammaContext::new(b.clone(), modulus.clone(), c.clone(), q.clone())?;
        Ok(Scenario {
            name: name.to_string(),
            space,
            operator,
            x,
            b,
            modulus,
            c,
            q,
            fixed_point,
            base,
        })
    }

    pub fn gamma_context(&self) -> GammaContext {
        GammaContext::new(
            self.b.clone(),
            self.modulus.clone(),
            self.c.clone(),
            self.q.clone(),
        )
        .expect("validated on construction")
    }

    /// Rate context for this scenario's constants and base rate.
    pub fn rate_context(&self) -> Result<RateContext> {
        let base = BaseRegistry::default().build(&self.base, &self.b)?;
        Ok(RateContext::new(self.gamma_context(), base))
    }

    pub fn b_f64(&self) -> f64 {
        rational_to_f64(&self.b)
    }

    /// Euclidean and satisfying `T0 = 0`, `‖Tx + Ty‖ ≤ ‖x + y‖`.
    pub fn is_hilbert_wittmann(&self) -> bool {
        self.space.is_euclidean() && self.operator.satisfies_wittmann()
    }

    pub fn to_json(&self) -> String {
        let file = ScenarioFile {
            space: self.space.to_spec(),
            operator: self.operator.to_json(),
            x: self.x.clone(),
            b: format_rational(&self.b),
            modulus: self.modulus.to_spec(),
            c: format_rational(&self.c),
            q: format_rational(&self.q),
            fixed_point: self.fixed_point.clone(),
            base: Some(self.base.clone()),
        };
        serde_json::to_string_pretty(&file).expect("scenario serializes")
    }
}

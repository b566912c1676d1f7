use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Space;
use crate::error::{Error, Result};
use crate::numerics::{parse_rational, rational_to_f64, Rational};

/// Slack for every floating-point inequality on orbits.
pub const TOLERANCE: f64 = 1e-9;

/// A nonexpansive self-map of a subset of `ℝ^dim`.
pub trait Operator: Send + Sync + std::fmt::Debug {
    fn kind(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    /// Linear maps commute with averaging.
    fn is_linear(&self) -> bool;
    /// `T0 = 0` and `‖Tx + Ty‖ ≤ ‖x + y‖` on the domain.
    fn satisfies_wittmann(&self) -> bool;
    /// Only meaningful for the Euclidean norm.
    fn requires_euclidean(&self) -> bool {
        false
    }
    /// Checks that need the norm, such as declared certificates.
    fn validate(&self, _space: &Space) -> Result<()> {
        Ok(())
    }
    /// Parameters as they appear under `"operator"` in a scenario file.
    fn to_json(&self) -> Value;
}

fn check_len(v: &[f64], dim: usize, what: &str) -> Result<()> {
    if v.len() != dim || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!(
            "{what} must be {dim} finite numbers"
        )));
    }
    Ok(())
}

fn rotate(angle: f64, x: &[f64]) -> Vec<f64> {
    let (s, c) = angle.sin_cos();
    vec![c * x[0] - s * x[1], s * x[0] + c * x[1]]
}

/// Rotation of the Euclidean plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub angle: f64,
}

impl Operator for Rotation {
    fn kind(&self) -> &'static str {
        "rotation"
    }

    fn dim(&self) -> usize {
        2
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        rotate(self.angle, x)
    }

    fn is_linear(&self) -> bool {
        true
    }

    fn satisfies_wittmann(&self) -> bool {
        true
    }

    fn requires_euclidean(&self) -> bool {
        true
    }

    fn to_json(&self) -> Value {
        serde_json::json!({ "type": self.kind(), "angle": self.angle })
    }
}

/// `x ↦ (1−λ)x + λ·Px` for a coordinate permutation `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedPermutation {
    lambda: Rational,
    lf: f64,
    permutation: Vec<usize>,
}

impl AveragedPermutation {
    pub fn new(lambda: Rational, permutation: Vec<usize>) -> Result<Self> {
        if lambda <= Rational::from_integer(0.into()) || lambda > Rational::from_integer(1.into()) {
            return Err(Error::invalid("averaging weight λ must lie in (0, 1]"));
        }
        let mut seen = vec![false; permutation.len()];
        for &p in &permutation {
            if p >= seen.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::invalid(format!(
                    "{permutation:?} is not a permutation"
                )));
            }
        }
        if permutation.is_empty() {
            return Err(Error::invalid("permutation must be nonempty"));
        }
        Ok(AveragedPermutation {
            lf: rational_to_f64(&lambda),
            lambda,
            permutation,
        })
    }
}

#[derive(Deserialize)]
struct AveragedPermutationSpec {
    lambda: String,
    permutation: Vec<usize>,
}

impl Operator for AveragedPermutation {
    fn kind(&self) -> &'static str {
        "averaged_permutation"
    }

    fn dim(&self) -> usize {
        self.permutation.len()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        // (Px)_i = x_{π(i)}
        self.permutation
            .iter()
            .enumerate()
            .map(|(i, &p)| (1.0 - self.lf) * x[i] + self.lf * x[p])
            .collect()
    }

    fn is_linear(&self) -> bool {
        true
    }

    fn satisfies_wittmann(&self) -> bool {
        true
    }

    fn to_json(&self) -> Value {
        serde_json::json!({
            "type": self.kind(),
            "lambda": crate::numerics::format_rational(&self.lambda),
            "permutation": self.permutation,
        })
    }
}

/// `x ↦ Mx + c` with a declared bound `‖M‖ ≤ norm_bound ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineContraction {
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    pub norm_bound: f64,
}

impl AffineContraction {
    pub fn new(matrix: Vec<Vec<f64>>, offset: Vec<f64>, norm_bound: f64) -> Result<Self> {
        let dim = offset.len();
        if dim == 0 {
            return Err(Error::invalid("affine map needs a nonempty offset"));
        }
        check_len(&offset, dim, "offset")?;
        if matrix.len() != dim {
            return Err(Error::invalid(format!("matrix must have {dim} rows")));
        }
        for row in &matrix {
            check_len(row, dim, "matrix row")?;
        }
        if !(0.0..=1.0).contains(&norm_bound) {
            return Err(Error::invalid(format!(
                "operator-norm certificate {norm_bound} must lie in [0, 1]"
            )));
        }
        Ok(AffineContraction {
            matrix,
            offset,
            norm_bound,
        })
    }

    pub fn identity(dim: usize) -> Self {
        let matrix = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        AffineContraction {
            matrix,
            offset: vec![0.0; dim],
            norm_bound: 1.0,
        }
    }

    /// Samples `‖Mv‖ ≤ norm_bound·‖v‖` in the given norm.
    pub fn check_certificate(&self, space: &Space) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6d65_7461);
        let zero = vec![0.0; self.offset.len()];
        for _ in 0..1000 {
            let v: Vec<f64> = (0..self.offset.len())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let mv: Vec<f64> = self
                .apply(&v)
                .iter()
                .zip(&self.apply(&zero))
                .map(|(a, b)| a - b)
                .collect();
            if space.norm(&mv) > self.norm_bound * space.norm(&v) + TOLERANCE {
                return Err(Error::invalid(format!(
                    "matrix exceeds its declared operator-norm bound {} at {v:?}",
                    self.norm_bound
                )));
            }
        }
        Ok(())
    }
}

impl Operator for AffineContraction {
    fn kind(&self) -> &'static str {
        "affine_contraction"
    }

    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .zip(&self.offset)
            .map(|(row, c)| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + c)
            .collect()
    }

    fn is_linear(&self) -> bool {
        self.offset.iter().all(|&c| c == 0.0)
    }

    fn satisfies_wittmann(&self) -> bool {
        self.is_linear()
    }

    fn validate(&self, space: &Space) -> Result<()> {
        self.check_certificate(space)
    }

    fn to_json(&self) -> Value {
        serde_json::json!({
            "type": self.kind(),
            "matrix": self.matrix,
            "offset": self.offset,
            "norm_bound": self.norm_bound,
        })
    }
}

/// Rotation of the plane followed by the nearest-point projection onto a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedRotation {
    pub angle: f64,
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
}

impl ProjectedRotation {
    pub fn new(angle: f64, bounds: Vec<[f64; 2]>) -> Result<Self> {
        if bounds.len() != 2
            || bounds
                .iter()
                .any(|[lo, hi]| !(lo <= hi) || !lo.is_finite() || !hi.is_finite())
        {
            return Err(Error::invalid(
                "projected rotation needs two finite coordinate intervals lo ≤ hi",
            ));
        }
        if !angle.is_finite() {
            return Err(Error::invalid("rotation angle must be finite"));
        }
        Ok(ProjectedRotation { angle, bounds })
    }

    fn symmetric(&self) -> bool {
        self.bounds.iter().all(|[lo, hi]| *lo == -*hi)
    }
}

impl Operator for ProjectedRotation {
    fn kind(&self) -> &'static str {
        "projected_rotation"
    }

    fn dim(&self) -> usize {
        2
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        rotate(self.angle, x)
            .iter()
            .zip(&self.bounds)
            .map(|(v, [lo, hi])| v.clamp(*lo, *hi))
            .collect()
    }

    fn is_linear(&self) -> bool {
        false
    }

    fn satisfies_wittmann(&self) -> bool {
        // Odd on a symmetric box.
        self.symmetric()
    }

    fn requires_euclidean(&self) -> bool {
        true
    }

    fn to_json(&self) -> Value {
        serde_json::json!({ "type": self.kind(), "angle": self.angle, "box": self.bounds })
    }
}

type OperatorFactory = fn(Value) -> Result<Arc<dyn Operator>>;

fn parse<T: serde::de::DeserializeOwned>(v: Value, kind: &str) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::invalid(format!("{kind} operator: {e}")))
}

/// Operators by their scenario `"type"`.
pub struct OperatorRegistry {
    entries: Vec<(&'static str, OperatorFactory)>,
}

impl Default for OperatorRegistry {
    fn default() -> Self {
        let mut r = OperatorRegistry {
            entries: Vec::new(),
        };
        r.register("rotation", |v| {
            let op: Rotation = parse(v, "rotation")?;
            if !op.angle.is_finite() {
                return Err(Error::invalid("rotation angle must be finite"));
            }
            Ok(Arc::new(op))
        });
        r.register("averaged_permutation", |v| {
            let s: AveragedPermutationSpec = parse(v, "averaged_permutation")?;
            Ok(Arc::new(AveragedPermutation::new(
                parse_rational(&s.lambda)?,
                s.permutation,
            )?))
        });
        r.register("affine_contraction", |v| {
            let op: AffineContraction = parse(v, "affine_contraction")?;
            Ok(Arc::new(AffineContraction::new(
                op.matrix,
                op.offset,
                op.norm_bound,
            )?))
        });
        r.register("projected_rotation", |v| {
            let op: ProjectedRotation = parse(v, "projected_rotation")?;
            Ok(Arc::new(ProjectedRotation::new(op.angle, op.bounds)?))
        });
        r
    }
}

impl OperatorRegistry {
    pub fn register(&mut self, kind: &'static str, factory: OperatorFactory) {
        self.entries.retain(|(k, _)| *k != kind);
        self.entries.push((kind, factory));
    }

    pub fn kinds(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(k, _)| *k).collect()
    }

    pub fn build(&self, spec: &Value) -> Result<Arc<dyn Operator>> {
        let kind = spec
            .get("type")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::invalid("operator needs a string \"type\""))?;
        let factory = self
            .entries
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, f)| f)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown operator {kind:?}; known: {}",
                    self.kinds().join(", ")
                ))
            })?;
        let mut params = spec.clone();
        params
            .as_object_mut()
            .expect("checked object")
            .remove("type");
        factory(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rat;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn rotation_quarter_turn() {
        let r = Rotation {
            angle: std::f64::consts::FRAC_PI_2,
        };
        assert!(close(&r.apply(&[1.0, 0.0]), &[0.0, 1.0]));
    }

    #[test]
    fn averaged_swap() {
        let t = AveragedPermutation::new(rat(1, 2), vec![1, 0]).unwrap();
        assert_eq!(t.apply(&[1.0, 0.0]), vec![0.5, 0.5]);
        assert_eq!(t.apply(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert!(AveragedPermutation::new(rat(0, 1), vec![1, 0]).is_err());
        assert!(AveragedPermutation::new(rat(3, 2), vec![1, 0]).is_err());
        assert!(AveragedPermutation::new(rat(1, 2), vec![1, 1]).is_err());
    }

    #[test]
    fn projection_clamps() {
        let t = ProjectedRotation::new(0.0, vec![[-0.5, 0.5], [-1.0, 1.0]]).unwrap();
        assert_eq!(t.apply(&[0.9, -2.0]), vec![0.5, -1.0]);
        assert!(t.satisfies_wittmann());
        assert!(ProjectedRotation::new(0.0, vec![[1.0, 0.0], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn affine_certificate() {
        let sp = Space::euclidean(2);
        let ok = AffineContraction::new(
            vec![vec![0.5, -0.5], vec![0.5, 0.5]],
            vec![0.25, 0.0],
            0.7072,
        )
        .unwrap();
        ok.check_certificate(&sp).unwrap();
        let lying =
            AffineContraction::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0], 0.5)
                .unwrap();
        assert!(lying.check_certificate(&sp).is_err());
        assert!(AffineContraction::new(vec![vec![1.0]], vec![0.0], 1.5).is_err());
    }

    #[test]
    fn registry_round_trips() {
        let reg = OperatorRegistry::default();
        let ops: Vec<Arc<dyn Operator>> = vec![
            Arc::new(Rotation { angle: 1.0 }),
            Arc::new(AveragedPermutation::new(rat(1, 3), vec![2, 0, 1]).unwrap()),
            Arc::new(AffineContraction::identity(3)),
            Arc::new(ProjectedRotation::new(1.0, vec![[-0.6, 0.6], [-0.6, 0.6]]).unwrap()),
        ];
        for op in ops {
            let again = reg.build(&op.to_json()).unwrap();
            assert_eq!(again.to_json(), op.to_json());
        }
        assert!(reg.build(&serde_json::json!({"type": "shear"})).is_err());
        assert!(reg.build(&serde_json::json!({"angle": 1.0})).is_err());
    }

    fn arb_point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..1.0, dim)
    }

    proptest! {
        #[test]
        fn nonexpansive_and_wittmann(x in arb_point(2), y in arb_point(2), angle in -4.0f64..4.0) {
            let sp = Space::euclidean(2);
            let ops: Vec<Box<dyn Operator>> = vec![
                Box::new(Rotation { angle }),
                Box::new(ProjectedRotation::new(angle, vec![[-0.6, 0.6], [-0.6, 0.6]]).unwrap()),
                Box::new(AveragedPermutation::new(rat(1, 2), vec![1, 0]).unwrap()),
            ];
            for op in &ops {
                let (tx, ty) = (op.apply(&x), op.apply(&y));
                prop_assert!(sp.dist(&tx, &ty) <= sp.dist(&x, &y) + TOLERANCE);
                if op.satisfies_wittmann() {
                    let s: Vec<f64> = tx.iter().zip(&ty).map(|(a, b)| a + b).collect();
                    let s0: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
                    prop_assert!(sp.norm(&s) <= sp.norm(&s0) + TOLERANCE);
                    prop_assert!(sp.norm(&op.apply(&[0.0, 0.0])) <= TOLERANCE);
                }
            }
        }

        #[test]
        fn averaged_permutation_nonexpansive_in_lp(x in arb_point(3), y in arb_point(3)) {
            let sp = Space::new(3, rat(3, 1)).unwrap();
            let op = AveragedPermutation::new(rat(1, 2), vec![1, 2, 0]).unwrap();
            prop_assert!(sp.dist(&op.apply(&x), &op.apply(&y)) <= sp.dist(&x, &y) + TOLERANCE);
        }
    }
}

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::counterfn::Eval;
use crate::numerics::{decimal_digits, format_rational, leading_digits, BigNat, Rational};

/// Values longer than this are reported by length and preview only.
pub const MAX_VALUE_DIGITS: u64 = 1_000_000;
/// Trace entries keep full values only up to this length.
pub const MAX_TRACE_DIGITS: u64 = 1_000_000;
pub const PREVIEW_DIGITS: u64 = 32;

/// A natural as it appears in a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NatSummary {
    pub exact: bool,
    pub digits: u64,
    pub value: Option<String>,
    pub preview: String,
}

impl NatSummary {
    pub fn of(e: &Eval) -> Self {
        let digits = decimal_digits(&e.value);
        let value = (digits <= MAX_TRACE_DIGITS).then(|| e.value.to_string());
        NatSummary {
            exact: e.exact,
            digits,
            value,
            preview: leading_digits(&e.value, PREVIEW_DIGITS),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub combinator: String,
    pub epsilon: String,
    pub fields: BTreeMap<String, Value>,
}

/// A computed rate. `value` is exact unless `exact` is false, in which case
/// it is a certified lower bound.
#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    pub rate: String,
    pub epsilon: Rational,
    pub value: BigNat,
    pub exact: bool,
    pub trace: Vec<TraceStep>,
}

#[derive(Serialize)]
struct Json<'a> {
    rate: &'a str,
    epsilon: String,
    exact: bool,
    value_digits: u64,
    value: Option<String>,
    value_preview: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    lower_bound: Option<String>,
    trace: &'a [TraceStep],
}

impl RateResult {
    pub fn digit_count(&self) -> u64 {
        decimal_digits(&self.value)
    }

    pub fn eval(&self) -> Eval {
        Eval {
            value: self.value.clone(),
            exact: self.exact,
        }
    }

    pub fn step(&self, combinator: &str) -> Option<&TraceStep> {
        self.trace.iter().find(|s| s.combinator == combinator)
    }

    fn doc(&self) -> Json<'_> {
        let digits = self.digit_count();
        let full = (digits <= MAX_VALUE_DIGITS).then(|| self.value.to_string());
        let (value, lower_bound) = if self.exact {
            (full, None)
        } else {
            (None, full)
        };
        Json {
            rate: &self.rate,
            epsilon: format_rational(&self.epsilon),
            exact: self.exact,
            value_digits: digits,
            value,
            value_preview: leading_digits(&self.value, PREVIEW_DIGITS),
            lower_bound,
            trace: &self.trace,
        }
    }

    pub fn to_json_value(&self) -> Value {
        serde_json::to_value(self.doc()).expect("rate result serializes")
    }

    /// Pretty JSON, keys in declaration order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.doc()).expect("rate result serializes")
    }
}

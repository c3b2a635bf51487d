//! Report assembly. Every number is written as a shortest round-trip decimal
//! string and every object is key-sorted, so equal runs give equal bytes.

use std::collections::BTreeMap;

use serde_json::{Map, Value};

use crate::generator::num;

/// One named pass/fail flag with the invariant it checks and its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub invariant: String,
    pub value: f64,
    pub tolerance: f64,
    /// `"<="` or `">="`: how `value` is compared with `tolerance`.
    pub comparison: &'static str,
    pub pass: bool,
    /// Advisory checks are reported but never fail a run.
    pub asserted: bool,
    pub detail: Option<String>,
}

impl Check {
    /// Passes iff `value <= tolerance` (NaN fails).
    pub fn at_most(name: &str, invariant: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            invariant: invariant.into(),
            value,
            tolerance,
            comparison: "<=",
            pass: value <= tolerance,
            asserted: true,
            detail: None,
        }
    }

    /// Passes iff `value >= bound` (NaN fails).
    pub fn at_least(name: &str, invariant: &str, value: f64, bound: f64) -> Self {
        Self { comparison: ">=", pass: value >= bound, ..Self::at_most(name, invariant, value, bound) }
    }

    /// A check that could not be evaluated.
    pub fn errored(name: &str, invariant: &str, err: impl std::fmt::Display) -> Self {
        Self { pass: false, detail: Some(err.to_string()), ..Self::at_most(name, invariant, f64::NAN, 0.0) }
    }

    pub fn advisory(mut self) -> Self {
        self.asserted = false;
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn failed(&self) -> bool {
        self.asserted && !self.pass
    }

    /// `[PASS] name: value <= tol (invariant)`.
    pub fn line(&self) -> String {
        let tag = match (self.pass, self.asserted) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "NOTE",
        };
        let mut s = format!("[{tag}] {}: {} {} {} ({})", self.name, num(self.value), self.comparison, num(self.tolerance), self.invariant);
        if let Some(d) = &self.detail {
            s.push_str(" - ");
            s.push_str(d);
        }
        s
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("name".into(), self.name.clone().into());
        m.insert("invariant".into(), self.invariant.clone().into());
        m.insert("value".into(), num(self.value).into());
        m.insert("tolerance".into(), num(self.tolerance).into());
        m.insert("comparison".into(), self.comparison.into());
        m.insert("pass".into(), self.pass.into());
        m.insert("asserted".into(), self.asserted.into());
        if let Some(d) = &self.detail {
            m.insert("detail".into(), d.clone().into());
        }
        Value::Object(m)
    }
}

/// A point-cloud snapshot inside a plottable artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub t: Option<f64>,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    /// One or more `x1..xd,w` point clouds.
    Clouds(Vec<Series>),
    /// A dense coupling matrix.
    Matrix { file: String },
    /// A non-plottable document such as a saved pipeline.
    Document { file: String },
}

impl Artifact {
    pub fn files(&self) -> Vec<&str> {
        match self {
            Artifact::Clouds(s) => s.iter().map(|s| s.file.as_str()).collect(),
            Artifact::Matrix { file } | Artifact::Document { file } => vec![file.as_str()],
        }
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        match self {
            Artifact::Clouds(series) => {
                m.insert("kind".into(), "clouds".into());
                let list = series
                    .iter()
                    .map(|s| {
                        let mut e = Map::new();
                        e.insert("name".into(), s.name.clone().into());
                        e.insert("file".into(), s.file.clone().into());
                        if let Some(t) = s.t {
                            e.insert("t".into(), num(t).into());
                        }
                        Value::Object(e)
                    })
                    .collect();
                m.insert("series".into(), Value::Array(list));
            }
            Artifact::Matrix { file } => {
                m.insert("kind".into(), "matrix".into());
                m.insert("file".into(), file.clone().into());
            }
            Artifact::Document { file } => {
                m.insert("kind".into(), "document".into());
                m.insert("file".into(), file.clone().into());
            }
        }
        Value::Object(m)
    }
}

/// Results, checks and artifacts of one scenario run.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub results: Map<String, Value>,
    pub checks: Vec<Check>,
    pub artifacts: BTreeMap<String, Artifact>,
}

impl Report {
    pub fn set(&mut self, key: &str, v: f64) {
        self.results.insert(key.into(), num(v).into());
    }

    pub fn set_count(&mut self, key: &str, v: usize) {
        self.results.insert(key.into(), v.to_string().into());
    }

    pub fn set_value(&mut self, key: &str, v: Value) {
        self.results.insert(key.into(), v);
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| c.failed()).count()
    }

    pub fn to_json(&self, schema: &str, seed: u64, scenario: Value) -> Value {
        let mut m = Map::new();
        m.insert("schema".into(), schema.into());
        m.insert("seed".into(), seed.to_string().into());
        m.insert("scenario".into(), stringify_numbers(scenario));
        m.insert("results".into(), Value::Object(self.results.clone()));
        m.insert("checks".into(), Value::Array(self.checks.iter().map(Check::to_json).collect()));
        let arts = self.artifacts.iter().map(|(k, a)| (k.clone(), a.to_json())).collect();
        m.insert("artifacts".into(), Value::Object(arts));
        m.insert("pass".into(), (self.failures() == 0).into());
        Value::Object(m)
    }
}

pub fn nums(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| Value::String(num(*x))).collect())
}

/// Replaces every JSON number by its decimal string.
pub fn stringify_numbers(v: Value) -> Value {
    match v {
        Value::Number(n) => Value::String(match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) => u.to_string(),
            (None, Some(i), _) => i.to_string(),
            (_, _, Some(f)) => num(f),
            _ => n.to_string(),
        }),
        Value::Array(a) => Value::Array(a.into_iter().map(stringify_numbers).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, stringify_numbers(v))).collect()),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_become_strings() {
        let v = serde_json::json!({"b": [1, -2, 0.1], "a": {"c": 1e300}});
        let s = serde_json::to_string(&stringify_numbers(v)).unwrap();
        assert_eq!(s, r#"{"a":{"c":"1e300"},"b":["1","-2","0.1"]}"#);
    }

    #[test]
    fn nan_fails_both_directions() {
        assert!(!Check::at_most("x", "y", f64::NAN, 1.0).pass);
        assert!(!Check::at_least("x", "y", f64::NAN, 1.0).pass);
        assert!(!Check::at_least("x", "y", 0.5, 1.0).advisory().failed());
    }
}

//! Structured experiment records.
//!
//! Every pass flag is registered through [`ExperimentReport::check`], which
//! stores the observed metric and the threshold under the same key.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

impl Relation {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::AtMost => value <= threshold,
            Relation::AtLeast => value >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub relation: Relation,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    /// Free-form context (seeds, instance, parameters).
    pub context: BTreeMap<String, String>,
    pub metrics: BTreeMap<String, f64>,
    pub thresholds: BTreeMap<String, Threshold>,
    pub pass_flags: BTreeMap<String, bool>,
    pub notes: Vec<String>,
    pub artifacts: Vec<String>,
    pub wall_time: f64,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Default::default() }
    }

    pub fn context(&mut self, key: impl Into<String>, value: impl ToString) {
        self.context.insert(key.into(), value.to_string());
    }

    pub fn metric(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.insert(key.into(), value);
    }

    /// Records `value` under `key` and a pass flag for `value <relation> threshold`.
    /// Non-finite values never pass.
    pub fn check(&mut self, key: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> bool {
        let key = key.into();
        let ok = !value.is_nan() && relation.holds(value, threshold);
        self.metrics.insert(key.clone(), value);
        self.thresholds.insert(key.clone(), Threshold { relation, value: threshold });
        self.pass_flags.insert(key, ok);
        ok
    }

    /// Boolean check: metric is 1 when the property holds, threshold 1.
    pub fn check_bool(&mut self, key: impl Into<String>, holds: bool) -> bool {
        self.check(key, if holds { 1.0 } else { 0.0 }, Relation::AtLeast, 1.0)
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn passed(&self) -> bool {
        self.pass_flags.values().all(|&ok| ok)
    }

    pub fn failed_flags(&self) -> Vec<&str> {
        self.pass_flags
            .iter()
            .filter(|(_, ok)| !**ok)
            .map(|(k, _)| k.as_str())
            .collect()
    }

    /// Copies metrics, thresholds and flags of `other` under `prefix.`.
    pub fn absorb(&mut self, prefix: &str, other: &ExperimentReport) {
        for (k, v) in &other.metrics {
            self.metrics.insert(format!("{prefix}.{k}"), *v);
        }
        for (k, v) in &other.thresholds {
            self.thresholds.insert(format!("{prefix}.{k}"), v.clone());
        }
        for (k, v) in &other.pass_flags {
            self.pass_flags.insert(format!("{prefix}.{k}"), *v);
        }
        self.notes.extend(other.notes.iter().map(|n| format!("{prefix}: {n}")));
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_flag_has_metric_and_threshold() {
        let mut r = ExperimentReport::new("t");
        assert!(r.check("a", 1.0, Relation::AtMost, 2.0));
        assert!(!r.check("b", 3.0, Relation::AtMost, 2.0));
        assert!(!r.check("c", f64::NAN, Relation::AtLeast, 0.0));
        for k in r.pass_flags.keys() {
            assert!(r.metrics.contains_key(k) && r.thresholds.contains_key(k));
        }
        assert!(!r.passed());
        assert_eq!(r.failed_flags(), vec!["b", "c"]);
    }

    #[test]
    fn absorb_prefixes_keys() {
        let mut inner = ExperimentReport::new("inner");
        inner.check_bool("ok", true);
        let mut outer = ExperimentReport::new("outer");
        outer.absorb("level0", &inner);
        assert_eq!(outer.pass_flags.get("level0.ok"), Some(&true));
        assert_eq!(outer.metrics.get("level0.ok"), Some(&1.0));
    }
}

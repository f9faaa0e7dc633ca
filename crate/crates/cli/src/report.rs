use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ScenarioConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: Value,
    pub expected: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, measured: impl Serialize, expected: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            measured: serde_json::to_value(measured).unwrap_or(Value::Null),
            expected: expected.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AnalysisOutcome {
    Ok { checks: Vec<Check>, result: Value },
    Error { message: String },
}

impl AnalysisOutcome {
    pub fn passed(&self) -> bool {
        match self {
            Self::Ok { checks, .. } => checks.iter().all(|c| c.passed),
            Self::Error { .. } => false,
        }
    }

    pub fn checks(&self) -> &[Check] {
        match self {
            Self::Ok { checks, .. } => checks,
            Self::Error { .. } => &[],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: ScenarioConfig,
    pub analyses: BTreeMap<String, AnalysisOutcome>,
    /// Measured constants keyed like `D[x]`, `C_P[x]`, `c1[y]`, `C0`.
    pub constants: BTreeMap<String, f64>,
    pub passed: bool,
    /// Wall-clock seconds per analysis; the only nondeterministic section.
    pub timings: BTreeMap<String, f64>,
}

impl ExperimentReport {
    pub fn new(scenario: ScenarioConfig) -> Self {
        Self { scenario, analyses: BTreeMap::new(), constants: BTreeMap::new(), passed: true, timings: BTreeMap::new() }
    }

    pub fn record(&mut self, name: &str, outcome: AnalysisOutcome, seconds: f64) {
        self.passed &= outcome.passed();
        self.analyses.insert(name.into(), outcome);
        self.timings.insert(name.into(), seconds);
    }

    pub fn failed_checks(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, outcome) in &self.analyses {
            match outcome {
                AnalysisOutcome::Error { message } => out.push(format!("{name}: error: {message}")),
                AnalysisOutcome::Ok { checks, .. } => {
                    out.extend(checks.iter().filter(|c| !c.passed).map(|c| format!("{name}: {}", c.name)))
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

/// Rows of `(series, x, y)` for external plotting.
#[derive(Clone, Debug, Default)]
pub struct PlotData {
    rows: Vec<(String, f64, f64)>,
}

impl PlotData {
    pub fn push(&mut self, series: &str, x: f64, y: f64) {
        self.rows.push((series.into(), x, y));
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut out = fs::File::create(path)?;
        writeln!(out, "series,x,y")?;
        for (s, x, y) in &self.rows {
            writeln!(out, "{s},{x},{y}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_fail_the_report() {
        let cfg: ScenarioConfig =
            serde_json::from_str(r#"{"name":"m","output_dir":"o","x":{"type":"interval","length":1,"n":5}}"#).unwrap();
        let mut r = ExperimentReport::new(cfg);
        r.record(
            "a",
            AnalysisOutcome::Ok { checks: vec![Check::new("c", true, 1.0, "<= 2")], result: Value::Null },
            0.1,
        );
        assert!(r.passed);
        r.record("b", AnalysisOutcome::Error { message: "boom".into() }, 0.0);
        assert!(!r.passed);
        assert_eq!(r.failed_checks(), vec!["b: error: boom".to_string()]);
        let json = r.to_json().unwrap();
        assert!(json.find("\"timings\"").unwrap() > json.find("\"passed\"").unwrap());
    }
}

//! Machine-readable experiment reports.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a reference value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// A published statement or constant.
    Literature,
    /// Exact closed-form identity.
    ClosedForm,
    /// Independent numerical oracle.
    Derived,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValue {
    pub name: String,
    pub value: f64,
    pub provenance: Provenance,
    pub note: String,
}

/// One row of a sweep: abscissa (`N`, `h` or `λ`), observed value, reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportPoint {
    pub x: f64,
    pub observed: f64,
    pub reference: Option<f64>,
    pub relative_error: Option<f64>,
}

impl ReportPoint {
    pub fn new(x: f64, observed: f64, reference: Option<f64>) -> Self {
        ReportPoint {
            x,
            observed,
            reference,
            relative_error: reference.map(|r| ((observed - r) / r).abs()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slope {
    pub name: String,
    pub value: f64,
}

/// Outcome of one acceptance rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    /// Echo of the configuration that produced the report.
    pub config: serde_json::Value,
    /// Name of the abscissa column (`N`, `h`, `lambda`, …).
    pub x_label: String,
    pub points: Vec<ReportPoint>,
    pub references: Vec<ReferenceValue>,
    pub slopes: Vec<Slope>,
    pub checks: Vec<Check>,
    pub version: String,
}

impl ExperimentReport {
    pub fn new(experiment: &str, x_label: &str) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            config: serde_json::Value::Null,
            x_label: x_label.to_string(),
            points: Vec::new(),
            references: Vec::new(),
            slopes: Vec::new(),
            checks: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn reference(&mut self, name: &str, value: f64, provenance: Provenance, note: &str) {
        self.references.push(ReferenceValue {
            name: name.to_string(),
            value,
            provenance,
            note: note.to_string(),
        });
    }

    pub fn slope(&mut self, name: &str, value: f64) {
        self.slopes.push(Slope {
            name: name.to_string(),
            value,
        });
    }

    /// Record `observed ≤ threshold`.
    pub fn check_le(&mut self, name: &str, observed: f64, threshold: f64) {
        self.checks.push(Check {
            name: name.to_string(),
            observed,
            threshold,
            passed: observed <= threshold,
        });
    }

    /// Record `observed ≥ threshold`.
    pub fn check_ge(&mut self, name: &str, observed: f64, threshold: f64) {
        self.checks.push(Check {
            name: name.to_string(),
            observed,
            threshold,
            passed: observed >= threshold,
        });
    }

    /// Record a boolean condition; `observed` is 1 when it holds.
    pub fn check_true(&mut self, name: &str, holds: bool) {
        self.checks.push(Check {
            name: name.to_string(),
            observed: if holds { 1.0 } else { 0.0 },
            threshold: 1.0,
            passed: holds,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Whether the relative errors of the points strictly decrease.
    pub fn errors_decreasing(&self) -> bool {
        let e: Vec<f64> = self
            .points
            .iter()
            .filter_map(|p| p.relative_error)
            .collect();
        e.windows(2).all(|w| w[1] < w[0])
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Io(e.to_string()))
    }

    /// CSV `x,observed,reference,relative_error`; the header names the abscissa.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{},observed,reference,relative_error", self.x_label)?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        for p in &self.points {
            writeln!(
                w,
                "{:.17e},{:.17e},{},{}",
                p.x,
                p.observed,
                opt(p.reference),
                opt(p.relative_error)
            )?;
        }
        Ok(())
    }
}

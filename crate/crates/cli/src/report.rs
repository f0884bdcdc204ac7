//! Report rows, the JSON document and per-suite CSV tables.

use crate::error::CliError;
use crate::scenario::{ResolutionConfig, Scenario, Suite};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// `|computed - target| <= slack(target)`.
    Equal,
    /// `computed <= target + slack(target)`.
    AtMost,
    /// `computed >= target - slack(target)`.
    AtLeast,
    /// `target - slack(target) <= computed <= upper + slack(upper)`.
    Band,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// `slack(v) = tolerance * |v|`.
    Relative,
    /// `slack(v) = tolerance`.
    Absolute,
}

/// One checked quantity; `pass` follows from the other fields alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub quantity: String,
    /// Radius, level or window the quantity belongs to.
    pub parameter: Option<f64>,
    /// Absent when the computation failed.
    pub computed: Option<f64>,
    pub target: f64,
    pub upper: Option<f64>,
    pub comparison: Comparison,
    pub scale: Scale,
    pub tolerance: f64,
    /// Distance to the accepted set before slack (`|computed - target|` for equality).
    pub error: Option<f64>,
    pub pass: bool,
    pub note: String,
}

impl Row {
    pub fn new(quantity: impl Into<String>, computed: f64, target: f64, comparison: Comparison, scale: Scale, tolerance: f64) -> Self {
        let mut row = Row {
            quantity: quantity.into(),
            parameter: None,
            computed: computed.is_finite().then_some(computed),
            target,
            upper: None,
            comparison,
            scale,
            tolerance,
            error: None,
            pass: false,
            note: if computed.is_finite() { String::new() } else { format!("non-finite value {computed}") },
        };
        row.judge();
        row
    }

    /// A failed computation; the suite keeps going.
    pub fn failure(quantity: impl Into<String>, message: impl Into<String>) -> Self {
        Row {
            quantity: quantity.into(),
            parameter: None,
            computed: None,
            target: 0.0,
            upper: None,
            comparison: Comparison::Equal,
            scale: Scale::Absolute,
            tolerance: 0.0,
            error: None,
            pass: false,
            note: message.into(),
        }
    }

    pub fn at(mut self, parameter: f64) -> Self {
        self.parameter = Some(parameter);
        self
    }

    pub fn band(mut self, upper: f64) -> Self {
        self.comparison = Comparison::Band;
        self.upper = Some(upper);
        self.judge();
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn slack(&self, v: f64) -> f64 {
        match self.scale {
            Scale::Relative => self.tolerance * v.abs(),
            Scale::Absolute => self.tolerance,
        }
    }

    /// Recomputes `error` and `pass` from the remaining fields.
    pub fn judge(&mut self) {
        let Some(c) = self.computed else {
            self.error = None;
            self.pass = false;
            return;
        };
        let t = self.target;
        let upper = self.upper.unwrap_or(t);
        let (error, pass) = match self.comparison {
            Comparison::Equal => ((c - t).abs(), (c - t).abs() <= self.slack(t)),
            Comparison::AtMost => ((c - t).max(0.0), c <= t + self.slack(t)),
            Comparison::AtLeast => ((t - c).max(0.0), c >= t - self.slack(t)),
            Comparison::Band => (
                (t - c).max(c - upper).max(0.0),
                c >= t - self.slack(t) && c <= upper + self.slack(upper),
            ),
        };
        self.error = Some(error);
        self.pass = pass;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub rows: Vec<Row>,
}

impl SuiteReport {
    pub fn new(suite: Suite, rows: Vec<Row>) -> Self {
        SuiteReport {
            suite,
            passed: !rows.is_empty() && rows.iter().all(|r| r.pass),
            rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub resolution: ResolutionConfig,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub scenario: Scenario,
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
    pub provenance: Provenance,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    /// Writes `report.json` and one `<suite>.csv` per suite; returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CliError::Write { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let json = dir.join("report.json");
        fs::write(&json, self.to_json()).map_err(io(&json))?;
        let mut written = vec![json];
        for s in &self.suites {
            let path = dir.join(format!("{}.csv", s.suite));
            fs::write(&path, csv_table(&s.rows)?).map_err(io(&path))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// CSV with a header row, `.` decimals and `\n` line ends; empty cells for absent values.
pub fn csv_table(rows: &[Row]) -> Result<String, CliError> {
    let internal = |e: csv::Error| CliError::Internal(e.to_string());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record([
        "quantity", "parameter", "computed", "target", "upper", "comparison", "scale", "tolerance", "error", "pass", "note",
    ])
    .map_err(internal)?;
    // shortest round-trip form, scientific for very small or large magnitudes
    let num = |x: f64| format!("{x:?}");
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    for r in rows {
        let comparison = serde_json::to_value(r.comparison).expect("unit enum");
        let scale = serde_json::to_value(r.scale).expect("unit enum");
        w.write_record([
            r.quantity.clone(),
            opt(r.parameter),
            opt(r.computed),
            num(r.target),
            opt(r.upper),
            comparison.as_str().unwrap_or_default().to_string(),
            scale.as_str().unwrap_or_default().to_string(),
            num(r.tolerance),
            opt(r.error),
            r.pass.to_string(),
            r.note.clone(),
        ])
        .map_err(internal)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Internal(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparisons_apply_their_slack() {
        assert!(Row::new("q", 1.01, 1.0, Comparison::Equal, Scale::Relative, 0.02).pass);
        assert!(!Row::new("q", 1.03, 1.0, Comparison::Equal, Scale::Relative, 0.02).pass);
        assert!(Row::new("q", 0.5, 1.0, Comparison::AtMost, Scale::Absolute, 0.0).pass);
        assert!(!Row::new("q", 0.5, 1.0, Comparison::AtLeast, Scale::Absolute, 0.1).pass);
        let b = Row::new("q", 1.5, 1.0, Comparison::Equal, Scale::Relative, 0.01).band(2.0);
        assert!(b.pass);
        assert_eq!(b.error, Some(0.0));
        assert!(!Row::new("q", 2.1, 1.0, Comparison::Equal, Scale::Relative, 0.01).band(2.0).pass);
    }

    #[test]
    fn non_finite_values_fail() {
        let r = Row::new("q", f64::NAN, 0.0, Comparison::AtMost, Scale::Absolute, 1.0);
        assert!(!r.pass && r.computed.is_none() && r.note.contains("NaN"));
    }

    #[test]
    fn csv_has_header_and_empty_cells() {
        let rows = [Row::failure("gbc", "boom, with comma")];
        let text = csv_table(&rows).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("quantity,parameter,computed"));
        assert_eq!(lines.next().unwrap(), "gbc,,,0.0,,equal,absolute,0.0,,false,\"boom, with comma\"");
        assert!(!text.contains('\r'));
    }
}

//! Report and table types plus their on-disk form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliResult;

/// Bumped whenever a field of the JSON report changes meaning or shape.
pub const REPORT_SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

/// A table cell. Numbers are written to CSV in a fixed exponent format so that
/// reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) if v.is_finite() => format!("{v:.12e}"),
            Cell::Num(v) => v.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Column {
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub name: String,
    /// File name relative to the output directory.
    pub file: String,
    pub description: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    /// `columns` are `(name, description)` pairs.
    pub fn new(name: &str, description: &str, columns: &[(&str, &str)]) -> Self {
        Self {
            name: name.to_string(),
            file: format!("{name}.csv"),
            description: description.to_string(),
            columns: columns
                .iter()
                .map(|(n, d)| Column {
                    name: n.to_string(),
                    description: d.to_string(),
                })
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// CSV text. The first line is a comment documenting the columns.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let docs: Vec<String> = self
            .columns
            .iter()
            .map(|c| format!("{} = {}", c.name, c.description))
            .collect();
        let _ = writeln!(s, "# {}; columns: {}", self.description, docs.join("; "));
        let names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        let _ = writeln!(s, "{}", names.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        Self {
            name: "recutil".into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timing {
    pub wall_time_s: f64,
    pub budget_s: f64,
    pub within_budget: bool,
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub schema_version: String,
    pub tool: ToolInfo,
    pub experiment: String,
    pub description: String,
    /// The configuration after defaults were filled in.
    pub inputs: ExperimentConfig,
    pub checks: Vec<CheckResult>,
    pub summary: Summary,
    /// Headline scalars, keyed by name.
    pub values: BTreeMap<String, f64>,
    /// Runtime divergences and other observations that are results, not errors.
    pub findings: Vec<String>,
    pub tables: Vec<Table>,
    pub timing: Timing,
}

impl ExperimentReport {
    pub fn new(experiment: &str, description: &str, inputs: ExperimentConfig) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION.into(),
            tool: ToolInfo::default(),
            experiment: experiment.into(),
            description: description.into(),
            inputs,
            checks: Vec::new(),
            summary: Summary {
                pass: 0,
                fail: 0,
                inconclusive: 0,
            },
            values: BTreeMap::new(),
            findings: Vec::new(),
            tables: Vec::new(),
            timing: Timing::default(),
        }
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.verdict(name, if pass { Verdict::Pass } else { Verdict::Fail }, detail);
    }

    pub fn verdict(&mut self, name: &str, verdict: Verdict, detail: impl Into<String>) {
        self.checks.push(CheckResult {
            name: name.into(),
            verdict,
            detail: detail.into(),
        });
    }

    pub fn value(&mut self, name: &str, v: f64) {
        self.values.insert(name.into(), v);
    }

    pub fn finding(&mut self, text: impl Into<String>) {
        self.findings.push(text.into());
    }

    pub fn check_named(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub(crate) fn finish_summary(&mut self) {
        let count = |v| self.checks.iter().filter(|c| c.verdict == v).count();
        self.summary = Summary {
            pass: count(Verdict::Pass),
            fail: count(Verdict::Fail),
            inconclusive: count(Verdict::Inconclusive),
        };
    }

    /// Writes every table as CSV and the report as JSON; returns the paths.
    pub fn write(&self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let prefix = &self.inputs.outputs.prefix;
        let mut paths = Vec::new();
        for t in &self.tables {
            let p = dir.join(format!("{prefix}{}", t.file));
            std::fs::write(&p, t.to_csv())?;
            paths.push(p);
        }
        let p = dir.join(format!("{prefix}{}", self.inputs.outputs.report));
        std::fs::write(&p, serde_json::to_string_pretty(self)? + "\n")?;
        paths.push(p);
        Ok(paths)
    }
}

//! Experiment reports: a CSV table plus a JSON run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig};

/// One CSV cell. Floats are written with 17 significant digits.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(u64),
    Float(f64),
    Text(String),
}

impl Value {
    pub fn render(&self) -> String {
        match self {
            Self::Int(v) => v.to_string(),
            Self::Float(v) => format!("{v:.16e}"),
            Self::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Self::Int(v) => Some(*v as f64),
            Self::Float(v) => Some(*v),
            Self::Text(_) => None,
        }
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Self::Int(v as u64)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Self::Float(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Self::Text(v.to_owned())
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Self::Text(v.to_string())
    }
}

pub const STATUS_OK: &str = "ok";
pub const STATUS_VIOLATION: &str = "VIOLATION";

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub experiment: Experiment,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// Run-level numbers (fitted constants, slopes, …) for the manifest.
    pub summary: BTreeMap<String, f64>,
    pub violations: Vec<String>,
}

impl Report {
    /// The last header column must be `status`.
    pub fn new(experiment: Experiment, header: &[&str]) -> Self {
        debug_assert_eq!(header.last(), Some(&"status"));
        Self {
            experiment,
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            summary: BTreeMap::new(),
            violations: Vec::new(),
        }
    }

    /// Appends a row; `violation` marks its status and records the reason.
    pub fn push(&mut self, mut row: Vec<Value>, violation: Option<String>) {
        let status = if violation.is_some() { STATUS_VIOLATION } else { STATUS_OK };
        row.push(status.into());
        debug_assert_eq!(row.len(), self.header.len());
        if let Some(v) = violation {
            self.violations.push(v);
        }
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: f64) {
        self.summary.insert(key.to_owned(), value);
    }

    pub fn violate(&mut self, reason: String) {
        self.violations.push(reason);
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        self.rows.iter().map(|r| r[idx].as_f64()).collect()
    }

    pub fn to_csv(&self) -> anyhow::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Value::render))?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub experiment: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub threads: Option<usize>,
    pub csv: PathBuf,
    pub passed: bool,
    pub violations: &'a [String],
    pub summary: &'a BTreeMap<String, f64>,
    pub config: &'a ExperimentConfig,
}

/// `out.csv` → `out.manifest.json`.
pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest.json")
}

/// Writes the CSV and its manifest; returns the manifest path.
pub fn write_outputs(
    report: &Report,
    config: &ExperimentConfig,
    csv_path: &Path,
    threads: Option<usize>,
) -> anyhow::Result<PathBuf> {
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(csv_path, report.to_csv()?).with_context(|| format!("writing {}", csv_path.display()))?;
    let manifest = Manifest {
        experiment: report.experiment.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        threads,
        csv: csv_path.to_owned(),
        passed: report.passed(),
        violations: &report.violations,
        summary: &report.summary,
        config,
    };
    let path = manifest_path(csv_path);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

//! Delimited tables and the JSON sidecar that accompanies them.

use std::fs;
use std::path::{Path, PathBuf};

use floquet_core::matching::FloquetSolution;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("cannot read {path}: {reason}")]
    Read { path: PathBuf, reason: String },
}

/// 17 significant digits, enough to round-trip any f64.
pub fn real(x: f64) -> String {
    if x.is_finite() { format!("{x:.16e}") } else { x.to_string() }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), ExportError> {
        let err = |source| ExportError::Csv { path: path.to_path_buf(), source };
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        w.flush().map_err(|source| ExportError::Io { path: path.to_path_buf(), source })
    }

    pub fn read(path: &Path) -> Result<Self, ExportError> {
        let err = |e: csv::Error| ExportError::Read { path: path.to_path_buf(), reason: e.to_string() };
        let mut r = csv::Reader::from_path(path).map_err(err)?;
        let header = r.headers().map_err(err)?.iter().map(String::from).collect();
        let rows = r.records().map(|rec| rec.map(|x| x.iter().map(String::from).collect())).collect::<Result<_, _>>().map_err(err)?;
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Complete,
    /// The solver stopped early; tables hold what was accepted.
    Partial,
}

/// Run metadata, full-precision solutions and mode-specific records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub tool: String,
    pub version: String,
    pub mode: Mode,
    pub status: Status,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub diagnostics: serde_json::Value,
    #[serde(default)]
    pub solutions: Vec<FloquetSolution>,
    #[serde(default)]
    pub records: serde_json::Value,
}

impl Sidecar {
    pub fn new(mode: Mode, config: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            mode,
            status: Status::Complete,
            config: config.clone(),
            error: None,
            diagnostics: serde_json::Value::Null,
            solutions: Vec::new(),
            records: serde_json::Value::Null,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), ExportError> {
        let text = serde_json::to_string_pretty(self).expect("sidecar serializes");
        fs::write(path, text + "\n").map_err(|source| ExportError::Io { path: path.to_path_buf(), source })
    }

    pub fn read(path: &Path) -> Result<Self, ExportError> {
        let text = fs::read_to_string(path).map_err(|e| ExportError::Read { path: path.to_path_buf(), reason: e.to_string() })?;
        serde_json::from_str(&text).map_err(|e| ExportError::Read { path: path.to_path_buf(), reason: e.to_string() })
    }
}

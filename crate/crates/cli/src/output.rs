//! Artifact writers: provenance-stamped CSV tables and the run summary.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of `text`.
pub fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// A CSV cell. Floats are written with 17 significant digits.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
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

fn write_cell(out: &mut String, cell: &Cell) {
    match cell {
        Cell::Int(v) => write!(out, "{v}").unwrap(),
        Cell::Float(v) if v.is_finite() => write!(out, "{v:.16e}").unwrap(),
        Cell::Float(v) => write!(out, "{v}").unwrap(),
        Cell::Text(s) if s.contains([',', '"', '\n']) => {
            write!(out, "\"{}\"", s.replace('"', "\"\"")).unwrap()
        }
        Cell::Text(s) => out.push_str(s),
    }
}

/// An in-memory table rendered in one go, so a file is either complete or
/// absent.
#[derive(Clone, Debug)]
pub struct Table {
    name: String,
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&'static str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn render(&self, provenance: &Provenance) -> String {
        let mut out = String::new();
        provenance.write_comments(&mut out);
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_cell(&mut out, cell);
            }
            out.push('\n');
        }
        out
    }
}

/// Header comments shared by every CSV of a run.
#[derive(Clone, Debug)]
pub struct Provenance {
    pub experiment: String,
    pub manifest_sha256: String,
    pub partial: bool,
}

impl Provenance {
    fn write_comments(&self, out: &mut String) {
        writeln!(out, "# talbot {}", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(out, "# experiment: {}", self.experiment).unwrap();
        writeln!(out, "# manifest-sha256: {}", self.manifest_sha256).unwrap();
        if self.partial {
            writeln!(out, "# partial: run aborted before completion").unwrap();
        }
    }
}

/// Pass/fail record for one acceptance gate of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

impl Gate {
    /// Passes when `value ≤ limit`.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= limit,
            value,
            limit,
            detail: format!("{value:.6e} <= {limit:.6e}"),
        }
    }

    /// Passes when `value ≥ limit`.
    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: value >= limit,
            value,
            limit,
            detail: format!("{value:.6e} >= {limit:.6e}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Passed,
    GateFailed,
    Aborted,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub manifest_sha256: String,
    pub status: Status,
    pub partial: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub gates: Vec<Gate>,
    pub artifacts: Vec<String>,
}

/// Writes the resolved manifest, every table and `summary.json` into `dir`.
/// Returns the written paths.
pub fn write_artifacts(
    dir: &Path,
    manifest_toml: &str,
    tables: &[Table],
    summary: &mut Summary,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let provenance = Provenance {
        experiment: summary.experiment.clone(),
        manifest_sha256: summary.manifest_sha256.clone(),
        partial: summary.partial,
    };
    let mut written = Vec::new();
    let manifest_path = dir.join("manifest.resolved.toml");
    fs::write(&manifest_path, manifest_toml)?;
    written.push(manifest_path);
    for table in tables {
        let path = dir.join(format!("{}.csv", table.name()));
        fs::write(&path, table.render(&provenance))?;
        written.push(path);
    }
    summary.artifacts = written
        .iter()
        .filter_map(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .collect();
    let summary_path = dir.join("summary.json");
    let mut json = serde_json::to_string_pretty(summary).expect("summary serializes");
    json.push('\n');
    fs::write(&summary_path, json)?;
    written.push(summary_path);
    Ok(written)
}

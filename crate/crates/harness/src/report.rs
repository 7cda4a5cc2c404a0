//! Report model and file emission.
//!
//! Every table becomes `<name>.csv` with a header row; floats are written
//! with 17 significant digits so values round-trip exactly. The summary is
//! written as `summary.json` and the manifest as `manifest.json`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use fhp_core::sequence::Decision;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.json";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format_float(*x),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<i64> for Cell {
    fn from(i: i64) -> Self {
        Cell::Int(i)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(b.to_string())
    }
}

impl From<Decision> for Cell {
    fn from(d: Decision) -> Self {
        Cell::Text(decision_label(d).to_string())
    }
}

pub fn decision_label(d: Decision) -> &'static str {
    match d {
        Decision::ProvenConvergent => "ProvenConvergent",
        Decision::ProvenDivergent => "ProvenDivergent",
        Decision::UnknownExplicitFamily => "UnknownExplicitFamily",
    }
}

/// 17 significant digits in scientific notation.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// Outcome of a command, ready for emission.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    pub summary: serde_json::Map<String, serde_json::Value>,
    pub decisions: Vec<(String, Decision)>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn table(&mut self, t: Table) {
        self.tables.push(t);
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(
            key.to_string(),
            serde_json::to_value(value).expect("serializable summary value"),
        );
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        let m = message.into();
        log::warn!("{m}");
        self.warnings.push(m);
    }

    pub fn decide(&mut self, name: &str, d: Decision) {
        self.decisions.push((name.to_string(), d));
    }
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: &'static str,
    pub command: String,
    pub status: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub config: RunConfig,
    pub admissibility: BTreeMap<String, &'static str>,
    pub warnings: Vec<String>,
    pub files: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| HarnessError::io(format!("creating {}", path.display()), e))?;
    f.write_all(bytes)
        .map_err(|e| HarnessError::io(format!("writing {}", path.display()), e))
}

/// An output directory with a manifest that has been written in the
/// `running` state.
pub struct OutputDir {
    dir: PathBuf,
    manifest: RunManifest,
}

impl OutputDir {
    /// Creates the directory and writes the initial manifest; fails before
    /// any computation when the location is not writable.
    pub fn prepare(cfg: &RunConfig) -> Result<Self> {
        let dir = cfg.run.output_dir.clone();
        fs::create_dir_all(&dir)
            .map_err(|e| HarnessError::io(format!("creating output directory {}", dir.display()), e))?;
        let manifest = RunManifest {
            version: env!("CARGO_PKG_VERSION"),
            command: cfg.command().to_string(),
            status: "running".into(),
            started_at: now(),
            finished_at: None,
            config: cfg.clone(),
            admissibility: BTreeMap::new(),
            warnings: Vec::new(),
            files: Vec::new(),
        };
        let out = Self { dir, manifest };
        out.write_manifest()?;
        Ok(out)
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn write_manifest(&self) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        write_file(&self.dir.join(MANIFEST), &bytes)
    }

    /// Writes every table and the summary, then finalizes the manifest.
    pub fn emit(mut self, report: &Report, status: &str) -> Result<RunManifest> {
        let mut files = Vec::new();
        for t in &report.tables {
            let bytes = t.to_csv();
            write_file(&self.dir.join(t.file_name()), &bytes)?;
            files.push(FileDigest {
                path: t.file_name(),
                sha256: sha256_hex(&bytes),
            });
        }
        let mut summary = report.summary.clone();
        summary.insert(
            "admissibility".into(),
            serde_json::Value::Object(
                report
                    .decisions
                    .iter()
                    .map(|(k, d)| (k.clone(), decision_label(*d).into()))
                    .collect(),
            ),
        );
        summary.insert(
            "warnings".into(),
            serde_json::to_value(&report.warnings).expect("strings"),
        );
        let mut bytes = serde_json::to_vec_pretty(&summary).expect("summary serializes");
        bytes.push(b'\n');
        write_file(&self.dir.join(SUMMARY), &bytes)?;
        files.push(FileDigest {
            path: SUMMARY.into(),
            sha256: sha256_hex(&bytes),
        });

        self.manifest.status = status.into();
        self.manifest.finished_at = Some(now());
        self.manifest.admissibility = report
            .decisions
            .iter()
            .map(|(k, d)| (k.clone(), decision_label(*d)))
            .collect();
        self.manifest.warnings = report.warnings.clone();
        self.manifest.files = files;
        self.write_manifest()?;
        Ok(self.manifest)
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

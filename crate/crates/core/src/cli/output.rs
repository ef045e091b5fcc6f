//! Output directory with a checksummed manifest, and the run report.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::hex;
use crate::error::Result;
use crate::grid::ScalarField;

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Writes files below one directory and records each in the manifest.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    manifest: Vec<ManifestEntry>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &[ManifestEntry] {
        &self.manifest
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.manifest.retain(|e| e.path != rel);
        self.manifest.push(ManifestEntry {
            path: rel.to_string(),
            bytes: bytes.len(),
            sha256: hex(&Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(rel, text.as_bytes())
    }

    pub fn write_csv(&mut self, rel: &str, table: &Csv) -> Result<()> {
        self.write_bytes(rel, table.text.as_bytes())
    }
}

/// Minimal CSV builder; floats use Rust's shortest round-trip formatting,
/// so output is byte-identical across runs.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match c {
                Cell::F(v) => write!(self.text, "{v:e}"),
                Cell::U(v) => write!(self.text, "{v}"),
                Cell::S(s) => write!(self.text, "{s}"),
            }
            .unwrap();
        }
        self.text.push('\n');
    }

    /// Long-format rows `(t, x, value)` for one field.
    pub fn field_rows(&mut self, t: f64, field: &ScalarField) {
        let grid = field.grid();
        for (i, v) in field.values().iter().enumerate() {
            self.row(&[Cell::F(t), Cell::F(grid.node(i)), Cell::F(*v)]);
        }
    }
}

pub enum Cell<'a> {
    F(f64),
    U(u64),
    S(&'a str),
}

/// Written as `report.json` by every run, including failed ones.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub wall_time_s: f64,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub certificates: Vec<CertificateSummary>,
    pub files: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateSummary {
    pub target: String,
    pub t: f64,
    pub valid: bool,
    pub threshold: serde_json::Value,
    pub absolutely_convergent: bool,
    pub tail_bound: f64,
}

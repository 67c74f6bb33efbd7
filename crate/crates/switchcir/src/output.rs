//! CSV files and the run manifest.
//!
//! Every CSV starts with a `# run <id>` comment naming the manifest it
//! belongs to, then a header row. Floats carry 17 significant digits so
//! files round-trip bit-exactly.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Formats a float with 17 significant digits; non-finite values are
/// written as `inf`, `-inf` or `nan`.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
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

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(v) => format_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(t) => t.clone(),
            Cell::Empty => String::new(),
        }
    }
}

/// Writes `header` and `rows` to `path`, preceded by the run comment.
pub fn write_csv<S: AsRef<str>>(path: &Path, run_id: &str, header: &[S], rows: &[Vec<Cell>]) -> io::Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "# run {run_id}")?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header.iter().map(|h| h.as_ref()))?;
        for row in rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
    }
    fs::write(path, buf)
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub rows: usize,
}

/// Reproducibility record written next to the CSVs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    /// SHA-256 over the fields that determine the outputs; see [`run_id`].
    pub run_id: String,
    pub version: String,
    pub command: String,
    pub parameters: serde_json::Value,
    pub config: Option<String>,
    pub config_sha256: Option<String>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<OutputEntry>,
}

/// Identifier derived from everything that determines the numerical output:
/// version, command, its parameters, the config hash and the seed. Worker
/// count and output directory are deliberately excluded.
pub fn run_id(version: &str, command: &str, parameters: &serde_json::Value, config_sha256: Option<&str>, seed: u64) -> String {
    let mut h = Sha256::new();
    for part in [version, command, &parameters.to_string(), config_sha256.unwrap_or("-"), &seed.to_string()] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Output directory plus the files written so far.
#[derive(Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub run_id: String,
    pub outputs: Vec<OutputEntry>,
}

impl RunOutput {
    pub fn create(dir: PathBuf, run_id: String) -> io::Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(RunOutput { dir, run_id, outputs: Vec::new() })
    }

    pub fn csv<S: AsRef<str>>(&mut self, name: &str, header: &[S], rows: &[Vec<Cell>]) -> io::Result<PathBuf> {
        let path = self.dir.join(name);
        write_csv(&path, &self.run_id, header, rows)?;
        self.outputs.push(OutputEntry {
            file: name.to_owned(),
            sha256: sha256_file(&path)?,
            rows: rows.len(),
        });
        Ok(path)
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> io::Result<PathBuf> {
        let path = self.dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(manifest).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

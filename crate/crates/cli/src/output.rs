//! CSV artifacts and the run manifest.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

/// One CSV cell. Floats use 17 significant digits in scientific notation.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// A file written by a run.
#[derive(Clone, Debug, Serialize)]
pub struct Artifact {
    pub file: String,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    config_source: &'a str,
    config_sha256: &'a str,
    seed: u64,
    overrides: &'a crate::config::Overrides,
    artifacts: &'a [Artifact],
    timings_seconds: BTreeMap<String, f64>,
    notes: &'a [String],
}

/// Collects artifacts and timings for one subcommand.
pub struct RunOutput {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
    timings: Vec<(String, Duration)>,
    notes: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunOutput {
    pub fn create(dir: &Path) -> io::Result<RunOutput> {
        fs::create_dir_all(dir)?;
        Ok(RunOutput { dir: dir.to_path_buf(), artifacts: Vec::new(), timings: Vec::new(), notes: Vec::new() })
    }

    pub fn time(&mut self, stage: &str, elapsed: Duration) {
        self.timings.push((stage.to_string(), elapsed));
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Writes `name` with a header row and fixed row order.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            debug_assert_eq!(r.len(), header.len());
            w.write_record(r.iter().map(Cell::render))?;
        }
        let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
        fs::write(self.dir.join(name), &bytes)?;
        self.artifacts.push(Artifact { file: name.to_string(), rows: rows.len(), sha256: sha256_hex(&bytes) });
        Ok(())
    }

    /// `metric,value` table.
    pub fn summary(&mut self, name: &str, rows: &[(&str, Cell)]) -> io::Result<()> {
        let rows: Vec<Vec<Cell>> = rows.iter().map(|(k, v)| vec![Cell::from(*k), v.clone()]).collect();
        self.csv(name, &["metric", "value"], &rows)
    }

    pub fn finish(
        &self,
        subcommand: &str,
        config_source: &str,
        config_bytes: &[u8],
        seed: u64,
        overrides: &crate::config::Overrides,
    ) -> io::Result<PathBuf> {
        let timings = self.timings.iter().map(|(k, d)| (k.clone(), d.as_secs_f64())).collect();
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config_source,
            config_sha256: &sha256_hex(config_bytes),
            seed,
            overrides,
            artifacts: &self.artifacts,
            timings_seconds: timings,
            notes: &self.notes,
        };
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&m).map_err(io::Error::other)?;
        fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_is_fixed_width_scientific() {
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
        assert_eq!(format_float(-0.25), "-2.5000000000000000e-1");
        let v = 0.1 + 0.2;
        assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}

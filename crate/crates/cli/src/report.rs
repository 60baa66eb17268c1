//! Canonical reports and their on-disk form.

use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::config::{Format, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// A contract check with its measured value and limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub limit: f64,
}

impl Verdict {
    /// Passes when `value ≤ limit`.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), pass: value <= limit, value, limit }
    }
}

/// Fixed-column table written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Appended to the command name to form the file stem; empty for the main table.
    pub suffix: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(suffix: &'static str, header: &[&'static str]) -> Self {
        Self { suffix, header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip decimal, in exponent form outside `[1e-4, 1e6)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e6).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: &'static str,
    pub config: RunConfig,
    pub results: Value,
    pub verdicts: Vec<Verdict>,
    pub pass: bool,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(command: &'static str, config: &RunConfig, results: Value, verdicts: Vec<Verdict>, tables: Vec<Table>) -> Self {
        let pass = verdicts.iter().all(|v| v.pass);
        Self { schema_version: SCHEMA_VERSION, command, config: config.clone(), results, verdicts, pass, tables }
    }

    /// The canonical JSON body: no timestamps or run-dependent fields.
    pub fn canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn csv_bytes(table: &Table) -> std::io::Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&table.header)?;
        for r in &table.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))
    }

    /// Writes the report, its tables and the timing sidecar; returns the paths written.
    pub fn write(&self, dir: &Path, format: Format, workers: usize, elapsed: Duration) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        if format.json() {
            let p = dir.join(format!("{}.json", self.command));
            std::fs::write(&p, self.canonical_json())?;
            written.push(p);
        }
        if format.csv() {
            for t in &self.tables {
                let stem = if t.suffix.is_empty() { self.command.to_string() } else { format!("{}_{}", self.command, t.suffix) };
                let p = dir.join(format!("{stem}.csv"));
                std::fs::write(&p, Self::csv_bytes(t)?)?;
                written.push(p);
            }
        }
        let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let files: Vec<String> = written.iter().filter_map(|p| p.file_name()).map(|f| f.to_string_lossy().into_owned()).collect();
        let meta = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "created_unix_seconds": created,
            "elapsed_seconds": elapsed.as_secs_f64(),
            "workers": workers,
            "files": files,
        });
        let p = dir.join(format!("{}.meta.json", self.command));
        std::fs::write(&p, serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n")?;
        written.push(p);
        Ok(written)
    }
}

//! Tidy tables, plot manifests and on-disk artifact layout.
//!
//! ```text
//! <root>/<id>/config.json          resolved config + hash
//! <root>/<id>/metrics/<cell>.csv   per-cell metric streams
//! <root>/<id>/summary.json|csv     aggregated results
//! <root>/<id>/plot.json            declarative plot manifest
//! <root>/<id>/manifest.json        records, wall clock, failures
//! ```
//!
//! Everything except `manifest.json` is a pure function of the resolved
//! config, so reruns reproduce those bytes exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{LabError, LabResult};

/// Environment variable naming the artifact root.
pub const ARTIFACT_ENV: &str = "PHASOR_ARTIFACTS";
pub const SCHEMA_VERSION: u32 = 1;

pub fn default_root() -> PathBuf {
    std::env::var_os(ARTIFACT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("artifacts"))
}

/// A rectangular table written as CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let line = |cells: &[String]| cells.iter().map(|c| escape(c)).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "{}", line(&self.header));
        for r in &self.rows {
            let _ = writeln!(out, "{}", line(r));
        }
        out
    }

    /// Column by header name.
    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

fn escape(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Fixed-precision float formatting so CSV bytes are stable.
pub fn f(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.6}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Annotation {
    pub kind: String,
    pub label: String,
    pub from: f64,
    pub to: f64,
}

/// Declarative plot description; rendering is left to external tools.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotSpec {
    pub kind: String,
    pub data: String,
    pub x: String,
    pub y: String,
    pub series: Option<String>,
    pub title: String,
    pub annotations: Vec<Annotation>,
}

impl PlotSpec {
    pub fn new(kind: &str, x: &str, y: &str, title: &str) -> Self {
        Self {
            kind: kind.into(),
            data: "summary.csv".into(),
            x: x.into(),
            y: y.into(),
            series: None,
            title: title.into(),
            annotations: Vec::new(),
        }
    }

    pub fn series(mut self, s: &str) -> Self {
        self.series = Some(s.into());
        self
    }

    pub fn data(mut self, d: &str) -> Self {
        self.data = d.into();
        self
    }
}

/// One (condition, seed) cell as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRecord {
    pub condition: String,
    pub seed: u64,
    pub config_hash: String,
    pub metrics: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub id: String,
    pub config_hash: String,
    pub wall_clock_secs: f64,
    pub workers: usize,
    pub artifacts: Vec<String>,
    pub cells: Vec<CellRecord>,
}

/// Writes `contents` under `dir`, returning the path relative to `dir`.
pub fn write(dir: &Path, rel: &str, contents: &str) -> LabResult<String> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| LabError::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    fs::write(&path, contents).map_err(|source| LabError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(rel.to_string())
}

pub fn write_json<T: Serialize>(dir: &Path, rel: &str, value: &T) -> LabResult<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write(dir, rel, &s)
}

/// Filesystem-safe cell name.
pub fn cell_file(condition: &str, seed: u64) -> String {
    let clean: String = condition
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect();
    format!("metrics/{clean}__seed{seed}.csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_escapes_commas_and_quotes() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec!["x,y".into(), "q\"".into()]);
        assert_eq!(t.to_csv(), "a,b\n\"x,y\",\"q\"\"\"\n");
    }

    #[test]
    fn cell_names_are_sanitized() {
        assert_eq!(cell_file("kappa=0.5 raw", 3), "metrics/kappa_0.5_raw__seed3.csv");
    }

    #[test]
    fn float_format_is_fixed() {
        assert_eq!(f(0.1 + 0.2), "0.300000");
        assert_eq!(f(f64::NAN), "nan");
    }
}

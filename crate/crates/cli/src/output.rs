//! CSV tables, run manifests and error records.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Shortest round-trip decimal; scientific notation outside [1e-4, 1e16).
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// A CSV table with a fixed header; every row must match the header width.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Table, CliError> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r.records().map(|rec| rec.map(|x| x.iter().map(str::to_string).collect())).collect::<Result<_, _>>()?;
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize, CliError> {
        self.header.iter().position(|h| h == name).ok_or_else(|| CliError::Plot(format!("missing column `{name}`")))
    }

    /// Numeric values of a column; empty cells become `None`.
    pub fn numbers(&self, name: &str) -> Result<Vec<Option<f64>>, CliError> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .map(|r| match r[c].as_str() {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| CliError::Plot(format!("column `{name}`: not a number: {s}"))),
            })
            .collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

/// Writes `bytes` under `dir` and records the artifact.
pub fn write_artifact(dir: &Path, name: &str, bytes: &[u8]) -> Result<Artifact, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(Artifact { path: name.to_string(), sha256: sha256_hex(bytes) })
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub cli: &'static str,
    pub core: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    /// Effective configuration after command-line overrides.
    pub config: serde_json::Value,
    pub seed: u64,
    pub workers: usize,
    pub versions: Versions,
    pub wall_time_s: f64,
    pub artifacts: Vec<Artifact>,
}

pub fn versions() -> Versions {
    Versions { cli: env!("CARGO_PKG_VERSION"), core: superabsorb::VERSION }
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf, CliError> {
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_vec_pretty(manifest)?)?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord<'a> {
    pub command: &'a str,
    pub kind: &'a str,
    pub message: String,
}

/// Best effort: the record is skipped if the directory itself cannot be created.
pub fn write_error(dir: &Path, command: &str, err: &CliError) -> Option<PathBuf> {
    std::fs::create_dir_all(dir).ok()?;
    let path = dir.join("error.json");
    let rec = ErrorRecord { command, kind: err.kind(), message: err.to_string() };
    std::fs::write(&path, serde_json::to_vec_pretty(&rec).ok()?).ok()?;
    Some(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(1.5), "1.5");
        assert_eq!(fmt_f64(2.1277e-12), "2.1277e-12");
        assert_eq!(fmt_f64(-3e20), "-3e20");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        assert_eq!(fmt_opt(None), "");
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), "".into()]);
        let art = write_artifact(dir.path(), "t.csv", &t.to_bytes().unwrap()).unwrap();
        assert_eq!(art.sha256.len(), 64);
        let back = Table::read(&dir.path().join("t.csv")).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.numbers("b").unwrap(), vec![None]);
        assert!(back.column("c").is_err());
    }

    proptest! {
        #[test]
        fn formatted_numbers_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}

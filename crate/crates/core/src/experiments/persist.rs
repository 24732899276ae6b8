//! CSV/JSON output with reproducibility manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

/// Floats in CSV output: 17 significant digits, fixed exponent form.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// A header plus string rows, written as CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let ser = |e: csv::Error| LabError::Serialization(e.to_string());
        w.write_record(&self.header).map_err(ser)?;
        for r in &self.rows {
            w.write_record(r).map_err(ser)?;
        }
        let bytes = w.into_inner().map_err(|e| LabError::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| LabError::Serialization(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let ser = |e: csv::Error| LabError::Serialization(e.to_string());
        let header = r.headers().map_err(ser)?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<std::result::Result<_, _>>()
            .map_err(ser)?;
        Ok(Self { header, rows })
    }
}

/// Seed, configuration digest, code version, worker count and wall-clock
/// times of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub config_digest: String,
    pub code_version: String,
    pub workers: usize,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub fn start(config: &Value, seed: u64, workers: usize) -> Self {
        Self {
            seed,
            config_digest: config_digest(config),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            workers,
            started_unix: unix_now(),
            finished_unix: None,
        }
    }

    pub fn finish(&mut self) {
        self.finished_unix = Some(unix_now());
    }
}

fn canonical(v: &Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            Value::Object(keys.into_iter().map(|k| (k.clone(), canonical(&m[k]))).collect())
        }
        Value::Array(a) => Value::Array(a.iter().map(canonical).collect()),
        other => other.clone(),
    }
}

/// SHA-256 of the compact JSON with object keys sorted recursively.
pub fn config_digest(config: &Value) -> String {
    let text = serde_json::to_string(&canonical(config)).expect("JSON values always serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Serialize, Deserialize)]
struct Envelope<R> {
    report: R,
    manifest: RunManifest,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> LabError {
    LabError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Write `<stem>.csv`, `<stem>.json` (report and manifest) and
/// `manifest.json` into `dir`, creating it if needed.
pub fn persist<R: Serialize>(dir: &Path, stem: &str, table: &Table, report: &R, manifest: &RunManifest) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    fs::write(&csv_path, table.to_csv()?).map_err(|e| io_err(&csv_path, e))?;
    let json_path = dir.join(format!("{stem}.json"));
    let body = serde_json::to_string_pretty(&Envelope { report, manifest: manifest.clone() })
        .map_err(|e| LabError::Serialization(e.to_string()))?;
    fs::write(&json_path, body + "\n").map_err(|e| io_err(&json_path, e))?;
    let manifest_path = dir.join("manifest.json");
    let body = serde_json::to_string_pretty(manifest).map_err(|e| LabError::Serialization(e.to_string()))?;
    fs::write(&manifest_path, body + "\n").map_err(|e| io_err(&manifest_path, e))?;
    Ok(vec![csv_path, json_path, manifest_path])
}

/// Read back a `<stem>.json` written by [`persist`].
pub fn load_report<R: DeserializeOwned>(path: &Path) -> Result<(R, RunManifest)> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let env: Envelope<R> = serde_json::from_str(&text).map_err(|e| LabError::Serialization(e.to_string()))?;
    Ok((env.report, env.manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-2.0), "-2.0000000000000000e0");
        assert_eq!(format_float(f64::NEG_INFINITY), "-inf");
        let x = 0.962_423_650_119_206_9;
        assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn digest_ignores_key_order() {
        let a = json!({"b": 1, "a": {"y": [1, 2], "x": "s"}});
        let b = json!({"a": {"x": "s", "y": [1, 2]}, "b": 1});
        assert_eq!(config_digest(&a), config_digest(&b));
        assert_ne!(config_digest(&a), config_digest(&json!({"b": 2})));
    }

    #[test]
    fn empty_report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = Table::new(&["n", "site", "verdict"]);
        let m = RunManifest::start(&json!({}), 3, 1);
        let files = persist(dir.path(), "census", &t, &Vec::<u64>::new(), &m).unwrap();
        let csv = fs::read_to_string(&files[0]).unwrap();
        assert_eq!(csv, "n,site,verdict\n");
        let (r, m2): (Vec<u64>, RunManifest) = load_report(&files[1]).unwrap();
        assert!(r.is_empty());
        assert_eq!(m, m2);
        assert_eq!(Table::from_csv(&csv).unwrap(), t);
    }

    #[test]
    fn unwritable_path_names_it() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("f");
        fs::write(&file, "x").unwrap();
        let err = persist(&file.join("sub"), "x", &Table::new(&["a"]), &0, &RunManifest::start(&json!({}), 0, 1)).unwrap_err();
        assert!(err.to_string().contains("sub"));
    }
}

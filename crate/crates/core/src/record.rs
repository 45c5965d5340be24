//! Append-only run log.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const RUN_LOG: &str = "runs.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub config: serde_json::Value,
    /// SHA-256 of the input manifest bytes, hex encoded.
    pub manifest_digest: Option<String>,
    pub frame_times_ms: Vec<f64>,
    pub outputs: Vec<PathBuf>,
    pub version: String,
}

impl RunRecord {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            config,
            manifest_digest: None,
            frame_times_ms: Vec::new(),
            outputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    /// Appends one JSON line to `dir/runs.jsonl`.
    pub fn append(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(RUN_LOG);
        let mut line = serde_json::to_string(self)?;
        line.push('\n');
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .and_then(|mut f| f.write_all(line.as_bytes()))
            .map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

pub fn read_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let path = dir.join(RUN_LOG);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_append() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = RunRecord::new("track", serde_json::json!({"tau": 0.2}));
        a.frame_times_ms = vec![1.5];
        a.append(dir.path()).unwrap();
        RunRecord::new("eval", serde_json::Value::Null)
            .append(dir.path())
            .unwrap();
        let got = read_records(dir.path()).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0], a);
        assert_eq!(got[1].command, "eval");
    }

    #[test]
    fn digest_of_abc() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        std::fs::write(&p, b"abc").unwrap();
        assert_eq!(
            file_digest(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}

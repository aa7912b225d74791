//! Output directory bookkeeping: CSV tables, JSON documents, JSON-lines
//! streams and the manifest that pins them down.

use crate::RunError;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub command: &'a str,
    pub package: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config_sha256: String,
    pub config: &'a C,
    pub outputs: Vec<OutputEntry>,
}

/// Single writer for everything a command produces.
pub struct OutputDir {
    root: PathBuf,
    entries: Vec<OutputEntry>,
    timings: Vec<(String, f64)>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<OutputDir, RunError> {
        fs::create_dir_all(root)?;
        Ok(OutputDir { root: root.to_path_buf(), entries: Vec::new(), timings: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<(), RunError> {
        fs::write(self.root.join(name), &bytes)?;
        self.entries.push(OutputEntry { file: name.to_string(), sha256: sha256_hex(&bytes), bytes: bytes.len() });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| RunError::Io(e.to_string()))?;
        bytes.push(b'\n');
        self.put(name, bytes)
    }

    pub fn jsonl<T: Serialize>(&mut self, name: &str, records: &[T]) -> Result<(), RunError> {
        let mut bytes = Vec::new();
        for r in records {
            serde_json::to_writer(&mut bytes, r).map_err(|e| RunError::Io(e.to_string()))?;
            bytes.push(b'\n');
        }
        self.put(name, bytes)
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), RunError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| RunError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| RunError::Io(e.to_string()))?;
        self.put(name, bytes)
    }

    /// Wall-clock timings go to `timings.log`, which the manifest leaves out
    /// so reruns stay byte-identical.
    pub fn time(&mut self, stage: &str, seconds: f64) {
        self.timings.push((stage.to_string(), seconds));
    }

    pub fn finish<C: Serialize>(mut self, command: &str, seed: u64, config: &C) -> Result<PathBuf, RunError> {
        let config_bytes = serde_json::to_vec(config).map_err(|e| RunError::Io(e.to_string()))?;
        self.entries.sort_by(|a, b| a.file.cmp(&b.file));
        let manifest = Manifest {
            command,
            package: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config_sha256: sha256_hex(&config_bytes),
            config,
            outputs: std::mem::take(&mut self.entries),
        };
        let path = self.root.join("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| RunError::Io(e.to_string()))?;
        bytes.push(b'\n');
        fs::write(&path, bytes)?;
        let mut log = fs::File::create(self.root.join("timings.log"))?;
        for (stage, s) in &self.timings {
            writeln!(log, "{stage}\t{s:.3}s")?;
        }
        Ok(path)
    }
}

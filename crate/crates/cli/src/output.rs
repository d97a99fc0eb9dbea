use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::{Failure, EXIT_IO};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Suffixed sibling path, e.g. `out.traj` + `.ledger.tsv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes every file to a temporary sibling first and renames only once all
/// of them have been written, so a failure leaves no partial outputs.
pub fn write_all_atomic(files: &[(PathBuf, Vec<u8>)]) -> Result<(), Failure> {
    let io = |path: &Path, e: std::io::Error| Failure::new(EXIT_IO, format!("cannot write {}: {e}", path.display()));
    let mut staged = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = NamedTempFile::new_in(dir).map_err(|e| io(path, e))?;
        tmp.write_all(bytes).map_err(|e| io(path, e))?;
        tmp.as_file().sync_all().map_err(|e| io(path, e))?;
        staged.push((tmp, path));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| io(path, e.error))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path, bytes: &[u8]) -> Self {
        Self {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct LedgerSummary {
    pub total_eps: f64,
    pub max_path_sum: f64,
    pub worst_path: String,
    pub paths: usize,
    pub charges: usize,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub mechanism: String,
    /// `key = value` lines of the resolved configuration.
    pub config: Vec<String>,
    pub inputs: Vec<FileDigest>,
    pub seed: u64,
    pub tool_version: String,
    pub outputs: Vec<FileDigest>,
    pub ledger: LedgerSummary,
}

impl RunManifest {
    pub fn to_json(&self) -> Vec<u8> {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s.into_bytes()
    }
}

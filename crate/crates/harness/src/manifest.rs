//! Content hashes of emitted artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    /// `(path relative to the output directory, sha256)`.
    pub entries: Vec<(String, String)>,
    /// `(experiment label, reason)` for work that produced no artifact.
    pub failures: Vec<(String, String)>,
}

impl Manifest {
    pub fn record(&mut self, relative: &str, bytes: &[u8]) {
        self.entries.push((relative.to_string(), sha256_hex(bytes)));
    }

    pub fn fail(&mut self, label: &str, reason: impl std::fmt::Display) {
        self.failures.push((label.to_string(), reason.to_string().replace('\n', " ")));
    }

    pub fn merge(&mut self, other: Manifest) {
        self.entries.extend(other.entries);
        self.failures.extend(other.failures);
    }

    /// `<sha256>  <path>` lines sorted by path, then `FAILED  <label>  <reason>` lines.
    pub fn render(&self) -> String {
        let mut entries = self.entries.clone();
        entries.sort();
        let mut out = String::new();
        for (path, hash) in &entries {
            let _ = writeln!(out, "{hash}  {path}");
        }
        for (label, reason) in &self.failures {
            let _ = writeln!(out, "FAILED  {label}  {reason}");
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.render()).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn parse(text: &str) -> Manifest {
        let mut m = Manifest::default();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("FAILED  ") {
                let (label, reason) = rest.split_once("  ").unwrap_or((rest, ""));
                m.failures.push((label.to_string(), reason.to_string()));
            } else if let Some((hash, path)) = line.split_once("  ") {
                m.entries.push((path.to_string(), hash.to_string()));
            }
        }
        m
    }
}

/// Write `bytes` under `dir/relative` and record the hash.
pub fn emit(dir: &Path, relative: &str, bytes: &[u8], manifest: &mut Manifest) -> Result<()> {
    let path = dir.join(relative);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    manifest.record(relative, bytes);
    Ok(())
}

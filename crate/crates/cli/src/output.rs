//! Atomic file output and run manifests.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::CliError;

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Keys holding measured durations; everything else is reproducible.
pub const TIMING_PREFIX: &str = "timing.";

/// Flat, sorted `key = value` record of a run.
#[derive(Debug, Default, Clone)]
pub struct Manifest {
    entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Manifest::default();
        m.set("command", command);
        m.set("tool_version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn timing(&mut self, key: &str, seconds: f64) {
        self.set(&format!("{TIMING_PREFIX}{key}"), seconds);
    }

    /// Records an input path and its content digest.
    pub fn input(&mut self, name: &str, path: &Path) -> Result<(), CliError> {
        self.set(&format!("input.{name}.path"), path.display());
        if path.is_dir() {
            return Ok(());
        }
        let digest = sha256_file(path)?;
        self.set(&format!("input.{name}.sha256"), digest);
        Ok(())
    }

    pub fn output(&mut self, name: &str, bytes: &[u8]) {
        self.set(&format!("output.{name}.sha256"), sha256_bytes(bytes));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Parses a rendered manifest.
    pub fn parse(text: &str) -> BTreeMap<String, String> {
        text.lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        write_atomic(&dir.join("manifest.txt"), self.render().as_bytes())
    }
}

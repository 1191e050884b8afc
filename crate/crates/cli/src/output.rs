//! Atomic file output and run manifests.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

/// Marker for errors caused by the invocation rather than the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// Write `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)
        .with_context(|| format!("cannot write {}", path.display()))?;
    tmp.as_file().sync_all().ok();
    tmp.persist(path)
        .map_err(|e| e.error)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Read an input file; a missing file is a usage error.
pub fn read_input(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(usage(format!("input file {} does not exist", path.display())));
    }
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Plain-text record of what a command read, used and wrote.
///
/// Contains no timestamps or absolute paths beyond what the caller passed,
/// so repeated runs produce identical manifests.
#[derive(Debug, Clone)]
pub struct Manifest {
    command: String,
    params: Vec<(String, String)>,
    inputs: Vec<(String, String)>,
    outputs: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            command: command.to_string(),
            params: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) -> &mut Self {
        self.inputs.push((path.display().to_string(), sha256_hex(bytes)));
        self
    }

    /// Atomically write an output file and record it.
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes)?;
        self.outputs.push((path.display().to_string(), sha256_hex(bytes)));
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("tool=sppa {}\n", env!("CARGO_PKG_VERSION")));
        s.push_str(&format!("command={}\n", self.command));
        s.push_str(&format!("rng={}\n", sppa_core::synth::RNG_NAME));
        for (k, v) in &self.params {
            s.push_str(&format!("param.{k}={v}\n"));
        }
        for (p, h) in &self.inputs {
            s.push_str(&format!("input={p} sha256={h}\n"));
        }
        for (p, h) in &self.outputs {
            s.push_str(&format!("output={p} sha256={h}\n"));
        }
        s
    }

    pub fn finish(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render().as_bytes())
    }
}

/// `<path>.manifest`
pub fn default_manifest_path(primary: &Path) -> PathBuf {
    let mut s = primary.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

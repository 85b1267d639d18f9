//! Run manifests: enough to re-execute a command and check its outputs.
//!
//! A manifest lists the exact arguments, working directory, tool version,
//! and SHA-256 digests of every input and output file. It carries no
//! timestamps, so re-running a deterministic command reproduces the
//! manifest byte for byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub cwd: PathBuf,
    pub seed: Option<u64>,
    /// Resolved numeric settings, for reading rather than replay.
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut s = primary.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Collects what a command read and wrote.
pub struct Recorder {
    command: String,
    args: Vec<String>,
    seed: Option<u64>,
    config: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn new(command: &str, args: Vec<String>) -> Self {
        Recorder {
            command: command.into(),
            args,
            seed: None,
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn config<T: Serialize>(&mut self, config: &T) -> Result<()> {
        self.config = serde_json::to_value(config)?;
        Ok(())
    }

    /// Writes `<primary>.manifest.json`.
    pub fn finish(self, primary: &Path) -> Result<PathBuf> {
        let digest = |paths: &[PathBuf]| -> Result<Vec<FileDigest>> {
            paths
                .iter()
                .map(|p| Ok(FileDigest { path: p.clone(), sha256: sha256_file(p)? }))
                .collect()
        };
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command,
            args: self.args,
            cwd: std::env::current_dir()?,
            seed: self.seed,
            config: self.config,
            inputs: digest(&self.inputs)?,
            outputs: digest(&self.outputs)?,
        };
        let path = manifest_path(primary);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote manifest {}", path.display());
        Ok(path)
    }
}

/// Runs the recorded command again and compares every digest.
pub fn replay(path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    let manifest: Manifest =
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
    if manifest.version != env!("CARGO_PKG_VERSION") {
        log::warn!(
            "manifest written by version {}, replaying with {}",
            manifest.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { manifest.cwd.join(p) };
    for input in &manifest.inputs {
        let now = sha256_file(&resolve(&input.path))?;
        if now != input.sha256 {
            bail!("input {} changed since the recorded run", input.path.display());
        }
    }
    let exe = std::env::current_exe()?;
    let status = Command::new(exe)
        .args(&manifest.args)
        .current_dir(&manifest.cwd)
        .status()
        .context("re-running recorded command")?;
    if !status.success() {
        bail!("replayed command exited with {status}");
    }
    let mut mismatched = Vec::new();
    for output in &manifest.outputs {
        if sha256_file(&resolve(&output.path))? != output.sha256 {
            mismatched.push(output.path.display().to_string());
        }
    }
    if !mismatched.is_empty() {
        bail!("outputs differ from the recorded run: {}", mismatched.join(", "));
    }
    println!("replay ok: {} output(s) identical", manifest.outputs.len());
    Ok(())
}

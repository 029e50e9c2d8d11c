//! Atomic artifact writing and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Collects artifacts for one run; files appear only once fully written.
pub struct Outputs {
    dir: PathBuf,
    artifacts: BTreeMap<String, String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: BTreeMap::new(),
        })
    }

    /// Writes `name` via a temporary file in the same directory and a rename.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        write_atomic(&path, contents)?;
        self.artifacts
            .insert(name.to_string(), hex::encode(Sha256::digest(contents)));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json` with parameters, artifact hashes and a timestamp.
    pub fn finish<P: Serialize>(mut self, command: &str, parameters: &P, timing: serde_json::Value) -> Result<PathBuf> {
        let manifest = serde_json::json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "parameters": parameters,
            "artifacts": self.artifacts,
            "timestamp": chrono::Utc::now().to_rfc3339(),
            "timing": timing,
        });
        let artifacts = std::mem::take(&mut self.artifacts);
        let path = self.write_json("manifest.json", &manifest)?;
        self.artifacts = artifacts;
        Ok(path)
    }
}

pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .context("output path has no file name")?;
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| -> Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.with_context(|| format!("writing {}", path.display()))
}

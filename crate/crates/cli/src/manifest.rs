use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use liw::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Record of one command run: what went in, what came out, by content hash.
/// Paths are relative to the output root and nothing time-dependent is
/// stored, so identical runs produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub config_sha256: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config_sha256: String) -> Self {
        Manifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn input(&mut self, root: &Path, path: &Path) -> Result<()> {
        self.inputs.insert(relative(root, path), file_sha256(path)?);
        Ok(())
    }

    pub fn output(&mut self, root: &Path, path: &Path) -> Result<()> {
        self.outputs.insert(relative(root, path), file_sha256(path)?);
        Ok(())
    }

    /// Adds every regular file under `dir` as an output.
    pub fn output_dir(&mut self, root: &Path, dir: &Path) -> Result<()> {
        for f in list_files(dir)? {
            self.output(root, &f)?;
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

fn relative(root: &Path, path: &Path) -> String {
    let p = path.strip_prefix(root).unwrap_or(path);
    p.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Regular files under `dir`, sorted.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

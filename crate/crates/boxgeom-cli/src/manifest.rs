//! Run manifests: enough information to reproduce any output bit-exactly.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
pub struct InputEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub seed: u64,
    pub args: Vec<String>,
    pub inputs: Vec<InputEntry>,
    pub outputs: usize,
    pub skipped: Vec<String>,
}

impl Manifest {
    pub fn new(subcommand: &str, seed: u64) -> Self {
        Self {
            tool: "boxgeom",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            seed,
            args: std::env::args().skip(1).collect(),
            inputs: Vec::new(),
            outputs: 0,
            skipped: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> anyhow::Result<()> {
        let data = std::fs::read(path)?;
        let digest = Sha256::digest(&data);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.push(InputEntry {
            path: path.display().to_string(),
            sha256: hex,
        });
        Ok(())
    }

    /// Records the path without hashing (directories, large trees).
    pub fn add_input_path(&mut self, path: &Path) {
        self.inputs.push(InputEntry {
            path: path.display().to_string(),
            sha256: String::new(),
        });
    }

    /// Writes the manifest next to the output: `<dir>/manifest.json` for a
    /// directory output, `<file>.manifest.json` otherwise.
    pub fn write(&self, output: &Path) -> anyhow::Result<PathBuf> {
        let path = if output.is_dir() {
            output.join("manifest.json")
        } else {
            let mut name = output.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            output.with_file_name(name)
        };
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

//! `manifest.json`: what produced an output directory.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::failure::{with_path, CmdResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub arguments: Vec<String>,
    pub seed: Option<u64>,
    pub output_dir: String,
    pub created_unix_s: u64,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(command: &str, out: &Path, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            arguments: std::env::args().skip(1).collect(),
            seed,
            output_dir: out.display().to_string(),
            created_unix_s: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Reads and hashes an input file, returning its contents.
    pub fn input(&mut self, role: &str, path: &Path) -> CmdResult<Vec<u8>> {
        let bytes = with_path(std::fs::read(path).map_err(Into::into), path)?;
        self.input_bytes(role, &path.display().to_string(), &bytes);
        Ok(bytes)
    }

    pub fn input_bytes(&mut self, role: &str, label: &str, bytes: &[u8]) {
        self.inputs.push(InputRecord {
            role: role.into(),
            path: label.into(),
            sha256: sha256_hex(bytes),
        });
    }

    /// Writes an output file relative to the output directory.
    pub fn output(&mut self, out: &Path, name: &str, contents: &str) -> CmdResult<PathBuf> {
        let path = out.join(name);
        std::fs::write(&path, contents)?;
        self.outputs.push(name.into());
        Ok(path)
    }

    pub fn write(&self, out: &Path) -> CmdResult {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(out.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }
}

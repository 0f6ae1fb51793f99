//! Output directory handling and the per-run `manifest.json`.
//!
//! The manifest records the command line (minus the output directory), the
//! resolved configuration and SHA-256 digests of every input and output
//! file. It carries no timestamps, so identical runs give identical bytes.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: String, data: &[u8]) -> Self {
        Self { path, bytes: data.len() as u64, sha256: sha256_hex(data) }
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub arguments: &'a [String],
    pub seed: u64,
    pub config: &'a RunConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// Collects input digests and writes artifacts into one directory.
pub struct RunDir {
    root: PathBuf,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::file(root, e))?;
        Ok(Self { root: root.to_path_buf(), inputs: Vec::new(), outputs: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let data = std::fs::read(path).map_err(|e| CliError::file(path, e))?;
        self.note_input(path, &data);
        Ok(data)
    }

    pub fn note_input(&mut self, path: &Path, data: &[u8]) {
        let name = path.to_string_lossy().into_owned();
        if !self.inputs.iter().any(|d| d.path == name) {
            self.inputs.push(FileDigest::of(name, data));
        }
    }

    pub fn write(&mut self, name: &str, data: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(name);
        std::fs::write(&path, data).map_err(|e| CliError::file(&path, e))?;
        self.outputs.push(FileDigest::of(name.to_string(), data));
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut data = serde_json::to_vec_pretty(value).map_err(|e| CliError::Data(format!("{name}: {e}")))?;
        data.push(b'\n');
        self.write(name, &data)
    }

    pub fn finish(mut self, command: &str, arguments: &[String], config: &RunConfig) -> Result<PathBuf, CliError> {
        self.outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            arguments,
            seed: config.seed,
            config,
            inputs: std::mem::take(&mut self.inputs),
            outputs: std::mem::take(&mut self.outputs),
        };
        let mut data = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Data(e.to_string()))?;
        data.push(b'\n');
        let path = self.root.join(MANIFEST_NAME);
        std::fs::write(&path, data).map_err(|e| CliError::file(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}

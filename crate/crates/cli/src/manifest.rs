//! Output bookkeeping and `manifest.txt`.
//!
//! Every file an experiment writes goes through [`Outputs`], which records
//! its SHA-256. The manifest lists the canonical config hash, the crate
//! versions and the outputs; it contains no timestamps, so repeated runs with
//! the same configuration produce identical manifests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::CliError;

pub const MANIFEST: &str = "manifest.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    prefix: String,
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            prefix: String::new(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Prepended to every relative path written from now on.
    pub fn set_prefix(&mut self, prefix: &str) {
        self.prefix = prefix.to_string();
    }

    /// Writes `body` to `dir/prefix/rel`, creating parent directories.
    pub fn write(&mut self, rel: &str, body: &str) -> Result<PathBuf, CliError> {
        let rel = format!("{}{rel}", self.prefix);
        let rel = rel.as_str();
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|source| CliError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        std::fs::write(&path, body).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.retain(|(name, _)| name != rel);
        self.files.push((rel.to_string(), sha256_hex(body.as_bytes())));
        Ok(path)
    }

    pub fn files(&self) -> &[(String, String)] {
        &self.files
    }

    /// Writes the manifest and returns its path.
    pub fn finish(self, experiment: &str, cfg: &Config) -> Result<PathBuf, CliError> {
        let text = manifest_text(experiment, cfg, &self.files);
        let path = self.dir.join(MANIFEST);
        std::fs::write(&path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}

pub fn manifest_text(experiment: &str, cfg: &Config, files: &[(String, String)]) -> String {
    let canonical = cfg.canonical();
    let mut s = String::new();
    let _ = writeln!(s, "experiment: {experiment}");
    let _ = writeln!(s, "config_sha256: {}", sha256_hex(canonical.as_bytes()));
    let _ = writeln!(s, "seed: {}", cfg.get("", "seed").unwrap_or(crate::DEFAULT_SEED_TEXT));
    let _ = writeln!(s, "rkctl: {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "rkctl-core: {}", rkctl_core::VERSION);
    let _ = writeln!(s, "outputs: {}", files.len());
    for (name, hash) in files {
        let _ = writeln!(s, "{hash}  {name}");
    }
    let _ = writeln!(s, "config:");
    for line in canonical.lines() {
        let _ = writeln!(s, "  {line}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn empty_output_list() {
        let dir = tempfile::tempdir().unwrap();
        let out = Outputs::new(dir.path()).unwrap();
        let path = out.finish("all", &Config::default()).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.contains("outputs: 0\n"));
    }

    #[test]
    fn records_hashes_once_per_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::new(dir.path()).unwrap();
        out.write("a/b.csv", "x\n").unwrap();
        out.write("a/b.csv", "y\n").unwrap();
        assert_eq!(out.files().len(), 1);
        assert_eq!(out.files()[0].1, sha256_hex(b"y\n"));
        assert_eq!(std::fs::read_to_string(dir.path().join("a/b.csv")).unwrap(), "y\n");
    }
}

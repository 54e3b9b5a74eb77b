use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::RunError;
use crate::formats::write_json;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub threads: usize,
    pub versions: Versions,
    pub wall_time_s: f64,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    #[serde(rename = "phonon-map")]
    pub phonon_map: &'static str,
    #[serde(rename = "phonon-map-core")]
    pub core: &'static str,
}

impl Versions {
    pub fn current() -> Self {
        Self { phonon_map: env!("CARGO_PKG_VERSION"), core: phonon_map_core::VERSION }
    }
}

pub fn sha256_file(path: &Path) -> Result<(String, u64), RunError> {
    let bytes = std::fs::read(path).map_err(|e| RunError::io(path, e))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

pub fn entries(out_dir: &Path, files: &[PathBuf]) -> Result<Vec<FileEntry>, RunError> {
    files
        .iter()
        .map(|f| {
            let (sha256, bytes) = sha256_file(f)?;
            let rel = f.strip_prefix(out_dir).unwrap_or(f);
            Ok(FileEntry { path: rel.display().to_string(), sha256, bytes })
        })
        .collect()
}

pub fn write(path: &Path, manifest: &Manifest) -> Result<(), RunError> {
    write_json(path, manifest)
}

//! Run-directory manifest: which trials exist and what configuration
//! produced them, pinned by content hashes so later stages can refuse
//! stale or tampered inputs.

use std::path::Path;

use regosense_core::robot::GaitKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const ESTIMATES_FILE: &str = "estimates.csv";

/// One trial's files within a run directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialEntry {
    pub index: usize,
    pub log: String,
    pub sidecar: String,
    /// SHA-256 of the log CSV bytes.
    pub log_sha256: String,
}

/// Contents of `manifest.json` in a run directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario_name: String,
    pub gait: GaitKind,
    /// Batch seed; trial i derives its own stream from it.
    pub seed: u64,
    pub trials: usize,
    /// SHA-256 of the canonical `config.toml` written next to this file.
    pub config_sha256: String,
    pub files: Vec<TrialEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn read_manifest(run: &Path) -> Result<Manifest, CliError> {
    let path = run.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::MalformedLog(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::MalformedLog(format!("{}: {e}", path.display())))
}

/// Verifies that the run's `config.toml` still matches the hash recorded
/// when the trials were simulated.
pub fn verify_config_hash(run: &Path, manifest: &Manifest) -> Result<String, CliError> {
    let path = run.join(CONFIG_FILE);
    let bytes = std::fs::read(&path)
        .map_err(|e| CliError::Mismatch(format!("{}: {e}", path.display())))?;
    let hash = sha256_hex(&bytes);
    if hash != manifest.config_sha256 {
        return Err(CliError::Mismatch(format!(
            "{}: config hash {} does not match manifest {}",
            path.display(),
            hash,
            manifest.config_sha256
        )));
    }
    Ok(hash)
}

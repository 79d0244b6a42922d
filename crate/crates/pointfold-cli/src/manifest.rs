//! The `manifest.json` run record written next to every command's outputs.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Settings;
use crate::error::{io_err, Result};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub seed: u64,
    pub config_sha256: String,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, settings: &Settings) -> RunManifest {
        let mut hasher = Sha256::new();
        hasher.update(settings.canonical().as_bytes());
        let digest = hasher.finalize();
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        RunManifest {
            command: command.to_string(),
            argv: std::env::args().collect(),
            seed: settings.seed,
            config_sha256: hex,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join("manifest.json");
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, json).map_err(io_err(path))
    }
}

//! Run manifest written next to every output file.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// SHA-256 of the canonical resolved configuration.
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub version: String,
    pub arguments: Vec<String>,
    pub outputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        config_sha256: String,
        seed: Option<u64>,
        argv: &[String],
    ) -> Self {
        RunManifest {
            subcommand: subcommand.into(),
            config_sha256,
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            arguments: argv.to_vec(),
            outputs: Vec::new(),
        }
    }

    pub fn with_output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }

    /// `<output>.manifest.json`.
    pub fn path_for(output: &Path) -> std::path::PathBuf {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest.json");
        name.into()
    }

    pub fn write_beside(&self, output: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(Self::path_for(output), text + "\n")
    }
}

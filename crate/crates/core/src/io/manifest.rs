//! Reproducibility manifest written next to every set of outputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Config;
use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA: &str = "incentives.run-manifest/1.0.0";
pub const MANIFEST_FILE: &str = "manifest.json";

const MODULES: [&str; 7] = [
    "core-model",
    "mip-assembly",
    "estimation",
    "prediction",
    "incentive-optimizer",
    "trial-simulator",
    "app-io",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub command: String,
    pub arguments: Vec<String>,
    pub master_seed: u64,
    pub config_sha256: String,
    pub config: Config,
    pub module_versions: BTreeMap<String, String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

fn digest_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(super::sha256_hex(&bytes))
}

impl RunManifest {
    pub fn new(command: &str, arguments: Vec<String>, config: &Config) -> Self {
        let version = env!("CARGO_PKG_VERSION").to_string();
        RunManifest {
            schema: MANIFEST_SCHEMA.to_string(),
            command: command.to_string(),
            arguments,
            master_seed: config.seed,
            config_sha256: config.digest(),
            config: config.clone(),
            module_versions: MODULES
                .iter()
                .map(|m| (m.to_string(), version.clone()))
                .collect(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let sha256 = digest_file(path)?;
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    /// Record `name`, a file already written inside `dir`.
    pub fn add_output(&mut self, dir: &Path, name: &str) -> Result<()> {
        let sha256 = digest_file(&dir.join(name))?;
        self.outputs.push(FileDigest {
            path: name.to_string(),
            sha256,
        });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("manifest: {e}")))
    }

    /// Check every recorded output digest against the files in `dir`.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        if self.config.digest() != self.config_sha256 {
            return Err(Error::Config(
                "config digest does not match the embedded config".into(),
            ));
        }
        for f in &self.outputs {
            let got = digest_file(&dir.join(&f.path))?;
            if got != f.sha256 {
                return Err(Error::Config(format!("digest mismatch for {}", f.path)));
            }
        }
        Ok(())
    }
}

//! File formats, configuration and run manifests.

pub mod config;
pub mod manifest;
pub mod observations;
pub mod results;

pub use config::{reference_traits, CohortSettings, Config, IncentiveSettings, MipSettings};
pub use manifest::{FileDigest, RunManifest, MANIFEST_FILE, MANIFEST_SCHEMA};
pub use observations::{
    load_observations, read_observations, save_observations, write_observations, FILE_WEEKS,
    OBSERVATION_HEADER,
};
pub use results::{write_spend_curves, write_sweep_long, write_sweep_summary};

use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

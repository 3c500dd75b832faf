//! Run manifests: everything needed to reproduce an output, and nothing
//! that varies between identical runs.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::format::Units;
use crate::ObjectiveArg;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub command: &'static str,
    pub input_sha256: String,
    pub config: ResolvedConfig,
}

#[derive(Debug, Serialize)]
pub struct ResolvedConfig {
    pub beta_grid: Vec<f64>,
    pub extend_to_zero_rate: bool,
    pub restarts: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iters: usize,
    pub objective: ObjectiveArg,
    pub q_cardinality: usize,
    pub units: Units,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(command: &'static str, input: &[u8], config: ResolvedConfig) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            input_sha256: sha256_hex(input),
            config,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

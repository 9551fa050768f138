//! Run manifests: enough to reproduce an output directory bit for bit.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;
use crate::error::AppError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedDefaults {
    pub initial_state: Vec<f64>,
    /// Random-walk state before the first step.
    pub initial_walk: Vec<f64>,
    pub initial_covariance: Vec<Vec<f64>>,
    pub process_covariance: Vec<Vec<f64>>,
    pub controller_sign: String,
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub resolved: ResolvedDefaults,
    pub outputs: Vec<String>,
    pub config: Option<ScenarioConfig>,
}

pub fn config_hash(config: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(config.to_toml().as_bytes()))
}

fn rows(m: &ltv_sentinel_core::Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: &ScenarioConfig,
        seeds: Vec<u64>,
        tau: Option<f64>,
        outputs: Vec<String>,
    ) -> Result<Self, AppError> {
        let scenario = config.scenario()?;
        let dims = scenario.system.dims();
        let init = config.initial_filter_state(dims)?;
        let mut config = config.clone();
        config.detector.tau = tau.or(config.detector.tau);
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: config_hash(&config),
            seeds,
            resolved: ResolvedDefaults {
                initial_state: scenario.initial_state.iter().copied().collect(),
                initial_walk: vec![0.0; dims.n],
                initial_covariance: rows(&init.p_prior),
                process_covariance: rows(scenario.system.matrices_at(0).q),
                controller_sign: "negative".into(),
                tau: config.detector.tau,
            },
            outputs,
            config: Some(config),
        })
    }
}

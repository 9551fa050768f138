//! Files, experiments and the command line around `ltv-sentinel-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod output;

pub use config::ScenarioConfig;
pub use error::AppError;

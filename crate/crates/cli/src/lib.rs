//! Configuration, caching and experiment orchestration for the `qsky`
//! command-line runner.

pub mod cache;
pub mod config;
pub mod output;
pub mod runner;

pub use cache::{cache_key, SpectrumCache, SpectrumKey, CACHE_DIR_ENV};
pub use config::{parse_config, ConfigError, ExperimentConfig, ExperimentKind, Grid};
pub use output::{RunManifest, Table};
pub use runner::{config_hash, run_experiment, CacheChoice, RunError, RunOptions, RunOutcome};

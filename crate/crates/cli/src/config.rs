//! Settings shared by several commands, resolved as
//! command-line flag > config file > environment > built-in default.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

pub const THREADS_ENV: &str = "HYBRIDFM_THREADS";

/// Keys accepted in the TOML config file. All optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub d: Option<usize>,
    pub lr: Option<f64>,
    pub threads: Option<usize>,
    pub epochs: Option<usize>,
    pub patience: Option<usize>,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub test_fraction: Option<f64>,
    pub l2: Option<f64>,
    pub threshold: Option<f64>,
    pub negative_ratio: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Thread count when neither flag nor config file sets one.
pub fn default_threads() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => bail!("{THREADS_ENV} must be a positive integer, got `{v}`"),
        },
        Err(_) => Ok(hybridfm::TrainConfig::default().threads),
    }
}

pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

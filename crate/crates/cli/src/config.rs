//! Run configuration files and manifests.
//!
//! Both are TOML with the same layout, so a manifest written by `train` can
//! be passed back through `--config`:
//!
//! ```toml
//! tool = "tvsvm"
//! version = "0.1.0"
//!
//! [data]
//! path = "/data/moons.csv"
//! sha256 = "…"
//! normalize = "None"
//!
//! [train]
//! c = 3.0
//! kernels = ["Gaussian beta=4", "Linear"]
//! mkl_layers = [8, 1]
//! ```
//!
//! Every key is optional in a config file. Command-line flags override the
//! file, the file overrides `TVSVM_SEED`, and that overrides the defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tvsvm::data::NormalizeMode;
use tvsvm::train::TrainConfig;

use crate::error::{CliError, Result};

pub const TOOL: &str = "tvsvm";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SEED_ENV: &str = "TVSVM_SEED";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalize: Option<NormalizeMode>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[allow(dead_code)]
    tool: Option<String>,
    #[allow(dead_code)]
    version: Option<String>,
    #[serde(default)]
    data: DataSection,
    #[serde(default)]
    train: toml::Table,
}

/// A parsed config file.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    pub data: DataSection,
    pub train: TrainConfig,
    /// Whether the file set `train.seed` explicitly.
    pub has_seed: bool,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        let has_seed = raw.train.contains_key("seed");
        let train: TrainConfig = toml::Value::Table(raw.train)
            .try_into()
            .map_err(|e: toml::de::Error| e.to_string())?;
        Ok(Self {
            data: raw.data,
            train,
            has_seed,
        })
    }
}

/// Seed from `TVSVM_SEED`, if set.
pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// Flag, then config, then environment, then `default`.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>, default: u64) -> Result<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    Ok(env_seed()?.unwrap_or(default))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Everything needed to repeat a training run.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub data: DataSection,
    pub train: TrainConfig,
}

impl Manifest {
    pub fn new(data: DataSection, train: TrainConfig) -> Self {
        Self {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            data,
            train,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Usage(format!("cannot write manifest: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tvsvm::KernelSpec;

    #[test]
    fn manifest_round_trips_through_config() {
        let train = TrainConfig {
            c: 3.0,
            lr0: 0.001,
            seed: 42,
            kernels: vec![KernelSpec::Gaussian { beta: 4.0 }, KernelSpec::Linear],
            ..TrainConfig::default()
        };
        let data = DataSection {
            path: Some("/tmp/x.csv".into()),
            sha256: Some("ab".into()),
            normalize: Some(NormalizeMode::MinMaxPerDim),
            ..DataSection::default()
        };
        let text = Manifest::new(data.clone(), train.clone()).to_toml().unwrap();
        let back = ConfigFile::parse(&text).unwrap();
        assert_eq!(back.train, train);
        assert_eq!(back.data, data);
        assert!(back.has_seed);
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let cfg = ConfigFile::parse("[train]\nepochs = 7\n").unwrap();
        assert_eq!(cfg.train.epochs, 7);
        assert_eq!(cfg.train.batch_size, TrainConfig::default().batch_size);
        assert!(!cfg.has_seed);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ConfigFile::parse("[train]\nepoch = 7\n").is_err());
        assert!(ConfigFile::parse("colour = 1\n").is_err());
    }
}

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::canonical::to_canonical_vec;
use crate::datacenter::DataCenterConfig;
use crate::domain::{Error, Result};
use crate::edu::DEFAULT_MAX_PAYLOAD_BYTES;
use crate::provider::ProviderConfig;

pub const CONFIG_FILE: &str = "config.json";
pub const DEFAULT_SNAPSHOT_EVERY: u64 = 1000;

/// Static configuration of one deployment, stored as `config.json` in the
/// data directory. Not part of the state digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudConfig {
    pub datacenter: DataCenterConfig,
    pub provider: ProviderConfig,
    pub max_payload_bytes: u64,
    /// Write a snapshot after every this many log entries; 0 disables them.
    pub snapshot_every: u64,
    /// Seed of the generator for tokens and salts.
    pub rng_seed: u64,
}

impl Default for CloudConfig {
    fn default() -> Self {
        CloudConfig {
            datacenter: DataCenterConfig::default(),
            provider: ProviderConfig::default(),
            max_payload_bytes: DEFAULT_MAX_PAYLOAD_BYTES,
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
            rng_seed: 0,
        }
    }
}

impl CloudConfig {
    pub fn validate(&self) -> Result<()> {
        self.datacenter.validate()?;
        self.provider.validate()?;
        if self.max_payload_bytes == 0 {
            return Err(Error::validation("max_payload_bytes must be positive"));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read(path)
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))?;
        let config: CloudConfig = serde_json::from_slice(&raw)
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, to_canonical_vec(self))
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))
    }
}

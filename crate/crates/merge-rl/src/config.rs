//! Structured run configuration: one JSON document with env, reward, net
//! and train sections. Unknown keys are rejected; every field has a
//! default, so `{}` is a valid config.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{IdmParams, RoadGeometry, TrafficConfig};
use crate::error::{Error, Result};
use crate::qfunc::DEFAULT_HIDDEN;
use crate::reward::RewardWeights;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub geometry: RoadGeometry,
    pub traffic: TrafficConfig,
    pub idm: IdmParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetSection {
    pub hidden: usize,
}

impl Default for NetSection {
    fn default() -> Self {
        NetSection { hidden: DEFAULT_HIDDEN }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub env: EnvSection,
    pub reward: RewardWeights,
    pub net: NetSection,
    pub train: TrainConfig,
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.env.geometry.validate()?;
        self.env.traffic.validate(&self.env.geometry)?;
        self.reward.validate().map_err(Error::Config)?;
        self.train.validate()?;
        if self.net.hidden == 0 {
            return Err(Error::Config("net.hidden must be positive".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let config: Config = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }
}

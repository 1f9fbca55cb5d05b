//! TOML run configuration. Every section is optional; missing keys take their
//! defaults and unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fallnet::FallNetConfig;
use crate::features::FeatureConfig;
use crate::nn::TrainSchedule;
use crate::ojr::OjrConfig;
use crate::posenet::PoseNet3dConfig;
use crate::synth::GeneratorConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Fraction of records used for training; the rest is held out.
    pub train_frac: f64,
    pub split_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train_frac: 0.7,
            split_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schedule: TrainSchedule,
    pub ojr: OjrConfig,
    pub posenet: PoseNet3dConfig,
    pub fallnet: FallNetConfig,
    pub generator: GeneratorConfig,
    pub features: FeatureConfig,
    pub data: DataConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.ojr.validate()?;
        self.posenet.validate()?;
        self.fallnet.validate()?;
        self.features.frame.validate()?;
        if !(self.data.train_frac > 0.0 && self.data.train_frac < 1.0) {
            return Err(Error::Config(format!("train_frac {} not in (0,1)", self.data.train_frac)));
        }
        Ok(())
    }

    /// Writes the effective configuration as `config.toml` inside `dir`.
    pub fn echo_into(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.toml"), self.to_toml())?;
        Ok(())
    }
}

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use dfas_core::eval::DEFAULT_FPR_TARGETS;
use dfas_core::model::TrainConfig;
use dfas_core::synthrig::DatasetConfig;
use serde::{Deserialize, Serialize};

pub const RESOLVED_CONFIG: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub fpr_targets: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            fpr_targets: DEFAULT_FPR_TARGETS.to_vec(),
        }
    }
}

/// Everything a run depends on. Read from `--config`, then overridden by
/// flags, then written next to the outputs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub jobs: usize,
    pub synth: DatasetConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        cfg.jobs = cfg.jobs.max(1);
        Ok(cfg)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.synth.seed = seed;
        self.train.seed = seed;
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let text = toml::to_string(self).context("serializing the resolved config")?;
        fs::write(dir.join(RESOLVED_CONFIG), text)?;
        Ok(())
    }
}

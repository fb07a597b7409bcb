//! Experiment configuration document (TOML or JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow_env::EnvConfig;
use crate::rl::ddpg::DdpgConfig;
use crate::rl::ppo::PpoConfig;
use crate::rl::train::{Algo, AlgoConfig, Schedule};
use crate::safety::CbfConfig;
use crate::topology::{build_abilene, AbileneProfile, Topology};
use crate::traffic::TrafficConfig;

/// Where the topology comes from: the built-in Abilene fixture (with
/// optional capacity overrides) or a JSON document on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TopologySource {
    Abilene {
        #[serde(default)]
        profile: Option<AbileneProfile>,
    },
    File {
        path: PathBuf,
    },
}

impl Default for TopologySource {
    fn default() -> Self {
        TopologySource::Abilene { profile: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbfSettings {
    pub enabled: bool,
    #[serde(flatten)]
    pub config: CbfConfig,
}

impl Default for CbfSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            config: CbfConfig::default(),
        }
    }
}

fn default_trace_len() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub topology: TopologySource,
    #[serde(default)]
    pub traffic: TrafficConfig,
    #[serde(default)]
    pub env: EnvConfig,
    pub algo: Algo,
    #[serde(default)]
    pub ppo: PpoConfig,
    #[serde(default)]
    pub ddpg: DdpgConfig,
    #[serde(default)]
    pub cbf: CbfSettings,
    #[serde(default)]
    pub schedule: Schedule,
    /// Frozen evaluation trace length.
    #[serde(default = "default_trace_len")]
    pub eval_trace_len: usize,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Parses a TOML or JSON config file (by extension, JSON as fallback).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
            _ => serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.traffic.validate()?;
        if let TopologySource::File { path } = &self.topology {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "topology file {} does not exist",
                    path.display()
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.env.sigma) {
            return Err(Error::Config(format!("sigma {} outside [0,1]", self.env.sigma)));
        }
        if !(self.env.rho_max > 0.0 && self.env.rho_max <= 1.0) {
            return Err(Error::Config(format!("rho_max {} outside (0,1]", self.env.rho_max)));
        }
        if !(self.cbf.config.radius > 0.0 && self.cbf.config.radius <= 1.0) {
            return Err(Error::Config(format!(
                "cbf radius {} outside (0,1]",
                self.cbf.config.radius
            )));
        }
        if self.cbf.config.solutions_per_iter == 0 || self.cbf.config.max_iter == 0 {
            return Err(Error::Config("cbf needs at least one candidate and iteration".into()));
        }
        for (name, gamma) in [("ppo", self.ppo.gamma), ("ddpg", self.ddpg.gamma)] {
            if !(0.0..=1.0).contains(&gamma) {
                return Err(Error::Config(format!("{name} gamma {gamma} outside [0,1]")));
            }
        }
        if self.ppo.lr <= 0.0 || self.ddpg.lr <= 0.0 {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.schedule.steps_per_episode == 0 {
            return Err(Error::Config("steps_per_episode must be positive".into()));
        }
        Ok(())
    }

    pub fn build_topology(&self) -> Result<Topology> {
        match &self.topology {
            TopologySource::Abilene { profile } => {
                Ok(build_abilene(profile.unwrap_or_default()))
            }
            TopologySource::File { path } => crate::topology::load_topology(path),
        }
    }

    pub fn algo_config(&self) -> AlgoConfig {
        match self.algo {
            Algo::Ppo => AlgoConfig::Ppo(self.ppo.clone()),
            Algo::Ddpg => AlgoConfig::Ddpg(self.ddpg.clone()),
        }
    }

    /// Policy label for metric rows, e.g. `ppo-cbf`.
    pub fn policy_name(&self) -> String {
        if self.cbf.enabled {
            format!("{}-cbf", self.algo)
        } else {
            self.algo.to_string()
        }
    }
}

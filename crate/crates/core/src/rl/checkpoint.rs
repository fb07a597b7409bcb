//! Checkpoint save/load: full network weights, optimizer moments, and run
//! metadata, as a JSON document with exact 64-bit float round-tripping.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::flow_env::EnvConfig;
use crate::rl::mlp::{Adam, Mlp, VecAdam};
use crate::topology::Topology;
use crate::traffic::TrafficConfig;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// ChaCha stream positions captured at save time, enabling exact stream
/// continuation when resuming against the same environment. Word positions
/// are u128s stored as (hi, lo) pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RngState {
    /// One entry per worker's exploration stream.
    pub explore: Vec<(u64, u64)>,
    /// PPO minibatch shuffling / DDPG batch sampling stream.
    pub update: (u64, u64),
}

impl RngState {
    pub fn pack(pos: u128) -> (u64, u64) {
        ((pos >> 64) as u64, pos as u64)
    }

    pub fn unpack(pair: (u64, u64)) -> u128 {
        ((pair.0 as u128) << 64) | pair.1 as u128
    }
}

/// Serialized agent state plus provenance. `log_std`, `adam_log_std`, and
/// `target_critic` are algorithm-specific and optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub algo: String,
    pub episode: u64,
    pub global_step: u64,
    pub lr: f64,
    /// Fingerprint of (topology, traffic config, env config) this agent was
    /// trained against.
    pub env_hash: String,
    pub seed: u64,
    pub traffic_clock: u64,
    #[serde(default)]
    pub rng: RngState,
    pub actor: Mlp,
    pub critic: Mlp,
    #[serde(default)]
    pub log_std: Option<Vec<f64>>,
    #[serde(default)]
    pub target_critic: Option<Mlp>,
    pub adam_actor: Adam,
    pub adam_critic: Adam,
    #[serde(default)]
    pub adam_log_std: Option<VecAdam>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::Checkpoint(format!(
                "schema version {} unsupported (expected {})",
                ckpt.schema_version, CHECKPOINT_SCHEMA_VERSION
            )));
        }
        Ok(ckpt)
    }

    /// Validates network shapes against a topology, naming the offending
    /// layer on mismatch.
    pub fn validate_shape(&self, topo: &Topology) -> Result<()> {
        let k = topo.num_tunnels();
        let paths = topo.total_paths();
        if self.actor.input_dim() != k {
            return Err(Error::ShapeMismatch(format!(
                "actor layer 0 expects {} inputs, topology has {} tunnels",
                self.actor.input_dim(),
                k
            )));
        }
        if self.actor.output_dim() != paths {
            return Err(Error::ShapeMismatch(format!(
                "actor output layer emits {} logits, topology has {} paths",
                self.actor.output_dim(),
                paths
            )));
        }
        let critic_in = self.critic.input_dim();
        let expected = match self.algo.as_str() {
            "ddpg" => k + paths,
            _ => k,
        };
        if critic_in != expected {
            return Err(Error::ShapeMismatch(format!(
                "critic layer 0 expects {critic_in} inputs, topology needs {expected}"
            )));
        }
        Ok(())
    }
}

/// Stable fingerprint of the training environment configuration.
pub fn env_fingerprint(topo: &Topology, traffic: &TrafficConfig, env: &EnvConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(topo.to_json().expect("topology serializes").as_bytes());
    hasher.update(serde_json::to_string(traffic).expect("traffic serializes").as_bytes());
    hasher.update(serde_json::to_string(env).expect("env serializes").as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

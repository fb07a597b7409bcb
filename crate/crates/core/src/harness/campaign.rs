//! Training campaign driver: runs a configured training job, writing
//! metrics.csv, checkpoints, and a provenance manifest into the output
//! directory.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::harness::config::ExperimentConfig;
use crate::harness::metrics::MetricsWriter;
use crate::rl::checkpoint::Checkpoint;
use crate::rl::train::{train, TrainOutput};

/// Reproducibility manifest written next to the run artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    /// Hash over the serialized config (seeds included).
    pub content_hash: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub total_steps: u64,
    pub episodes: u64,
}

#[derive(Debug)]
pub struct CampaignOutput {
    pub train: TrainOutput,
    pub metrics_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub manifest_path: PathBuf,
    pub episodes_path: PathBuf,
}

/// Runs training per `cfg`, emitting `metrics.csv`, `episodes.csv`,
/// `checkpoint.json`, and `manifest.json` under `cfg.output_dir`.
pub fn run_training_campaign(
    cfg: &ExperimentConfig,
    init_from: Option<&Checkpoint>,
) -> Result<CampaignOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let topo = Arc::new(cfg.build_topology()?);
    let policy_name = cfg.policy_name();

    let metrics_path = cfg.output_dir.join("metrics.csv");
    let mut metrics = MetricsWriter::create(&metrics_path)?;
    let mut write_error = None;
    let mut on_step = |record: &crate::rl::train::StepRecord| {
        if write_error.is_none() {
            if let Err(e) = metrics.write_step(&policy_name, record) {
                write_error = Some(e);
            }
        }
    };

    let shield = cfg.cbf.enabled.then(|| cfg.cbf.config.clone());
    let output = train(
        &topo,
        &cfg.env,
        &cfg.traffic,
        &cfg.algo_config(),
        shield.as_ref(),
        &cfg.schedule,
        init_from,
        Some(&mut on_step),
    )?;
    metrics.finish()?;
    if let Some(e) = write_error {
        return Err(e);
    }

    let episodes_path = cfg.output_dir.join("episodes.csv");
    {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(&episodes_path)?);
        writeln!(f, "episode,mean_reward,min_acceptance")?;
        for (i, (r, a)) in output
            .episode_rewards
            .iter()
            .zip(&output.episode_min_acceptance)
            .enumerate()
        {
            writeln!(f, "{i},{r},{a}")?;
        }
        f.flush()?;
    }

    let checkpoint_path = cfg.output_dir.join("checkpoint.json");
    output.checkpoint.save(&checkpoint_path)?;

    let config_json = serde_json::to_string(cfg)?;
    let mut hasher = Sha256::new();
    hasher.update(config_json.as_bytes());
    let content_hash: String = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    let manifest = Manifest {
        content_hash,
        config: cfg.clone(),
        seed: cfg.schedule.seed,
        total_steps: output.total_steps,
        episodes: output.episode_rewards.len() as u64,
    };
    let manifest_path = cfg.output_dir.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;

    Ok(CampaignOutput {
        train: output,
        metrics_path,
        checkpoint_path,
        manifest_path,
        episodes_path,
    })
}

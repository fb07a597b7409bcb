//! Training driver: rollout collection (synchronous for PPO, asynchronous
//! for DDPG), optional CBF shielding of every executed action, periodic
//! updates, and checkpoint assembly.

use std::sync::mpsc;
use std::sync::{Arc, RwLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow_env::{EnvConfig, FlowEnv, SplitAction};
use crate::rl::buffer::{Experience, ReplayBuffer};
use crate::rl::checkpoint::{env_fingerprint, Checkpoint, RngState, CHECKPOINT_SCHEMA_VERSION};
use crate::rl::ddpg::{DdpgAgent, DdpgConfig};
use crate::rl::mlp::Mlp;
use crate::rl::ppo::{PpoAgent, PpoConfig, Rollout, Sequence, Transition};
use crate::rl::flat_to_action;
use crate::safety::{project, CbfConfig};
use crate::topology::Topology;
use crate::traffic::{TrafficConfig, TrafficGenerator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Ppo,
    Ddpg,
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Algo::Ppo => write!(f, "ppo"),
            Algo::Ddpg => write!(f, "ddpg"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AlgoConfig {
    Ppo(PpoConfig),
    Ddpg(DdpgConfig),
}

impl AlgoConfig {
    pub fn algo(&self) -> Algo {
        match self {
            AlgoConfig::Ppo(_) => Algo::Ppo,
            AlgoConfig::Ddpg(_) => Algo::Ddpg,
        }
    }
}

/// Run shape: episode/update cadence, parallelism, seeds, and an optional
/// learning-rate override (used when fine-tuning a checkpoint).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub episodes: u64,
    pub steps_per_episode: u64,
    /// Transitions collected (summed over workers) between model updates.
    pub update_period: u64,
    pub workers: usize,
    pub seed: u64,
    #[serde(default)]
    pub lr: Option<f64>,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            episodes: 5000,
            steps_per_episode: 64,
            update_period: 128,
            workers: 1,
            seed: 0,
            lr: None,
        }
    }
}

/// One environment step as seen by the metric log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub episode: u64,
    pub step: u64,
    pub worker: usize,
    pub mean_delay_ms: f64,
    pub mlu: f64,
    pub acceptance_rate: f64,
    pub reward: f64,
    pub tunnel_delays: Vec<f64>,
    pub shield_modified: bool,
    pub shield_feasible: bool,
}

#[derive(Debug)]
pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    /// Mean reward per episode (in completion order across workers).
    pub episode_rewards: Vec<f64>,
    /// Minimum acceptance rate seen within each episode.
    pub episode_min_acceptance: Vec<f64>,
    pub min_acceptance: f64,
    pub total_steps: u64,
}

fn mix_seed(base: u64, stream: u64, idx: u64) -> u64 {
    let mut x = base
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(stream.wrapping_mul(0xbf58476d1ce4e5b9))
        .wrapping_add(idx.wrapping_mul(0x94d049bb133111eb));
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58476d1ce4e5b9);
    x ^= x >> 27;
    x
}

fn worker_traffic(traffic: &TrafficConfig, worker: usize) -> TrafficConfig {
    TrafficConfig {
        seed: traffic.seed.wrapping_add(worker as u64),
        ..traffic.clone()
    }
}

/// Applies the shield (when configured) and returns the executed action plus
/// shield outcome flags.
fn shielded(
    topo: &Topology,
    demand: &[f64],
    proto: SplitAction,
    shield: Option<&CbfConfig>,
    step_seed: u64,
) -> (SplitAction, bool, bool) {
    match shield {
        None => (proto, false, true),
        Some(cfg) => {
            let outcome = project(
                topo,
                demand,
                &proto,
                &CbfConfig {
                    seed: step_seed,
                    ..cfg.clone()
                },
            );
            (outcome.action, outcome.was_modified, outcome.feasible_found)
        }
    }
}

struct EpisodeTracker {
    rewards: Vec<f64>,
    min_acceptance: Vec<f64>,
    current_reward: f64,
    current_min_acc: f64,
    steps_in_episode: u64,
    steps_per_episode: u64,
}

impl EpisodeTracker {
    fn new(steps_per_episode: u64) -> Self {
        Self {
            rewards: Vec::new(),
            min_acceptance: Vec::new(),
            current_reward: 0.0,
            current_min_acc: 1.0,
            steps_in_episode: 0,
            steps_per_episode,
        }
    }

    /// Returns true when this step closes an episode.
    fn record(&mut self, reward: f64, acceptance: f64) -> bool {
        self.current_reward += reward;
        self.current_min_acc = self.current_min_acc.min(acceptance);
        self.steps_in_episode += 1;
        if self.steps_in_episode == self.steps_per_episode {
            self.rewards
                .push(self.current_reward / self.steps_per_episode as f64);
            self.min_acceptance.push(self.current_min_acc);
            self.current_reward = 0.0;
            self.current_min_acc = 1.0;
            self.steps_in_episode = 0;
            true
        } else {
            false
        }
    }

    fn episodes_done(&self) -> u64 {
        self.rewards.len() as u64
    }
}

#[allow(clippy::too_many_arguments)]
pub fn train(
    topo: &Arc<Topology>,
    env_cfg: &EnvConfig,
    traffic: &TrafficConfig,
    algo_cfg: &AlgoConfig,
    shield: Option<&CbfConfig>,
    schedule: &Schedule,
    init_from: Option<&Checkpoint>,
    mut on_step: Option<&mut dyn FnMut(&StepRecord)>,
) -> Result<TrainOutput> {
    if schedule.workers == 0 {
        return Err(Error::Training("need at least one worker".into()));
    }
    if schedule.episodes % schedule.workers as u64 != 0 {
        return Err(Error::Training(format!(
            "{} episodes not divisible by {} workers",
            schedule.episodes, schedule.workers
        )));
    }
    if matches!(algo_cfg, AlgoConfig::Ppo(_)) && schedule.update_period % schedule.workers as u64 != 0
    {
        return Err(Error::Training(format!(
            "update period {} not divisible by {} workers",
            schedule.update_period, schedule.workers
        )));
    }
    match algo_cfg {
        AlgoConfig::Ppo(cfg) => {
            let mut cfg = cfg.clone();
            if let Some(lr) = schedule.lr {
                cfg.lr = lr;
            }
            train_ppo(topo, env_cfg, traffic, cfg, shield, schedule, init_from, &mut on_step)
        }
        AlgoConfig::Ddpg(cfg) => {
            let mut cfg = cfg.clone();
            if let Some(lr) = schedule.lr {
                cfg.lr = lr;
            }
            train_ddpg(topo, env_cfg, traffic, cfg, shield, schedule, init_from, &mut on_step)
        }
    }
}

type OnStep<'a> = Option<&'a mut dyn FnMut(&StepRecord)>;

fn restore_ppo(agent: &mut PpoAgent, ckpt: &Checkpoint, topo: &Topology) -> Result<()> {
    if ckpt.algo != "ppo" {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds a {} agent, expected ppo",
            ckpt.algo
        )));
    }
    ckpt.validate_shape(topo)?;
    agent.actor = ckpt.actor.clone();
    agent.critic = ckpt.critic.clone();
    agent.adam_actor = ckpt.adam_actor.clone();
    agent.adam_critic = ckpt.adam_critic.clone();
    if let Some(ls) = &ckpt.log_std {
        agent.log_std = ls.clone();
    }
    if let Some(als) = &ckpt.adam_log_std {
        agent.adam_log_std = als.clone();
    }
    Ok(())
}

fn restore_ddpg(agent: &mut DdpgAgent, ckpt: &Checkpoint, topo: &Topology) -> Result<()> {
    if ckpt.algo != "ddpg" {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds a {} agent, expected ddpg",
            ckpt.algo
        )));
    }
    ckpt.validate_shape(topo)?;
    agent.actor = ckpt.actor.clone();
    agent.critic = ckpt.critic.clone();
    agent.target_critic = ckpt
        .target_critic
        .clone()
        .unwrap_or_else(|| ckpt.critic.clone());
    agent.adam_actor = ckpt.adam_actor.clone();
    agent.adam_critic = ckpt.adam_critic.clone();
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train_ppo(
    topo: &Arc<Topology>,
    env_cfg: &EnvConfig,
    traffic: &TrafficConfig,
    cfg: PpoConfig,
    shield: Option<&CbfConfig>,
    schedule: &Schedule,
    init_from: Option<&Checkpoint>,
    on_step: &mut OnStep,
) -> Result<TrainOutput> {
    let workers = schedule.workers;
    let mut init_rng = ChaCha8Rng::seed_from_u64(mix_seed(schedule.seed, 3, 0));
    let mut agent = PpoAgent::new(topo, cfg, &mut init_rng);
    let mut start_episode = 0;
    let mut start_step = 0;
    if let Some(ckpt) = init_from {
        restore_ppo(&mut agent, ckpt, topo)?;
        start_episode = ckpt.episode;
        start_step = ckpt.global_step;
    }

    let env_hash = env_fingerprint(topo, traffic, env_cfg);
    // Exact stream continuation only makes sense against the same
    // environment; transfer runs start fresh streams.
    let resume_streams = init_from
        .filter(|c| c.env_hash == env_hash && c.rng.explore.len() == workers)
        .map(|c| c.rng.clone());
    let mut envs: Vec<FlowEnv> = (0..workers)
        .map(|w| {
            TrafficGenerator::new(worker_traffic(traffic, w), topo).map(|mut generator| {
                if let Some(ckpt) = init_from {
                    if resume_streams.is_some() {
                        generator.set_clock(ckpt.traffic_clock);
                    }
                }
                FlowEnv::new(topo.clone(), env_cfg, generator)
            })
        })
        .collect::<Result<_>>()?;
    let mut explore_rngs: Vec<ChaCha8Rng> = (0..workers)
        .map(|w| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(schedule.seed, 1, w as u64));
            if let Some(state) = &resume_streams {
                rng.set_word_pos(RngState::unpack(state.explore[w]));
            }
            rng
        })
        .collect();
    let mut update_rng = ChaCha8Rng::seed_from_u64(mix_seed(schedule.seed, 2, 0));
    if let Some(state) = &resume_streams {
        update_rng.set_word_pos(RngState::unpack(state.update));
    }

    let episodes_per_worker = schedule.episodes / workers as u64;
    let steps_per_worker = episodes_per_worker * schedule.steps_per_episode;
    let window_per_worker = schedule.update_period / workers as u64;

    let mut trackers: Vec<EpisodeTracker> = (0..workers)
        .map(|_| EpisodeTracker::new(schedule.steps_per_episode))
        .collect();
    let mut observations: Vec<Vec<f64>> = envs.iter().map(|e| e.observation()).collect();
    let mut pending: Vec<Vec<Transition>> = vec![Vec::new(); workers];
    let mut global_step = 0u64;
    let mut min_acceptance = 1.0_f64;

    for local_step in 0..steps_per_worker {
        for w in 0..workers {
            let obs = observations[w].clone();
            let (z, flat) = agent.act_explore(&obs, &mut explore_rngs[w])?;
            let proto = flat_to_action(topo, &flat);
            let demand = envs[w].current_demand().demand.clone();
            let cbf_seed = mix_seed(schedule.seed, 0xCBF, (w as u64) << 48 | local_step);
            let (executed, modified, feasible) =
                shielded(topo, &demand, proto, shield, cbf_seed);
            // The rollout keeps the sampled z: ratios stay well-defined and
            // the shield acts as part of the environment dynamics. Rewards
            // come from the executed (safe) action.
            let logp = agent.log_prob(&obs, &z)?;
            let out = envs[w].step(&executed).map_err(|e| {
                Error::Training(format!("step {global_step} worker {w}: {e}"))
            })?;
            let done =
                (local_step + 1) % schedule.steps_per_episode == 0;
            pending[w].push(Transition {
                obs,
                z,
                logp,
                reward: out.report.reward,
                done,
            });
            min_acceptance = min_acceptance.min(out.report.acceptance_rate);
            let episode = start_episode + trackers[w].episodes_done();
            let record = StepRecord {
                episode,
                step: start_step + global_step,
                worker: w,
                mean_delay_ms: out.report.mean_tunnel_delay(),
                mlu: out.report.mlu,
                acceptance_rate: out.report.acceptance_rate,
                reward: out.report.reward,
                tunnel_delays: out.report.tunnel_delays.clone(),
                shield_modified: modified,
                shield_feasible: feasible,
            };
            if let Some(cb) = on_step.as_mut() {
                cb(&record);
            }
            trackers[w].record(out.report.reward, out.report.acceptance_rate);
            observations[w] = out.next_observation;
            global_step += 1;
        }
        if (local_step + 1) % window_per_worker == 0 {
            let sequences: Vec<Sequence> = (0..workers)
                .map(|w| Sequence {
                    transitions: std::mem::take(&mut pending[w]),
                    bootstrap_obs: observations[w].clone(),
                })
                .collect();
            let rollout = Rollout {
                policy_version: agent.policy_version,
                sequences,
            };
            agent.update(&rollout, &mut update_rng).map_err(|e| {
                Error::Training(format!("update at step {global_step}: {e}"))
            })?;
        }
    }

    let mut episode_rewards = Vec::new();
    let mut episode_min_acceptance = Vec::new();
    for t in &trackers {
        episode_rewards.extend_from_slice(&t.rewards);
        episode_min_acceptance.extend_from_slice(&t.min_acceptance);
    }

    let checkpoint = Checkpoint {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        algo: "ppo".into(),
        episode: start_episode + schedule.episodes,
        global_step: start_step + global_step,
        lr: agent.cfg.lr,
        env_hash,
        seed: schedule.seed,
        traffic_clock: envs[0].current_demand().t,
        rng: RngState {
            explore: explore_rngs
                .iter()
                .map(|r| RngState::pack(r.get_word_pos()))
                .collect(),
            update: RngState::pack(update_rng.get_word_pos()),
        },
        actor: agent.actor.clone(),
        critic: agent.critic.clone(),
        log_std: Some(agent.log_std.clone()),
        target_critic: None,
        adam_actor: agent.adam_actor.clone(),
        adam_critic: agent.adam_critic.clone(),
        adam_log_std: Some(agent.adam_log_std.clone()),
    };
    Ok(TrainOutput {
        checkpoint,
        episode_rewards,
        episode_min_acceptance,
        min_acceptance,
        total_steps: global_step,
    })
}

struct WorkerMessage {
    experience: Experience,
    record: StepRecord,
}

#[allow(clippy::too_many_arguments)]
fn train_ddpg(
    topo: &Arc<Topology>,
    env_cfg: &EnvConfig,
    traffic: &TrafficConfig,
    cfg: DdpgConfig,
    shield: Option<&CbfConfig>,
    schedule: &Schedule,
    init_from: Option<&Checkpoint>,
    on_step: &mut OnStep,
) -> Result<TrainOutput> {
    let mut init_rng = ChaCha8Rng::seed_from_u64(mix_seed(schedule.seed, 3, 0));
    let mut agent = DdpgAgent::new(topo, cfg.clone(), &mut init_rng);
    let mut start_episode = 0;
    let mut start_step = 0;
    if let Some(ckpt) = init_from {
        restore_ddpg(&mut agent, ckpt, topo)?;
        start_episode = ckpt.episode;
        start_step = ckpt.global_step;
    }

    let env_hash = env_fingerprint(topo, traffic, env_cfg);
    let resume_streams = init_from
        .filter(|c| c.env_hash == env_hash && c.rng.explore.len() == 1 && schedule.workers == 1)
        .map(|c| c.rng.clone());
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut sample_rng = ChaCha8Rng::seed_from_u64(mix_seed(schedule.seed, 4, 0));
    if let Some(state) = &resume_streams {
        sample_rng.set_word_pos(RngState::unpack(state.update));
    }
    let mut episode_rewards = Vec::new();
    let mut episode_min_acceptance = Vec::new();
    let mut min_acceptance = 1.0_f64;
    let mut global_step = 0u64;
    let mut traffic_clock = 0u64;
    let mut final_rng = RngState::default();

    if schedule.workers == 1 {
        // Deterministic single-owner path.
        let mut generator = TrafficGenerator::new(worker_traffic(traffic, 0), topo)?;
        if let Some(ckpt) = init_from {
            if resume_streams.is_some() {
                generator.set_clock(ckpt.traffic_clock);
            }
        }
        let mut env = FlowEnv::new(topo.clone(), env_cfg, generator);
        let mut explore_rng = ChaCha8Rng::seed_from_u64(mix_seed(schedule.seed, 1, 0));
        if let Some(state) = &resume_streams {
            explore_rng.set_word_pos(RngState::unpack(state.explore[0]));
        }
        let total_steps = schedule.episodes * schedule.steps_per_episode;
        let mut tracker = EpisodeTracker::new(schedule.steps_per_episode);
        let mut obs = env.observation();
        for step in 0..total_steps {
            let progress = if total_steps > 1 {
                step as f64 / (total_steps - 1) as f64
            } else {
                0.0
            };
            let noise = cfg.noise_start + (cfg.noise_end - cfg.noise_start) * progress;
            let flat = agent.act(&obs, noise, &mut explore_rng)?;
            let proto = flat_to_action(topo, &flat);
            let demand = env.current_demand().demand.clone();
            let cbf_seed = mix_seed(schedule.seed, 0xCBF, step);
            let (executed, modified, feasible) = shielded(topo, &demand, proto, shield, cbf_seed);
            let out = env.step(&executed)?;
            let done = (step + 1) % schedule.steps_per_episode == 0;
            buffer.push(Experience {
                state: obs.clone(),
                action: executed.to_flat(),
                reward: out.report.reward,
                next_state: out.next_observation.clone(),
                done,
            });
            min_acceptance = min_acceptance.min(out.report.acceptance_rate);
            let record = StepRecord {
                episode: start_episode + tracker.episodes_done(),
                step: start_step + step,
                worker: 0,
                mean_delay_ms: out.report.mean_tunnel_delay(),
                mlu: out.report.mlu,
                acceptance_rate: out.report.acceptance_rate,
                reward: out.report.reward,
                tunnel_delays: out.report.tunnel_delays.clone(),
                shield_modified: modified,
                shield_feasible: feasible,
            };
            if let Some(cb) = on_step.as_mut() {
                cb(&record);
            }
            tracker.record(out.report.reward, out.report.acceptance_rate);
            obs = out.next_observation;
            global_step += 1;
            if (step + 1) % schedule.update_period == 0 && buffer.len() >= cfg.warmup {
                for _ in 0..cfg.grad_steps {
                    let idx = buffer.sample_indices(cfg.batch, &mut sample_rng);
                    let batch: Vec<&Experience> = idx.iter().map(|&i| buffer.get(i)).collect();
                    agent.update_batch(&batch).map_err(|e| {
                        Error::Training(format!("update at step {step}: {e}"))
                    })?;
                }
            }
        }
        episode_rewards = tracker.rewards;
        episode_min_acceptance = tracker.min_acceptance;
        traffic_clock = env.current_demand().t;
        final_rng = RngState {
            explore: vec![RngState::pack(explore_rng.get_word_pos())],
            update: RngState::pack(sample_rng.get_word_pos()),
        };
    } else {
        // Async collection: workers step their own environments against a
        // shared actor snapshot and push experience through a channel; the
        // trainer owns the buffer and the networks.
        let episodes_per_worker = schedule.episodes / schedule.workers as u64;
        let steps_per_worker = episodes_per_worker * schedule.steps_per_episode;
        let snapshot = Arc::new(RwLock::new(agent.actor.clone()));
        let (tx, rx) = mpsc::channel::<WorkerMessage>();

        std::thread::scope(|scope| -> Result<()> {
            for w in 0..schedule.workers {
                let tx = tx.clone();
                let snapshot = Arc::clone(&snapshot);
                let topo = Arc::clone(topo);
                let traffic = worker_traffic(traffic, w);
                let shield = shield.cloned();
                let cfg = cfg.clone();
                let spans = agent.spans().to_vec();
                let schedule = schedule.clone();
                scope.spawn(move || {
                    let run = || -> Result<()> {
                        let generator = TrafficGenerator::new(traffic, &topo)?;
                        let mut env = FlowEnv::new(topo.clone(), env_cfg, generator);
                        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(
                            schedule.seed,
                            1,
                            w as u64,
                        ));
                        let mut tracker = EpisodeTracker::new(schedule.steps_per_episode);
                        let mut obs = env.observation();
                        for step in 0..steps_per_worker {
                            let progress = if steps_per_worker > 1 {
                                step as f64 / (steps_per_worker - 1) as f64
                            } else {
                                0.0
                            };
                            let noise =
                                cfg.noise_start + (cfg.noise_end - cfg.noise_start) * progress;
                            let flat = {
                                let actor = snapshot.read().expect("snapshot lock");
                                let mut logits = actor.forward(&obs)?;
                                drop(actor);
                                use rand_distr::StandardNormal;
                                use rand::Rng as _;
                                for z in &mut logits {
                                    *z += noise * rng.sample::<f64, _>(StandardNormal);
                                }
                                crate::rl::softmax_per_tunnel(&spans, &logits)
                            };
                            let proto = flat_to_action(&topo, &flat);
                            let demand = env.current_demand().demand.clone();
                            let cbf_seed = mix_seed(
                                schedule.seed,
                                0xCBF,
                                (w as u64) << 48 | step,
                            );
                            let (executed, modified, feasible) =
                                shielded(&topo, &demand, proto, shield.as_ref(), cbf_seed);
                            let out = env.step(&executed)?;
                            let done = (step + 1) % schedule.steps_per_episode == 0;
                            let record = StepRecord {
                                episode: tracker.episodes_done(),
                                step,
                                worker: w,
                                mean_delay_ms: out.report.mean_tunnel_delay(),
                                mlu: out.report.mlu,
                                acceptance_rate: out.report.acceptance_rate,
                                reward: out.report.reward,
                                tunnel_delays: out.report.tunnel_delays.clone(),
                                shield_modified: modified,
                                shield_feasible: feasible,
                            };
                            tracker.record(out.report.reward, out.report.acceptance_rate);
                            let msg = WorkerMessage {
                                experience: Experience {
                                    state: obs.clone(),
                                    action: executed.to_flat(),
                                    reward: out.report.reward,
                                    next_state: out.next_observation.clone(),
                                    done,
                                },
                                record,
                            };
                            obs = out.next_observation;
                            if tx.send(msg).is_err() {
                                break;
                            }
                        }
                        Ok(())
                    };
                    // Worker errors surface as a closed channel; the trainer
                    // notices the missing samples.
                    let _ = run();
                });
            }
            drop(tx);

            let expected = steps_per_worker * schedule.workers as u64;
            let mut ingested = 0u64;
            let mut per_worker_tracker: Vec<EpisodeTracker> = (0..schedule.workers)
                .map(|_| EpisodeTracker::new(schedule.steps_per_episode))
                .collect();
            while let Ok(msg) = rx.recv() {
                min_acceptance = min_acceptance.min(msg.record.acceptance_rate);
                per_worker_tracker[msg.record.worker]
                    .record(msg.record.reward, msg.record.acceptance_rate);
                if let Some(cb) = on_step.as_mut() {
                    cb(&msg.record);
                }
                buffer.push(msg.experience);
                ingested += 1;
                if ingested % schedule.update_period == 0 && buffer.len() >= cfg.warmup {
                    for _ in 0..cfg.grad_steps {
                        let idx = buffer.sample_indices(cfg.batch, &mut sample_rng);
                        let batch: Vec<&Experience> =
                            idx.iter().map(|&i| buffer.get(i)).collect();
                        agent.update_batch(&batch).map_err(|e| {
                            Error::Training(format!("update at sample {ingested}: {e}"))
                        })?;
                    }
                    let mut snap = snapshot.write().expect("snapshot lock");
                    *snap = agent.actor.clone();
                }
            }
            if ingested != expected {
                return Err(Error::Training(format!(
                    "workers produced {ingested} of {expected} samples"
                )));
            }
            global_step = ingested;
            for t in per_worker_tracker {
                episode_rewards.extend_from_slice(&t.rewards);
                episode_min_acceptance.extend_from_slice(&t.min_acceptance);
            }
            Ok(())
        })?;
    }

    let checkpoint = Checkpoint {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        algo: "ddpg".into(),
        episode: start_episode + schedule.episodes,
        global_step: start_step + global_step,
        lr: agent.cfg.lr,
        env_hash,
        seed: schedule.seed,
        traffic_clock,
        rng: final_rng,
        actor: agent.actor.clone(),
        critic: agent.critic.clone(),
        log_std: None,
        target_critic: Some(agent.target_critic.clone()),
        adam_actor: agent.adam_actor.clone(),
        adam_critic: agent.adam_critic.clone(),
        adam_log_std: None,
    };
    Ok(TrainOutput {
        checkpoint,
        episode_rewards,
        episode_min_acceptance,
        min_acceptance,
        total_steps: global_step,
    })
}

/// Rebuilds an exploit-mode action function from a checkpoint.
pub struct LoadedPolicy {
    actor: Mlp,
    spans: Vec<(usize, usize)>,
    pub algo: Algo,
}

impl LoadedPolicy {
    pub fn from_checkpoint(ckpt: &Checkpoint, topo: &Topology) -> Result<Self> {
        ckpt.validate_shape(topo)?;
        let algo = match ckpt.algo.as_str() {
            "ppo" => Algo::Ppo,
            "ddpg" => Algo::Ddpg,
            other => {
                return Err(Error::Checkpoint(format!("unknown algo tag `{other}`")));
            }
        };
        Ok(Self {
            actor: ckpt.actor.clone(),
            spans: crate::rl::tunnel_spans(topo),
            algo,
        })
    }

    /// Deterministic (exploit-mode) action for a normalized observation.
    pub fn act(&self, topo: &Topology, obs: &[f64]) -> Result<SplitAction> {
        let logits = self.actor.forward(obs)?;
        let flat = crate::rl::softmax_per_tunnel(&self.spans, &logits);
        Ok(flat_to_action(topo, &flat))
    }
}

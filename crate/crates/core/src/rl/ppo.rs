//! Clipped-surrogate PPO over the squashed-Gaussian split policy.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rl::mlp::{clip_global_norm, Adam, ForwardCache, Mlp, MlpGrads, VecAdam};
use crate::rl::{gaussian_log_prob, softmax_per_tunnel, tunnel_spans};
use crate::topology::Topology;

/// Which target the value network regresses toward: the discounted
/// return-to-go, or literally the immediate reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticTarget {
    Return,
    Immediate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub clip_eps: f64,
    /// Epoch loop aborts once the estimated KL(new || old) crosses this.
    pub target_kl: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub grad_clip: f64,
    pub critic_target: CriticTarget,
    pub init_std: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            hidden: vec![1024, 1024, 1024],
            lr: 1e-5,
            gamma: 0.7,
            clip_eps: 0.2,
            target_kl: 0.05,
            epochs: 10,
            minibatch: 64,
            grad_clip: 0.5,
            critic_target: CriticTarget::Return,
            init_std: 0.5,
        }
    }
}

/// Exploration std never collapses below this.
const MIN_LOG_STD: f64 = -3.0;
const MAX_LOG_STD: f64 = 1.0;

/// One on-policy transition. `z` is the logit-space action actually
/// executed (after any shield correction, pulled back through the softmax),
/// `logp` its density under the collecting policy.
#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub z: Vec<f64>,
    pub logp: f64,
    pub reward: f64,
    pub done: bool,
}

/// A contiguous chunk of one environment's trajectory plus the observation
/// that follows it (for bootstrapping the tail return).
#[derive(Debug, Clone)]
pub struct Sequence {
    pub transitions: Vec<Transition>,
    pub bootstrap_obs: Vec<f64>,
}

/// Everything one update consumes. `policy_version` enforces the on-policy
/// contract: updates reject data from any other policy version.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub policy_version: u64,
    pub sequences: Vec<Sequence>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PpoMetrics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub epochs_run: usize,
}

#[derive(Debug, Clone)]
pub struct PpoAgent {
    pub actor: Mlp,
    pub log_std: Vec<f64>,
    pub critic: Mlp,
    pub adam_actor: Adam,
    pub adam_critic: Adam,
    pub adam_log_std: VecAdam,
    pub policy_version: u64,
    pub cfg: PpoConfig,
    spans: Vec<(usize, usize)>,
}

impl PpoAgent {
    pub fn new<R: Rng>(topo: &Topology, cfg: PpoConfig, rng: &mut R) -> Self {
        let input = topo.num_tunnels();
        let output = topo.total_paths();
        let mut actor_dims = vec![input];
        actor_dims.extend(&cfg.hidden);
        actor_dims.push(output);
        let mut critic_dims = vec![input];
        critic_dims.extend(&cfg.hidden);
        critic_dims.push(1);
        let actor = Mlp::new(&actor_dims, 2.0_f64.sqrt(), 0.01, rng);
        let critic = Mlp::new(&critic_dims, 2.0_f64.sqrt(), 1.0, rng);
        let log_std = vec![cfg.init_std.ln(); output];
        Self {
            adam_actor: Adam::new(&actor),
            adam_critic: Adam::new(&critic),
            adam_log_std: VecAdam::new(output),
            actor,
            critic,
            log_std,
            policy_version: 0,
            cfg,
            spans: tunnel_spans(topo),
        }
    }

    pub fn spans(&self) -> &[(usize, usize)] {
        &self.spans
    }

    /// Samples a logit-space action and its squashed split vector.
    pub fn act_explore<R: Rng>(&self, obs: &[f64], rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
        let mean = self.actor.forward(obs)?;
        let z: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let action = softmax_per_tunnel(&self.spans, &z);
        Ok((z, action))
    }

    /// Deterministic action: softmax of the mean logits.
    pub fn act_exploit(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let mean = self.actor.forward(obs)?;
        Ok(softmax_per_tunnel(&self.spans, &mean))
    }

    pub fn log_prob(&self, obs: &[f64], z: &[f64]) -> Result<f64> {
        let mean = self.actor.forward(obs)?;
        Ok(gaussian_log_prob(z, &mean, &self.log_std))
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.critic.forward(obs)?[0])
    }

    /// Multi-epoch clipped-surrogate update. Returns an error on off-policy
    /// data or non-finite losses.
    pub fn update<R: Rng>(&mut self, rollout: &Rollout, rng: &mut R) -> Result<PpoMetrics> {
        if rollout.policy_version != self.policy_version {
            return Err(Error::Training(format!(
                "on-policy contract violated: rollout from policy v{}, agent at v{}",
                rollout.policy_version, self.policy_version
            )));
        }
        let n: usize = rollout.sequences.iter().map(|s| s.transitions.len()).sum();
        if n == 0 {
            return Err(Error::Training("empty rollout".into()));
        }

        // Discounted return-to-go per sequence, bootstrapped with the current
        // value of the observation after the last transition. Episode
        // boundaries inside a sequence are time-limit truncations of a
        // continuing process, so returns flow through them.
        let mut obs: Vec<&[f64]> = Vec::with_capacity(n);
        let mut zs: Vec<&[f64]> = Vec::with_capacity(n);
        let mut logp_old: Vec<f64> = Vec::with_capacity(n);
        let mut returns: Vec<f64> = Vec::with_capacity(n);
        for seq in &rollout.sequences {
            let mut g = self.value(&seq.bootstrap_obs)?;
            let mut seq_returns = vec![0.0; seq.transitions.len()];
            for (i, tr) in seq.transitions.iter().enumerate().rev() {
                g = tr.reward + self.cfg.gamma * g;
                seq_returns[i] = g;
            }
            for (tr, ret) in seq.transitions.iter().zip(seq_returns) {
                obs.push(&tr.obs);
                zs.push(&tr.z);
                logp_old.push(tr.logp);
                returns.push(ret);
            }
        }

        // Advantages against the pre-update critic, normalized per update.
        let mut advantages = Vec::with_capacity(n);
        for (o, ret) in obs.iter().zip(&returns) {
            advantages.push(ret - self.value(o)?);
        }
        let mean_adv = advantages.iter().sum::<f64>() / n as f64;
        let var = advantages.iter().map(|a| (a - mean_adv).powi(2)).sum::<f64>() / n as f64;
        let std_adv = var.sqrt().max(1e-8);
        for a in &mut advantages {
            *a = (*a - mean_adv) / std_adv;
        }

        let value_targets: Vec<f64> = match self.cfg.critic_target {
            CriticTarget::Return => returns.clone(),
            CriticTarget::Immediate => {
                let mut t = Vec::with_capacity(n);
                for seq in &rollout.sequences {
                    t.extend(seq.transitions.iter().map(|tr| tr.reward));
                }
                t
            }
        };

        let mut metrics = PpoMetrics::default();
        let mut indices: Vec<usize> = (0..n).collect();
        let mut actor_grads = MlpGrads::zeros_like(&self.actor);
        let mut critic_grads = MlpGrads::zeros_like(&self.critic);
        let mut log_std_grads = vec![0.0; self.log_std.len()];
        let mut cache = ForwardCache::default();

        'epochs: for epoch in 0..self.cfg.epochs {
            // Fisher-Yates driven by the caller's rng for reproducibility
            for i in (1..indices.len()).rev() {
                let j = rng.random_range(0..=i);
                indices.swap(i, j);
            }
            for batch in indices.chunks(self.cfg.minibatch) {
                let scale = 1.0 / batch.len() as f64;
                actor_grads.zero();
                log_std_grads.iter_mut().for_each(|g| *g = 0.0);
                let mut batch_policy_loss = 0.0;
                let mut clipped_count = 0usize;
                for &i in batch {
                    self.actor.forward_cached(obs[i], &mut cache)?;
                    let mean = cache.activations.last().unwrap().clone();
                    let logp_new = gaussian_log_prob(zs[i], &mean, &self.log_std);
                    let ratio = (logp_new - logp_old[i]).clamp(-30.0, 30.0).exp();
                    let adv = advantages[i];
                    let unclipped = ratio * adv;
                    let clipped_ratio = ratio.clamp(1.0 - self.cfg.clip_eps, 1.0 + self.cfg.clip_eps);
                    let clipped = clipped_ratio * adv;
                    batch_policy_loss -= unclipped.min(clipped) * scale;
                    if (ratio - 1.0).abs() > self.cfg.clip_eps {
                        clipped_count += 1;
                    }
                    // gradient flows only where the unclipped branch is active
                    let d_obj_d_logp = if unclipped <= clipped { ratio * adv } else { 0.0 };
                    if d_obj_d_logp != 0.0 {
                        let coeff = -d_obj_d_logp * scale; // descent on -objective
                        let d_mean: Vec<f64> = zs[i]
                            .iter()
                            .zip(&mean)
                            .zip(&self.log_std)
                            .map(|((z, m), ls)| {
                                let inv_var = (-2.0 * ls).exp();
                                coeff * (z - m) * inv_var
                            })
                            .collect();
                        self.actor.backward(obs[i], &cache, &d_mean, &mut actor_grads);
                        for (g, ((z, m), ls)) in log_std_grads
                            .iter_mut()
                            .zip(zs[i].iter().zip(&mean).zip(&self.log_std))
                        {
                            let inv_var = (-2.0 * ls).exp();
                            *g += coeff * ((z - m) * (z - m) * inv_var - 1.0);
                        }
                    }
                }
                if !batch_policy_loss.is_finite() || !actor_grads.is_finite() {
                    return Err(Error::Training(format!(
                        "non-finite policy loss {batch_policy_loss} at epoch {epoch}"
                    )));
                }
                clip_global_norm(
                    &mut [&mut actor_grads],
                    Some(&mut log_std_grads),
                    self.cfg.grad_clip,
                );
                self.adam_actor.step(&mut self.actor, &actor_grads, self.cfg.lr);
                self.adam_log_std
                    .step(&mut self.log_std, &log_std_grads, self.cfg.lr);
                for ls in &mut self.log_std {
                    *ls = ls.clamp(MIN_LOG_STD, MAX_LOG_STD);
                }
                metrics.policy_loss = batch_policy_loss;
                metrics.clip_fraction = clipped_count as f64 / batch.len() as f64;

                // value step
                critic_grads.zero();
                let mut batch_value_loss = 0.0;
                for &i in batch {
                    self.critic.forward_cached(obs[i], &mut cache)?;
                    let v = cache.activations.last().unwrap()[0];
                    let err = v - value_targets[i];
                    batch_value_loss += err * err * scale;
                    self.critic
                        .backward(obs[i], &cache, &[2.0 * err * scale], &mut critic_grads);
                }
                if !batch_value_loss.is_finite() {
                    return Err(Error::Training(format!(
                        "non-finite value loss at epoch {epoch}"
                    )));
                }
                clip_global_norm(&mut [&mut critic_grads], None, self.cfg.grad_clip);
                self.adam_critic.step(&mut self.critic, &critic_grads, self.cfg.lr);
                metrics.value_loss = batch_value_loss;
            }
            metrics.epochs_run = epoch + 1;

            // KL(new || old) estimate over the whole rollout
            let mut kl = 0.0;
            for i in 0..n {
                let logp_new = self.log_prob(obs[i], zs[i])?;
                let delta = (logp_new - logp_old[i]).clamp(-30.0, 30.0);
                kl += delta.exp() - 1.0 - delta;
            }
            kl /= n as f64;
            metrics.approx_kl = kl;
            if kl > self.cfg.target_kl {
                break 'epochs;
            }
        }

        self.policy_version += 1;
        Ok(metrics)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::flat_to_action;
    use crate::topology::{build_abilene, AbileneProfile};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> PpoConfig {
        PpoConfig {
            hidden: vec![16, 16],
            lr: 3e-4,
            ..PpoConfig::default()
        }
    }

    #[test]
    fn clip_arithmetic() {
        // ratio 2.0, A=+1, eps 0.2 -> clipped contribution 1.2
        let (ratio, adv, eps) = (2.0_f64, 1.0, 0.2);
        let obj = (ratio * adv).min(ratio.clamp(1.0 - eps, 1.0 + eps) * adv);
        assert!((obj - 1.2).abs() < 1e-15);
        // ratio 0.5, A=-1 -> clip binds below at -0.8
        let (ratio, adv) = (0.5_f64, -1.0);
        let obj = (ratio * adv).min(ratio.clamp(1.0 - eps, 1.0 + eps) * adv);
        assert!((obj - (-0.8)).abs() < 1e-15);
    }

    #[test]
    fn exploit_deterministic_and_on_simplex() {
        let topo = build_abilene(AbileneProfile::default());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let agent = PpoAgent::new(&topo, small_cfg(), &mut rng);
        let obs = vec![0.2; 6];
        let a = agent.act_exploit(&obs).unwrap();
        let b = agent.act_exploit(&obs).unwrap();
        assert_eq!(a, b);
        flat_to_action(&topo, &a).validate(&topo).unwrap();
    }

    #[test]
    fn explore_mean_close_to_exploit() {
        let topo = build_abilene(AbileneProfile::default());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut agent = PpoAgent::new(&topo, small_cfg(), &mut rng);
        // small noise
        agent.log_std.iter_mut().for_each(|ls| *ls = (0.1_f64).ln());
        let obs = vec![0.3; 6];
        let exploit = agent.act_exploit(&obs).unwrap();
        let mut mean = vec![0.0; exploit.len()];
        let draws = 10_000;
        for _ in 0..draws {
            let (_, a) = agent.act_explore(&obs, &mut rng).unwrap();
            for (m, v) in mean.iter_mut().zip(&a) {
                *m += v;
            }
        }
        for (m, e) in mean.iter().zip(&exploit) {
            assert!((m / draws as f64 - e).abs() < 0.05);
        }
    }

    #[test]
    fn identical_policies_give_unit_ratio_zero_kl() {
        let topo = build_abilene(AbileneProfile::default());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let agent = PpoAgent::new(&topo, small_cfg(), &mut rng);
        let obs = vec![0.1; 6];
        let (z, _) = agent.act_explore(&obs, &mut rng).unwrap();
        let lp1 = agent.log_prob(&obs, &z).unwrap();
        let lp2 = agent.log_prob(&obs, &z).unwrap();
        let ratio = (lp2 - lp1).exp();
        assert_eq!(ratio, 1.0);
    }

    #[test]
    fn update_rejects_stale_rollout() {
        let topo = build_abilene(AbileneProfile::default());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut agent = PpoAgent::new(&topo, small_cfg(), &mut rng);
        let rollout = Rollout {
            policy_version: 5,
            sequences: vec![],
        };
        assert!(agent.update(&rollout, &mut rng).is_err());
    }

    #[test]
    fn update_improves_preferred_action_probability() {
        // reward pushing all mass toward path 1 of every tunnel
        let topo = build_abilene(AbileneProfile::default());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut agent = PpoAgent::new(
            &topo,
            PpoConfig {
                hidden: vec![16, 16],
                lr: 1e-2,
                epochs: 4,
                ..PpoConfig::default()
            },
            &mut rng,
        );
        let obs = vec![0.2; 6];
        let spans = agent.spans().to_vec();
        let before = agent.act_exploit(&obs).unwrap();
        for _ in 0..10 {
            let version = agent.policy_version;
            let mut transitions = Vec::new();
            for _ in 0..64 {
                let (z, a) = agent.act_explore(&obs, &mut rng).unwrap();
                // reward: mass on odd (red) paths
                let reward: f64 = spans.iter().map(|&(s, _)| a[s + 1]).sum::<f64>();
                let logp = agent.log_prob(&obs, &z).unwrap();
                transitions.push(Transition {
                    obs: obs.clone(),
                    z,
                    logp,
                    reward,
                    done: false,
                });
            }
            let rollout = Rollout {
                policy_version: version,
                sequences: vec![Sequence {
                    transitions,
                    bootstrap_obs: obs.clone(),
                }],
            };
            agent.update(&rollout, &mut rng).unwrap();
        }
        let after = agent.act_exploit(&obs).unwrap();
        let mass = |a: &[f64]| -> f64 { spans.iter().map(|&(s, _)| a[s + 1]).sum() };
        assert!(
            mass(&after) > mass(&before) + 0.3,
            "policy mass before {} after {}",
            mass(&before),
            mass(&after)
        );
    }
}

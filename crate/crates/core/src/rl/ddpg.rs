//! DDPG: deterministic split policy with a replay buffer and a Polyak-averaged
//! target critic. The critic bootstraps with the main actor's action at the
//! next state, evaluated by the target critic.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rl::buffer::Experience;
use crate::rl::mlp::{Adam, ForwardCache, Mlp, MlpGrads};
use crate::rl::{softmax_backward, softmax_per_tunnel, tunnel_spans};
use crate::topology::Topology;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdpgConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    /// Polyak factor tau: target <- tau * main + (1 - tau) * target.
    pub polyak: f64,
    pub batch: usize,
    pub buffer_capacity: usize,
    /// Transitions collected before updates start.
    pub warmup: usize,
    /// Gradient steps per update event.
    pub grad_steps: usize,
    /// Gaussian logit-noise std, linearly decayed over training.
    pub noise_start: f64,
    pub noise_end: f64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            hidden: vec![1024, 1024, 1024],
            lr: 1e-5,
            gamma: 0.7,
            polyak: 0.05,
            batch: 64,
            buffer_capacity: 100_000,
            warmup: 1000,
            grad_steps: 32,
            noise_start: 0.2,
            noise_end: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DdpgMetrics {
    pub critic_loss: f64,
    pub mean_q: f64,
}

#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_critic: Mlp,
    pub adam_actor: Adam,
    pub adam_critic: Adam,
    pub cfg: DdpgConfig,
    spans: Vec<(usize, usize)>,
    state_dim: usize,
}

impl DdpgAgent {
    pub fn new<R: Rng>(topo: &Topology, cfg: DdpgConfig, rng: &mut R) -> Self {
        let state_dim = topo.num_tunnels();
        let action_dim = topo.total_paths();
        let mut actor_dims = vec![state_dim];
        actor_dims.extend(&cfg.hidden);
        actor_dims.push(action_dim);
        let mut critic_dims = vec![state_dim + action_dim];
        critic_dims.extend(&cfg.hidden);
        critic_dims.push(1);
        let actor = Mlp::new(&actor_dims, 2.0_f64.sqrt(), 0.01, rng);
        let critic = Mlp::new(&critic_dims, 2.0_f64.sqrt(), 1.0, rng);
        Self {
            adam_actor: Adam::new(&actor),
            adam_critic: Adam::new(&critic),
            target_critic: critic.clone(),
            actor,
            critic,
            cfg,
            spans: tunnel_spans(topo),
            state_dim,
        }
    }

    pub fn spans(&self) -> &[(usize, usize)] {
        &self.spans
    }

    /// Deterministic policy with optional Gaussian logit noise.
    pub fn act<R: Rng>(&self, obs: &[f64], noise_std: f64, rng: &mut R) -> Result<Vec<f64>> {
        let mut logits = self.actor.forward(obs)?;
        if noise_std > 0.0 {
            for z in &mut logits {
                *z += noise_std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Ok(softmax_per_tunnel(&self.spans, &logits))
    }

    pub fn q_value(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        let mut input = Vec::with_capacity(obs.len() + action.len());
        input.extend_from_slice(obs);
        input.extend_from_slice(action);
        Ok(self.critic.forward(&input)?[0])
    }

    /// One gradient step on a batch: critic descends the squared TD error,
    /// actor ascends the mean Q of its own action, target critic moves by
    /// the Polyak factor.
    pub fn update_batch(&mut self, batch: &[&Experience]) -> Result<DdpgMetrics> {
        if batch.is_empty() {
            return Err(Error::Training("empty DDPG batch".into()));
        }
        let scale = 1.0 / batch.len() as f64;
        let mut cache = ForwardCache::default();

        // Critic targets: r + gamma * Q_target(s', pi(s')). The environment
        // is a continuing process; episode boundaries do not stop the
        // bootstrap.
        let mut targets = Vec::with_capacity(batch.len());
        for exp in batch {
            let next_logits = self.actor.forward(&exp.next_state)?;
            let next_action = softmax_per_tunnel(&self.spans, &next_logits);
            let mut input = exp.next_state.clone();
            input.extend_from_slice(&next_action);
            let q_next = self.target_critic.forward(&input)?[0];
            targets.push(exp.reward + self.cfg.gamma * q_next);
        }

        let mut critic_grads = MlpGrads::zeros_like(&self.critic);
        let mut critic_loss = 0.0;
        for (exp, &y) in batch.iter().zip(&targets) {
            let mut input = exp.state.clone();
            input.extend_from_slice(&exp.action);
            self.critic.forward_cached(&input, &mut cache)?;
            let q = cache.activations.last().unwrap()[0];
            let err = q - y;
            critic_loss += err * err * scale;
            self.critic
                .backward(&input, &cache, &[2.0 * err * scale], &mut critic_grads);
        }
        if !critic_loss.is_finite() || !critic_grads.is_finite() {
            return Err(Error::Training(format!(
                "non-finite critic loss {critic_loss}"
            )));
        }
        self.adam_critic
            .step(&mut self.critic, &critic_grads, self.cfg.lr);

        // Actor: ascend mean_b Q(s_b, pi(s_b)).
        let mut actor_grads = MlpGrads::zeros_like(&self.actor);
        let mut actor_cache = ForwardCache::default();
        let mut mean_q = 0.0;
        let mut critic_scratch = MlpGrads::zeros_like(&self.critic);
        for exp in batch {
            self.actor.forward_cached(&exp.state, &mut actor_cache)?;
            let logits = actor_cache.activations.last().unwrap().clone();
            let action = softmax_per_tunnel(&self.spans, &logits);
            let mut input = exp.state.clone();
            input.extend_from_slice(&action);
            self.critic.forward_cached(&input, &mut cache)?;
            mean_q += cache.activations.last().unwrap()[0] * scale;
            // dQ/d(input), sliced to the action part
            critic_scratch.zero();
            let d_input = self.critic.backward(&input, &cache, &[1.0], &mut critic_scratch);
            let d_action = &d_input[self.state_dim..];
            let d_logits = softmax_backward(&self.spans, &action, d_action);
            // ascent: accumulate the negated gradient of mean Q
            let d_out: Vec<f64> = d_logits.iter().map(|g| -g * scale).collect();
            self.actor
                .backward(&exp.state, &actor_cache, &d_out, &mut actor_grads);
        }
        if !actor_grads.is_finite() {
            return Err(Error::Training("non-finite actor gradient".into()));
        }
        self.adam_actor
            .step(&mut self.actor, &actor_grads, self.cfg.lr);

        self.polyak_update();
        Ok(DdpgMetrics {
            critic_loss,
            mean_q,
        })
    }

    /// target <- tau * main + (1 - tau) * target
    pub fn polyak_update(&mut self) {
        let tau = self.cfg.polyak;
        for (t, m) in self.target_critic.layers.iter_mut().zip(&self.critic.layers) {
            for (tw, mw) in t.weights.iter_mut().zip(&m.weights) {
                *tw = tau * mw + (1.0 - tau) * *tw;
            }
            for (tb, mb) in t.biases.iter_mut().zip(&m.biases) {
                *tb = tau * mb + (1.0 - tau) * *tb;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_abilene, AbileneProfile};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn agent(cfg: DdpgConfig) -> DdpgAgent {
        let topo = build_abilene(AbileneProfile::default());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        DdpgAgent::new(&topo, cfg, &mut rng)
    }

    fn small_cfg() -> DdpgConfig {
        DdpgConfig {
            hidden: vec![16, 16],
            lr: 1e-3,
            ..DdpgConfig::default()
        }
    }

    fn fake_batch(agent: &DdpgAgent, rng: &mut ChaCha8Rng) -> Vec<Experience> {
        (0..16)
            .map(|_| {
                let state: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
                let action = agent.act(&state, 0.3, rng).unwrap();
                Experience {
                    next_state: state.iter().map(|s| s * 0.9).collect(),
                    reward: -state.iter().sum::<f64>(),
                    state,
                    action,
                    done: false,
                }
            })
            .collect()
    }

    #[test]
    fn polyak_limit_tau_one_copies_main() {
        let mut a = agent(DdpgConfig {
            polyak: 1.0,
            ..small_cfg()
        });
        // perturb target away from main
        for layer in &mut a.target_critic.layers {
            layer.weights.iter_mut().for_each(|w| *w += 1.0);
        }
        a.polyak_update();
        assert_eq!(a.target_critic, a.critic);
    }

    #[test]
    fn polyak_distance_nonincreasing_with_frozen_main() {
        let mut a = agent(small_cfg());
        for layer in &mut a.target_critic.layers {
            layer.weights.iter_mut().for_each(|w| *w += 0.5);
        }
        let dist = |a: &DdpgAgent| -> f64 {
            a.target_critic
                .layers
                .iter()
                .zip(&a.critic.layers)
                .map(|(t, m)| {
                    t.weights
                        .iter()
                        .zip(&m.weights)
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                })
                .sum::<f64>()
                .sqrt()
        };
        let initial = dist(&a);
        let mut prev = initial;
        for _ in 0..20 {
            a.polyak_update();
            let d = dist(&a);
            assert!(d <= prev + 1e-15);
            prev = d;
        }
        // contraction by (1 - tau)^20
        assert!(prev < 0.36 * initial, "distance {prev} from {initial}");
    }

    #[test]
    fn gamma_zero_target_is_reward() {
        let mut a = agent(DdpgConfig {
            gamma: 0.0,
            lr: 1e-1,
            ..small_cfg()
        });
        // single transition, repeated updates drive Q(s,a) toward r
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = fake_batch(&a, &mut rng);
        let one = vec![&batch[0]];
        for _ in 0..300 {
            a.update_batch(&one).unwrap();
        }
        let q = a.q_value(&batch[0].state, &batch[0].action).unwrap();
        assert!(
            (q - batch[0].reward).abs() < 0.05,
            "q {q} vs reward {}",
            batch[0].reward
        );
    }

    #[test]
    fn td_error_decreases_on_single_transition() {
        let mut a = agent(small_cfg());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = fake_batch(&a, &mut rng);
        let one = vec![&batch[0]];
        let first = a.update_batch(&one).unwrap().critic_loss;
        let mut last = first;
        for _ in 0..50 {
            last = a.update_batch(&one).unwrap().critic_loss;
        }
        assert!(last < first, "critic loss {first} -> {last}");
    }

    #[test]
    fn act_outputs_valid_simplex() {
        let topo = build_abilene(AbileneProfile::default());
        let a = agent(small_cfg());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let obs: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
            let flat = a.act(&obs, 0.2, &mut rng).unwrap();
            crate::rl::flat_to_action(&topo, &flat)
                .validate(&topo)
                .unwrap();
        }
    }
}

//! From-scratch actor-critic learners: clipped PPO (on-policy) and DDPG
//! (off-policy), plus the training loop with an optional safety shield.
//!
//! Policies emit one logit per (tunnel, path); a per-tunnel softmax squashes
//! logits onto the split simplices, so every emitted action is valid by
//! construction. The stochastic (PPO) policy is a squashed Gaussian over
//! logit space with a state-independent log-std.

pub mod buffer;
pub mod checkpoint;
pub mod ddpg;
pub mod mlp;
pub mod ppo;
pub mod train;

pub use buffer::{Experience, ReplayBuffer};
pub use checkpoint::Checkpoint;
pub use ddpg::{DdpgAgent, DdpgConfig};
pub use mlp::{Adam, Mlp, MlpGrads};
pub use ppo::{PpoAgent, PpoConfig, Rollout};
pub use train::{train, Algo, AlgoConfig, Schedule, StepRecord, TrainOutput};

use crate::flow_env::SplitAction;
use crate::topology::Topology;

/// (start, len) of each tunnel's slice in a flat logit/action vector.
pub fn tunnel_spans(topo: &Topology) -> Vec<(usize, usize)> {
    let mut spans = Vec::with_capacity(topo.num_tunnels());
    let mut offset = 0;
    for t in topo.tunnels() {
        spans.push((offset, t.paths.len()));
        offset += t.paths.len();
    }
    spans
}

/// Per-tunnel softmax of a flat logit vector.
pub fn softmax_per_tunnel(spans: &[(usize, usize)], logits: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    for &(start, len) in spans {
        let seg = &logits[start..start + len];
        let max = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (i, &z) in seg.iter().enumerate() {
            let e = (z - max).exp();
            out[start + i] = e;
            total += e;
        }
        for v in &mut out[start..start + len] {
            *v /= total;
        }
    }
    out
}

/// Jacobian-vector product of the per-tunnel softmax: given `dL/da` at the
/// squashed output `a`, returns `dL/dz` at the logits.
pub fn softmax_backward(spans: &[(usize, usize)], action: &[f64], d_action: &[f64]) -> Vec<f64> {
    let mut d_logits = vec![0.0; action.len()];
    for &(start, len) in spans {
        let a = &action[start..start + len];
        let g = &d_action[start..start + len];
        let weighted: f64 = a.iter().zip(g).map(|(ai, gi)| ai * gi).sum();
        for i in 0..len {
            d_logits[start + i] = a[i] * (g[i] - weighted);
        }
    }
    d_logits
}

/// Flat action -> [`SplitAction`] for a given topology shape.
pub fn flat_to_action(topo: &Topology, flat: &[f64]) -> SplitAction {
    SplitAction::from_flat(topo, flat).expect("flat vector shaped like the topology")
}

/// Log-density of a diagonal Gaussian at `z`.
pub fn gaussian_log_prob(z: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    const LOG_2PI: f64 = 1.8378770664093453;
    z.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((zi, mi), lsi)| {
            let std = lsi.exp();
            let d = (zi - mi) / std;
            -0.5 * d * d - lsi - 0.5 * LOG_2PI
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_abilene, AbileneProfile};

    #[test]
    fn softmax_uniform_on_zero_logits() {
        let topo = build_abilene(AbileneProfile::default());
        let spans = tunnel_spans(&topo);
        let a = softmax_per_tunnel(&spans, &vec![0.0; 12]);
        for &v in &a {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_output_on_simplex() {
        let topo = build_abilene(AbileneProfile::default());
        let spans = tunnel_spans(&topo);
        let logits: Vec<f64> = (0..12).map(|i| (i as f64) * 0.7 - 3.0).collect();
        let a = softmax_per_tunnel(&spans, &logits);
        let action = flat_to_action(&topo, &a);
        action.validate(&topo).unwrap();
    }

    #[test]
    fn softmax_backward_matches_finite_differences() {
        let topo = build_abilene(AbileneProfile::default());
        let spans = tunnel_spans(&topo);
        let logits: Vec<f64> = (0..12).map(|i| (i as f64 * 0.13).sin()).collect();
        let weights: Vec<f64> = (0..12).map(|i| (i as f64 * 0.41).cos()).collect();
        // scalar loss: sum_i weights_i * softmax(z)_i
        let loss = |z: &[f64]| -> f64 {
            softmax_per_tunnel(&spans, z)
                .iter()
                .zip(&weights)
                .map(|(a, w)| a * w)
                .sum()
        };
        let a = softmax_per_tunnel(&spans, &logits);
        let analytic = softmax_backward(&spans, &a, &weights);
        let mut z = logits.clone();
        for i in 0..12 {
            let h = 1e-7;
            z[i] = logits[i] + h;
            let up = loss(&z);
            z[i] = logits[i] - h;
            let down = loss(&z);
            z[i] = logits[i];
            let numeric = (up - down) / (2.0 * h);
            assert!(
                (analytic[i] - numeric).abs() < 1e-8,
                "entry {i}: {} vs {numeric}",
                analytic[i]
            );
        }
    }

    #[test]
    fn gaussian_log_prob_standard_normal_at_zero() {
        let lp = gaussian_log_prob(&[0.0], &[0.0], &[0.0]);
        assert!((lp - (-0.5 * 1.8378770664093453)).abs() < 1e-12);
    }
}

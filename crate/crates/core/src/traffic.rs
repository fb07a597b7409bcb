//! Per-tunnel offered demand: phase-shifted noisy sinusoids modeling diurnal
//! variation. The noise stream is keyed by (seed, tunnel, step) so a demand
//! value is a pure function of the config — parallel generators with
//! different seeds are independent, and replaying a step is exact.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::Topology;

/// Offered demand for every tunnel at one time step (Mbps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSample {
    pub t: u64,
    /// Demand per tunnel, aligned with the topology's tunnel order.
    pub demand: Vec<f64>,
}

fn default_phase_step() -> f64 {
    std::f64::consts::PI / 3.0
}

/// Sinusoid parameters. Tunnel `k` gets phase `k * phase_step` unless
/// explicit `phases` are given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficConfig {
    pub base: f64,
    pub amplitude: f64,
    pub period: u64,
    pub noise_std: f64,
    pub seed: u64,
    #[serde(default = "default_phase_step")]
    pub phase_step: f64,
    #[serde(default)]
    pub phases: Option<Vec<f64>>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            base: 6.0,
            amplitude: 4.0,
            period: 64,
            noise_std: 0.5,
            seed: 0,
            phase_step: default_phase_step(),
            phases: None,
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.base >= self.amplitude) {
            return Err(Error::Traffic(format!(
                "need base >= amplitude >= 0, got base={} amplitude={}",
                self.base, self.amplitude
            )));
        }
        if self.period < 2 {
            return Err(Error::Traffic(format!("period must be >= 2, got {}", self.period)));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Traffic(format!(
                "noise_std must be >= 0, got {}",
                self.noise_std
            )));
        }
        Ok(())
    }

    fn phase(&self, tunnel: usize) -> Result<f64> {
        match &self.phases {
            Some(phases) => phases
                .get(tunnel)
                .copied()
                .ok_or_else(|| Error::UnknownTunnel(format!("#{tunnel}"))),
            None => Ok(tunnel as f64 * self.phase_step),
        }
    }

    /// Demand of tunnel `k` at step `t`:
    /// `max(0, base + amplitude * sin(2*pi*t/period + phase_k) + noise)`.
    pub fn demand_at(&self, tunnel: usize, t: u64) -> Result<f64> {
        let phase = self.phase(tunnel)?;
        let angle = 2.0 * std::f64::consts::PI * (t as f64) / (self.period as f64) + phase;
        let mut value = self.base + self.amplitude * angle.sin();
        if self.noise_std > 0.0 {
            value += self.noise(tunnel, t);
        }
        Ok(value.max(0.0))
    }

    fn noise(&self, tunnel: usize, t: u64) -> f64 {
        // splitmix64-style mixing of (seed, tunnel, t) into one stream key
        let mut key = self
            .seed
            .wrapping_mul(0x9e3779b97f4a7c15)
            .wrapping_add((tunnel as u64).wrapping_mul(0xbf58476d1ce4e5b9))
            .wrapping_add(t.wrapping_mul(0x94d049bb133111eb));
        key ^= key >> 30;
        key = key.wrapping_mul(0xbf58476d1ce4e5b9);
        key ^= key >> 27;
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        Normal::new(0.0, self.noise_std)
            .expect("validated noise_std")
            .sample(&mut rng)
    }
}

/// Stateful demand source: owns the episode clock so consecutive episodes
/// continue the sinusoid. One generator per environment instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficGenerator {
    config: TrafficConfig,
    num_tunnels: usize,
    clock: u64,
}

impl TrafficGenerator {
    pub fn new(config: TrafficConfig, topo: &Topology) -> Result<Self> {
        config.validate()?;
        if let Some(phases) = &config.phases {
            if phases.len() != topo.num_tunnels() {
                return Err(Error::Traffic(format!(
                    "{} phases given for {} tunnels",
                    phases.len(),
                    topo.num_tunnels()
                )));
            }
        }
        Ok(Self {
            num_tunnels: topo.num_tunnels(),
            config,
            clock: 0,
        })
    }

    pub fn config(&self) -> &TrafficConfig {
        &self.config
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// Restores the episode clock (used when resuming from a checkpoint).
    pub fn set_clock(&mut self, clock: u64) {
        self.clock = clock;
    }

    fn sample_at(&self, t: u64) -> TrafficSample {
        let demand = (0..self.num_tunnels)
            .map(|k| self.config.demand_at(k, t).expect("tunnel index in range"))
            .collect();
        TrafficSample { t, demand }
    }

    /// Emits the sample at the current clock position and advances the clock.
    pub fn next_sample(&mut self) -> TrafficSample {
        let sample = self.sample_at(self.clock);
        self.clock += 1;
        sample
    }

    /// Emits `len` consecutive samples, advancing the persistent clock.
    pub fn sample_episode(&mut self, len: usize) -> Vec<TrafficSample> {
        (0..len).map(|_| self.next_sample()).collect()
    }
}

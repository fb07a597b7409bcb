//! The MDP environment: maps (traffic, split action) to admitted loads,
//! link/path/tunnel delays, MLU, acceptance rate, and reward.
//!
//! Link delay follows an M/M/1 queue on top of the propagation delay. Under
//! congestion, admission is max-min fair via progressive filling. The MLU
//! reported to agents and to the safety layer is computed from *offered*
//! loads, so congestion stays visible even when admission masks it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::Topology;
use crate::traffic::{TrafficGenerator, TrafficSample};

/// Tolerance for the per-tunnel simplex constraint.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Per-tunnel split ratios over candidate paths. Entries are nonnegative and
/// sum to 1 per tunnel; the outer index follows the topology's tunnel order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAction {
    pub splits: Vec<Vec<f64>>,
}

impl SplitAction {
    /// Uniform (ECMP) split for every tunnel.
    pub fn uniform(topo: &Topology) -> Self {
        Self {
            splits: topo
                .tunnels()
                .iter()
                .map(|t| vec![1.0 / t.paths.len() as f64; t.paths.len()])
                .collect(),
        }
    }

    pub fn validate(&self, topo: &Topology) -> Result<()> {
        if self.splits.len() != topo.num_tunnels() {
            return Err(Error::InvalidAction(format!(
                "{} tunnels in action, topology has {}",
                self.splits.len(),
                topo.num_tunnels()
            )));
        }
        for (k, (x, t)) in self.splits.iter().zip(topo.tunnels()).enumerate() {
            if x.len() != t.paths.len() {
                return Err(Error::InvalidAction(format!(
                    "tunnel `{}` has {} paths, action carries {}",
                    t.id,
                    t.paths.len(),
                    x.len()
                )));
            }
            let mut sum = 0.0;
            for &v in x {
                if !(v >= -SIMPLEX_TOL) || !v.is_finite() {
                    return Err(Error::InvalidAction(format!(
                        "tunnel #{k} has split entry {v}"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidAction(format!(
                    "tunnel #{k} splits sum to {sum}"
                )));
            }
        }
        Ok(())
    }

    /// Concatenates the per-tunnel vectors in tunnel order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.splits.iter().flatten().copied().collect()
    }

    /// Rebuilds per-tunnel vectors from a flat vector shaped like `topo`.
    pub fn from_flat(topo: &Topology, flat: &[f64]) -> Result<Self> {
        if flat.len() != topo.total_paths() {
            return Err(Error::ShapeMismatch(format!(
                "flat action has {} entries, topology needs {}",
                flat.len(),
                topo.total_paths()
            )));
        }
        let mut splits = Vec::with_capacity(topo.num_tunnels());
        let mut offset = 0;
        for t in topo.tunnels() {
            splits.push(flat[offset..offset + t.paths.len()].to_vec());
            offset += t.paths.len();
        }
        Ok(Self { splits })
    }

    /// L1 distance between two actions.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.splits
            .iter()
            .zip(&other.splits)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .sum()
    }
}

/// Per-link offered/admitted loads and utilization after one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkLoadState {
    pub offered: Vec<f64>,
    pub admitted: Vec<f64>,
    /// Admitted-load utilization per link.
    pub utilization: Vec<f64>,
}

/// Everything observable about one environment step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// Max over active paths of the path delay, per tunnel (ms).
    pub tunnel_delays: Vec<f64>,
    /// Delay of every candidate path (ms), active or not.
    pub path_delays: Vec<Vec<f64>>,
    /// Offered-load maximum link utilization.
    pub mlu: f64,
    pub acceptance_rate: f64,
    pub reward: f64,
    pub link_state: LinkLoadState,
}

impl StepReport {
    pub fn mean_tunnel_delay(&self) -> f64 {
        if self.tunnel_delays.is_empty() {
            0.0
        } else {
            self.tunnel_delays.iter().sum::<f64>() / self.tunnel_delays.len() as f64
        }
    }
}

/// Environment constants. `d_ref` (reward delay normalization) and
/// `obs_scale` (observation normalization) default to topology-derived
/// values: the largest path propagation delay, and max+min link capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Queueing scale constant kappa (ms * Mbps).
    pub kappa: f64,
    /// Utilization cap in the M/M/1 denominator; keeps the delay finite.
    pub rho_max: f64,
    /// Reward weight between normalized delay and MLU.
    pub sigma: f64,
    /// Split-ratio threshold above which a path counts as active.
    pub tau_active: f64,
    #[serde(default)]
    pub d_ref: Option<f64>,
    #[serde(default)]
    pub obs_scale: Option<f64>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            rho_max: 0.999,
            sigma: 0.8,
            tau_active: 1e-6,
            d_ref: None,
            obs_scale: None,
        }
    }
}

/// `EnvConfig` with topology-derived defaults filled in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    pub kappa: f64,
    pub rho_max: f64,
    pub sigma: f64,
    pub tau_active: f64,
    pub d_ref: f64,
    pub obs_scale: f64,
}

impl EnvConfig {
    pub fn resolve(&self, topo: &Topology) -> EnvParams {
        let caps = topo.links().iter().map(|l| l.capacity);
        let max_cap = caps.clone().fold(0.0_f64, f64::max);
        let min_cap = caps.fold(f64::INFINITY, f64::min);
        EnvParams {
            kappa: self.kappa,
            rho_max: self.rho_max,
            sigma: self.sigma,
            tau_active: self.tau_active,
            d_ref: self.d_ref.unwrap_or_else(|| topo.max_path_prop_delay()),
            obs_scale: self.obs_scale.unwrap_or(max_cap + min_cap),
        }
    }
}

/// Per-link offered load: `load_e = sum_k sum_{p in P_k: e in p} T_k * x_p_k`.
pub fn offered_loads(topo: &Topology, demand: &[f64], action: &SplitAction) -> Vec<f64> {
    let mut loads = vec![0.0; topo.links().len()];
    for (k, tunnel) in topo.tunnels().iter().enumerate() {
        let t_k = demand[k];
        if t_k == 0.0 {
            continue;
        }
        for (p, path) in tunnel.paths.iter().enumerate() {
            let rate = t_k * action.splits[k][p];
            if rate == 0.0 {
                continue;
            }
            for &e in &path.links {
                loads[e] += rate;
            }
        }
    }
    loads
}

/// Maximum link utilization of a load vector; 0 when all loads are 0.
pub fn mlu(topo: &Topology, loads: &[f64]) -> f64 {
    topo.links()
        .iter()
        .zip(loads)
        .map(|(l, &load)| load / l.capacity)
        .fold(0.0_f64, f64::max)
}

/// M/M/1 link delay with capped utilization:
/// `d_e = prop + kappa / (c - min(load, rho_max * c))`.
pub fn link_delay(prop_delay: f64, capacity: f64, load: f64, kappa: f64, rho_max: f64) -> f64 {
    let effective = load.min(rho_max * capacity);
    prop_delay + kappa / (capacity - effective)
}

/// One (tunnel, path) component of the traffic with its offered rate.
#[derive(Debug, Clone)]
pub struct Subflow {
    pub links: Vec<usize>,
    pub demand: f64,
}

/// Progressive-filling max-min fair admission. All unfrozen subflows share a
/// common rate that rises until either a subflow meets its demand or a link
/// reaches `cap_frac * capacity`; saturated links freeze their subflows at
/// the equal residual share. Returns admitted rates, never above demand.
pub fn water_fill(link_caps: &[f64], subflows: &[Subflow], cap_frac: f64) -> Vec<f64> {
    let n = subflows.len();
    let mut admitted = vec![0.0; n];
    let mut frozen = vec![false; n];
    let mut frozen_load = vec![0.0; link_caps.len()];
    let mut unfrozen_count = vec![0usize; link_caps.len()];
    for sf in subflows {
        for &e in &sf.links {
            unfrozen_count[e] += 1;
        }
    }
    let mut remaining = n;
    while remaining > 0 {
        // Rate at which the next event fires: a subflow reaching its demand
        // or a link saturating under the common fill rate.
        let mut r_next = f64::INFINITY;
        for (i, sf) in subflows.iter().enumerate() {
            if !frozen[i] {
                r_next = r_next.min(sf.demand);
            }
        }
        for (e, &cap) in link_caps.iter().enumerate() {
            if unfrozen_count[e] > 0 {
                let limit = (cap * cap_frac - frozen_load[e]).max(0.0) / unfrozen_count[e] as f64;
                r_next = r_next.min(limit);
            }
        }
        debug_assert!(r_next.is_finite());

        let mut saturated = vec![false; link_caps.len()];
        for (e, &cap) in link_caps.iter().enumerate() {
            if unfrozen_count[e] > 0 {
                let limit = (cap * cap_frac - frozen_load[e]).max(0.0) / unfrozen_count[e] as f64;
                if limit <= r_next {
                    saturated[e] = true;
                }
            }
        }
        let mut froze_any = false;
        for (i, sf) in subflows.iter().enumerate() {
            if frozen[i] {
                continue;
            }
            let demand_met = sf.demand <= r_next;
            let link_bound = sf.links.iter().any(|&e| saturated[e]);
            if demand_met || link_bound {
                let rate = if demand_met { sf.demand } else { r_next };
                admitted[i] = rate;
                frozen[i] = true;
                froze_any = true;
                remaining -= 1;
                for &e in &sf.links {
                    unfrozen_count[e] -= 1;
                    frozen_load[e] += rate;
                }
            }
        }
        debug_assert!(froze_any, "progressive filling must make progress");
    }
    admitted
}

/// Full step evaluation for one demand vector, independent of any clock.
pub fn evaluate_action(
    topo: &Topology,
    params: &EnvParams,
    demand: &[f64],
    action: &SplitAction,
) -> Result<StepReport> {
    action.validate(topo)?;
    let offered = offered_loads(topo, demand, action);
    let mlu_offered = mlu(topo, &offered);

    // Admission: max-min fair up to full link capacity.
    let mut subflows = Vec::new();
    let mut index = Vec::new();
    for (k, tunnel) in topo.tunnels().iter().enumerate() {
        for (p, path) in tunnel.paths.iter().enumerate() {
            let rate = demand[k] * action.splits[k][p];
            if rate > 0.0 {
                subflows.push(Subflow {
                    links: path.links.clone(),
                    demand: rate,
                });
                index.push((k, p));
            }
        }
    }
    let caps: Vec<f64> = topo.links().iter().map(|l| l.capacity).collect();
    let admitted_rates = water_fill(&caps, &subflows, 1.0);

    let mut admitted = vec![0.0; topo.links().len()];
    let mut offered_total = 0.0;
    let mut admitted_total = 0.0;
    let mut dropped = false;
    for (sf, &rate) in subflows.iter().zip(&admitted_rates) {
        offered_total += sf.demand;
        admitted_total += rate;
        if rate < sf.demand {
            dropped = true;
        }
        for &e in &sf.links {
            admitted[e] += rate;
        }
    }
    let acceptance_rate = if !dropped || offered_total == 0.0 {
        1.0
    } else {
        admitted_total / offered_total
    };

    let link_delays: Vec<f64> = topo
        .links()
        .iter()
        .zip(&admitted)
        .map(|(l, &load)| link_delay(l.prop_delay, l.capacity, load, params.kappa, params.rho_max))
        .collect();

    let mut path_delays = Vec::with_capacity(topo.num_tunnels());
    let mut tunnel_delays = Vec::with_capacity(topo.num_tunnels());
    for (k, tunnel) in topo.tunnels().iter().enumerate() {
        let delays: Vec<f64> = tunnel
            .paths
            .iter()
            .map(|p| p.links.iter().map(|&e| link_delays[e]).sum())
            .collect();
        let active_max = delays
            .iter()
            .zip(&action.splits[k])
            .filter(|(_, &x)| x > params.tau_active)
            .map(|(&d, _)| d)
            .fold(f64::NEG_INFINITY, f64::max);
        // A valid simplex always has one entry >= 1/|P_k| > tau, but guard anyway.
        let tunnel_delay = if active_max.is_finite() {
            active_max
        } else {
            delays.iter().copied().fold(0.0, f64::max)
        };
        path_delays.push(delays);
        tunnel_delays.push(tunnel_delay);
    }

    let mean_delay = tunnel_delays.iter().sum::<f64>() / tunnel_delays.len().max(1) as f64;
    let reward = -params.sigma * (mean_delay / params.d_ref) - (1.0 - params.sigma) * mlu_offered;

    let utilization = topo
        .links()
        .iter()
        .zip(&admitted)
        .map(|(l, &load)| load / l.capacity)
        .collect();

    Ok(StepReport {
        tunnel_delays,
        path_delays,
        mlu: mlu_offered,
        acceptance_rate,
        reward,
        link_state: LinkLoadState {
            offered,
            admitted,
            utilization,
        },
    })
}

/// Outcome of [`FlowEnv::step`]: the report plus the next observation.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub report: StepReport,
    /// Next demand vector, normalized by `obs_scale`.
    pub next_observation: Vec<f64>,
    pub next_demand: TrafficSample,
}

/// Stateful environment instance. Owns a traffic generator whose clock
/// persists across episodes; many instances with disjoint seeds may run
/// concurrently sharing one immutable [`Topology`].
#[derive(Debug, Clone)]
pub struct FlowEnv {
    topo: std::sync::Arc<Topology>,
    params: EnvParams,
    generator: TrafficGenerator,
    current: TrafficSample,
}

impl FlowEnv {
    pub fn new(
        topo: std::sync::Arc<Topology>,
        config: &EnvConfig,
        mut generator: TrafficGenerator,
    ) -> Self {
        let params = config.resolve(&topo);
        let current = generator.next_sample();
        Self {
            topo,
            params,
            generator,
            current,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    pub fn current_demand(&self) -> &TrafficSample {
        &self.current
    }

    pub fn traffic_clock(&self) -> u64 {
        self.generator.clock()
    }

    /// Current demand vector normalized by `obs_scale`.
    pub fn observation(&self) -> Vec<f64> {
        self.current
            .demand
            .iter()
            .map(|d| d / self.params.obs_scale)
            .collect()
    }

    /// Applies `action` to the current demand, advances the traffic clock.
    pub fn step(&mut self, action: &SplitAction) -> Result<StepOutcome> {
        let report = evaluate_action(&self.topo, &self.params, &self.current.demand, action)?;
        let next_demand = self.generator.next_sample();
        self.current = next_demand.clone();
        Ok(StepOutcome {
            report,
            next_observation: self.observation(),
            next_demand,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_abilene, AbileneProfile, Link, PathDef, Topology, Tunnel};
    use crate::traffic::TrafficConfig;
    use rand::SeedableRng;

    /// One tunnel, two disjoint single-link paths with the given capacities.
    pub(crate) fn two_path_topology(caps: [f64; 2], props: [f64; 2]) -> Topology {
        Topology::new(
            vec!["s".into(), "d".into()],
            vec![
                Link {
                    id: "p0".into(),
                    src: "s".into(),
                    dst: "d".into(),
                    capacity: caps[0],
                    prop_delay: props[0],
                },
                Link {
                    id: "p1".into(),
                    src: "s".into(),
                    dst: "d".into(),
                    capacity: caps[1],
                    prop_delay: props[1],
                },
            ],
            vec![Tunnel {
                id: "t".into(),
                src: "s".into(),
                dst: "d".into(),
                paths: vec![PathDef { links: vec![0] }, PathDef { links: vec![1] }],
            }],
        )
        .unwrap()
    }

    fn action(splits: Vec<Vec<f64>>) -> SplitAction {
        SplitAction { splits }
    }

    #[test]
    fn offered_loads_zero_demand() {
        let topo = build_abilene(AbileneProfile::default());
        let loads = offered_loads(&topo, &[0.0; 6], &SplitAction::uniform(&topo));
        assert!(loads.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn offered_loads_direct_product() {
        let topo = two_path_topology([10.0, 10.0], [0.0, 0.0]);
        let loads = offered_loads(&topo, &[10.0], &action(vec![vec![0.8, 0.2]]));
        assert_eq!(loads, vec![8.0, 2.0]);
    }

    #[test]
    fn offered_loads_full_path_incidence() {
        let topo = build_abilene(AbileneProfile::default());
        let k = topo.tunnel_index("4-9").unwrap();
        let mut demand = vec![0.0; 6];
        demand[k] = 7.0;
        let mut act = SplitAction::uniform(&topo);
        act.splits[k] = vec![0.0, 1.0];
        let loads = offered_loads(&topo, &demand, &act);
        for link in topo.path_links(k, 1).unwrap() {
            let idx = topo.links().iter().position(|l| l.id == link.id).unwrap();
            assert_eq!(loads[idx], 7.0, "link {}", link.id);
        }
        let carried: usize = loads.iter().filter(|&&l| l > 0.0).count();
        assert_eq!(carried, 3);
    }

    #[test]
    fn offered_loads_scale_linearly() {
        let topo = build_abilene(AbileneProfile::default());
        let act = SplitAction::uniform(&topo);
        let demand: Vec<f64> = (0..6).map(|k| 1.0 + k as f64).collect();
        let scaled: Vec<f64> = demand.iter().map(|d| 3.5 * d).collect();
        let a = offered_loads(&topo, &demand, &act);
        let b = offered_loads(&topo, &scaled, &act);
        for (x, y) in a.iter().zip(&b) {
            assert!((3.5 * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn mlu_examples() {
        let topo = two_path_topology([10.0, 20.0], [0.0, 0.0]);
        assert_eq!(mlu(&topo, &[0.0, 0.0]), 0.0);
        assert_eq!(mlu(&topo, &[5.0, 0.0]), 0.5);
        assert_eq!(mlu(&topo, &[9.0, 10.0]), 0.9);
    }

    #[test]
    fn water_fill_demand_capped_flow() {
        let admitted = water_fill(
            &[10.0],
            &[
                Subflow { links: vec![0], demand: 8.0 },
                Subflow { links: vec![0], demand: 4.0 },
            ],
            1.0,
        );
        assert!((admitted[0] - 6.0).abs() < 1e-12);
        assert_eq!(admitted[1], 4.0);
    }

    #[test]
    fn water_fill_uncongested() {
        let admitted = water_fill(&[10.0], &[Subflow { links: vec![0], demand: 5.0 }], 1.0);
        assert_eq!(admitted, vec![5.0]);
    }

    #[test]
    fn water_fill_equal_split() {
        let admitted = water_fill(
            &[10.0],
            &[
                Subflow { links: vec![0], demand: 8.0 },
                Subflow { links: vec![0], demand: 8.0 },
            ],
            1.0,
        );
        assert_eq!(admitted, vec![5.0, 5.0]);
    }

    #[test]
    fn water_fill_monotone_in_demand() {
        // raising one subflow's demand never raises another's admitted rate
        let base = water_fill(
            &[10.0, 6.0],
            &[
                Subflow { links: vec![0], demand: 4.0 },
                Subflow { links: vec![0, 1], demand: 5.0 },
                Subflow { links: vec![1], demand: 3.0 },
            ],
            1.0,
        );
        let bumped = water_fill(
            &[10.0, 6.0],
            &[
                Subflow { links: vec![0], demand: 9.0 },
                Subflow { links: vec![0, 1], demand: 5.0 },
                Subflow { links: vec![1], demand: 3.0 },
            ],
            1.0,
        );
        assert!(bumped[1] <= base[1] + 1e-12);
        assert!(bumped[2] <= base[2] + 1e-12);
    }

    #[test]
    fn link_delay_examples() {
        let d = link_delay(1.67 / 5.0, 10.0, 0.0, 1.0, 0.999);
        assert!((d - (1.67 / 5.0 + 0.1)).abs() < 1e-12);
        assert_eq!(link_delay(0.0, 2.0, 1.0, 1.0, 0.999), 1.0);
        let capped = link_delay(0.5, 10.0, 10.0, 1.0, 0.999);
        assert!((capped - (0.5 + 100.0)).abs() < 1e-9);
    }

    #[test]
    fn link_delay_strictly_increasing_below_cap() {
        let mut prev = link_delay(0.0, 10.0, 0.0, 1.0, 0.999);
        for i in 1..99 {
            let d = link_delay(0.0, 10.0, i as f64 * 0.1, 1.0, 0.999);
            assert!(d > prev);
            prev = d;
        }
    }

    #[test]
    fn tunnel_delay_masks_inactive_paths() {
        let topo = two_path_topology([10.0, 10.0], [3.0, 7.0]);
        let params = EnvConfig::default().resolve(&topo);
        // both active: max of the two
        let both = evaluate_action(&topo, &params, &[1.0], &action(vec![vec![0.5, 0.5]])).unwrap();
        assert!(both.tunnel_delays[0] > 7.0);
        assert_eq!(both.tunnel_delays[0], both.path_delays[0][1]);
        // only path 0 active
        let one = evaluate_action(&topo, &params, &[1.0], &action(vec![vec![1.0, 0.0]])).unwrap();
        assert_eq!(one.tunnel_delays[0], one.path_delays[0][0]);
        assert!(one.tunnel_delays[0] < 7.0);
    }

    #[test]
    fn reward_anchors() {
        let topo = two_path_topology([10.0, 10.0], [0.0, 9.0]);
        let params = EnvParams {
            sigma: 1.0,
            d_ref: 9.0,
            ..EnvConfig::default().resolve(&topo)
        };
        // zero delays and zero mlu => reward 0
        let z = EnvParams { sigma: 0.8, ..params };
        let r0 = -z.sigma * (0.0 / z.d_ref) - (1.0 - z.sigma) * 0.0;
        assert_eq!(r0, 0.0);
        // sigma=1, mean delay == d_ref => -1
        let r1 = -params.sigma * (9.0 / params.d_ref);
        assert_eq!(r1, -1.0);
        // sigma=0.8, mean delay == d_ref, mlu 0.5 => -0.9
        let r2: f64 = -0.8 * (9.0 / 9.0) - 0.2 * 0.5;
        assert!((r2 + 0.9).abs() < 1e-12);
    }

    #[test]
    fn step_uncongested_ucmp_accepts_everything() {
        let topo = std::sync::Arc::new(build_abilene(AbileneProfile::default()));
        let cfg = EnvConfig::default();
        let traffic = TrafficConfig {
            base: 2.0,
            amplitude: 1.0,
            noise_std: 0.0,
            ..TrafficConfig::default()
        };
        let generator = TrafficGenerator::new(traffic, &topo).unwrap();
        let mut env = FlowEnv::new(topo.clone(), &cfg, generator);
        let act = crate::baselines::baseline_action(
            &crate::baselines::BaselineKind::Ucmp,
            &topo,
            &[0.0; 6],
            &mut rand_chacha::ChaCha8Rng::seed_from_u64(0),
        );
        for _ in 0..64 {
            let out = env.step(&act).unwrap();
            assert_eq!(out.report.acceptance_rate, 1.0);
            assert!(out.report.mlu < 1.0);
        }
    }

    #[test]
    fn step_forced_congestion_drops_traffic() {
        let topo = std::sync::Arc::new(two_path_topology([20.0, 10.0], [9.0, 1.67]));
        let cfg = EnvConfig::default();
        let traffic = TrafficConfig {
            base: 20.0,
            amplitude: 0.0,
            noise_std: 0.0,
            ..TrafficConfig::default()
        };
        let generator = TrafficGenerator::new(traffic, &topo).unwrap();
        let mut env = FlowEnv::new(topo, &cfg, generator);
        // all demand (2x the red capacity) on the red path
        let out = env.step(&action(vec![vec![0.0, 1.0]])).unwrap();
        assert!(out.report.acceptance_rate < 1.0);
        assert!((out.report.acceptance_rate - 0.5).abs() < 1e-9);
        assert!(out.report.mlu >= 2.0 - 1e-12);
    }

    #[test]
    fn evaluate_action_deterministic() {
        let topo = build_abilene(AbileneProfile::default());
        let params = EnvConfig::default().resolve(&topo);
        let demand = vec![3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let act = SplitAction::uniform(&topo);
        let a = evaluate_action(&topo, &params, &demand, &act).unwrap();
        let b = evaluate_action(&topo, &params, &demand, &act).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn step_rejects_malformed_action() {
        let topo = std::sync::Arc::new(build_abilene(AbileneProfile::default()));
        let generator = TrafficGenerator::new(TrafficConfig::default(), &topo).unwrap();
        let mut env = FlowEnv::new(topo.clone(), &EnvConfig::default(), generator);
        let mut bad = SplitAction::uniform(&topo);
        bad.splits[0] = vec![0.7, 0.7];
        assert!(matches!(env.step(&bad), Err(Error::InvalidAction(_))));
    }

    #[test]
    fn acceptance_equivalence_with_offered_mlu() {
        // acceptance == 1.0 exactly iff offered mlu <= 1.0
        let topo = two_path_topology([10.0, 20.0], [0.1, 0.2]);
        let params = EnvConfig::default().resolve(&topo);
        for (demand, split, expect_full) in [
            (29.9, vec![1.0 / 3.0, 2.0 / 3.0], true),
            (30.0, vec![1.0 / 3.0, 2.0 / 3.0], true),
            (30.5, vec![1.0 / 3.0, 2.0 / 3.0], false),
            (9.0, vec![1.0, 0.0], true),
            (10.5, vec![1.0, 0.0], false),
        ] {
            let rep =
                evaluate_action(&topo, &params, &[demand], &action(vec![split.clone()])).unwrap();
            assert_eq!(
                rep.acceptance_rate == 1.0,
                expect_full,
                "demand={demand} split={split:?} mlu={}",
                rep.mlu
            );
            assert_eq!(rep.mlu <= 1.0, expect_full);
        }
    }
}

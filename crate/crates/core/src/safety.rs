//! CBF safety shield: projects a proto-action into the MLU-feasible set via
//! stochastic local search, staying as close as possible to the proto-action
//! in L1 distance.
//!
//! The search evaluates candidates on the analytic linear load model only
//! (MLU is computable from demand, splits, and capacities), which is what
//! makes thousands of candidate evaluations per step affordable. `project`
//! is pure given (topology, demand, proto, config): a fixed seed yields a
//! fixed outcome.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::flow_env::{mlu, offered_loads, SplitAction};
use crate::topology::Topology;

/// Local-search parameters. Defaults follow the published setup:
/// radius 0.3, 450 solutions per iteration, 20 iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbfConfig {
    /// Local search radius delta_s in (0, 1].
    pub radius: f64,
    /// Candidate actions generated per iteration (N).
    pub solutions_per_iter: usize,
    /// Maximum local search iterations (M).
    pub max_iter: usize,
    /// Safety threshold on the offered MLU (inclusive).
    pub eta: f64,
    pub seed: u64,
}

impl Default for CbfConfig {
    fn default() -> Self {
        Self {
            radius: 0.3,
            solutions_per_iter: 450,
            max_iter: 20,
            eta: 1.0,
            seed: 0,
        }
    }
}

/// Result of projecting one proto-action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionOutcome {
    pub action: SplitAction,
    pub was_modified: bool,
    pub feasible_found: bool,
    pub mlu_before: f64,
    pub mlu_after: f64,
    /// L1 distance from the returned action to the proto-action.
    pub l1_distance: f64,
}

/// True iff the offered-load MLU of `action` is at most `eta` (inclusive).
pub fn is_safe(topo: &Topology, demand: &[f64], action: &SplitAction, eta: f64) -> bool {
    mlu(topo, &offered_loads(topo, demand, action)) <= eta
}

/// Per-tunnel perturbation move: which path sheds mass and how the shed mass
/// spreads over the remaining paths. Derived once from an action's loads and
/// reused for a whole batch of candidates.
#[derive(Debug, Clone)]
struct TunnelMove {
    tunnel: usize,
    worst_path: usize,
    /// Redistribution weights over all paths (zero on `worst_path`), summing
    /// to 1.
    weights: Vec<f64>,
}

fn plan_moves(topo: &Topology, loads: &[f64], eta: f64) -> Vec<TunnelMove> {
    let mut moves = Vec::new();
    for (k, tunnel) in topo.tunnels().iter().enumerate() {
        if tunnel.paths.len() < 2 {
            continue;
        }
        // Path utilization: max over the path's links of load/capacity.
        let utils: Vec<f64> = tunnel
            .paths
            .iter()
            .map(|p| {
                p.links
                    .iter()
                    .map(|&e| loads[e] / topo.links()[e].capacity)
                    .fold(0.0_f64, f64::max)
            })
            .collect();
        let (worst_path, &worst_util) = utils
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        if worst_util <= eta {
            continue;
        }
        // Spread withdrawn mass proportionally to each other path's residual
        // bottleneck headroom; fall back to uniform when nothing has headroom.
        let mut weights = vec![0.0; tunnel.paths.len()];
        let mut total = 0.0;
        for (p, path) in tunnel.paths.iter().enumerate() {
            if p == worst_path {
                continue;
            }
            let headroom = path
                .links
                .iter()
                .map(|&e| (topo.links()[e].capacity - loads[e]).max(0.0))
                .fold(f64::INFINITY, f64::min);
            weights[p] = headroom;
            total += headroom;
        }
        if total > 0.0 {
            for w in &mut weights {
                *w /= total;
            }
        } else {
            let share = 1.0 / (tunnel.paths.len() - 1) as f64;
            for (p, w) in weights.iter_mut().enumerate() {
                *w = if p == worst_path { 0.0 } else { share };
            }
        }
        moves.push(TunnelMove {
            tunnel: k,
            worst_path,
            weights,
        });
    }
    moves
}

fn apply_moves<R: Rng>(
    base: &SplitAction,
    moves: &[TunnelMove],
    radius: f64,
    rng: &mut R,
) -> SplitAction {
    let mut cand = base.clone();
    for mv in moves {
        let eps: f64 = rng.random::<f64>() * radius;
        let x = &mut cand.splits[mv.tunnel];
        let take = eps.min(x[mv.worst_path]);
        if take == 0.0 {
            continue;
        }
        x[mv.worst_path] -= take;
        for (p, w) in mv.weights.iter().enumerate() {
            x[p] += take * w;
        }
    }
    cand
}

/// One local-search move: for every tunnel whose most-utilized path exceeds
/// `eta`, withdraw up to Uniform(0, radius) of split mass from that path and
/// add it to the remaining paths proportionally to residual capacity
/// headroom. Safe actions are returned unchanged.
pub fn perturb<R: Rng>(
    topo: &Topology,
    demand: &[f64],
    action: &SplitAction,
    radius: f64,
    eta: f64,
    rng: &mut R,
) -> SplitAction {
    let loads = offered_loads(topo, demand, action);
    let moves = plan_moves(topo, &loads, eta);
    apply_moves(action, &moves, radius, rng)
}

/// Projects `proto` into the MLU-feasible set (Algorithm-2-style local
/// search). Safe protos return unmodified. Otherwise up to
/// `max_iter * solutions_per_iter` candidates are generated, each iteration
/// re-centering on the lowest-MLU candidate so far; the feasible candidate
/// with the smallest L1 distance to `proto` wins (ties: lower MLU, then lower
/// candidate index). With an empty feasible set the minimum-MLU candidate is
/// returned, so the outcome never has a worse MLU than the proto-action.
pub fn project(
    topo: &Topology,
    demand: &[f64],
    proto: &SplitAction,
    cfg: &CbfConfig,
) -> ProjectionOutcome {
    let proto_loads = offered_loads(topo, demand, proto);
    let mlu_before = mlu(topo, &proto_loads);
    if mlu_before <= cfg.eta {
        return ProjectionOutcome {
            action: proto.clone(),
            was_modified: false,
            feasible_found: true,
            mlu_before,
            mlu_after: mlu_before,
            l1_distance: 0.0,
        };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best_feasible: Option<(SplitAction, f64, f64)> = None; // (action, mlu, l1)
    let mut center = proto.clone();
    let mut center_loads = proto_loads;
    let mut best_unsafe = (proto.clone(), mlu_before);

    for _ in 0..cfg.max_iter {
        let moves = plan_moves(topo, &center_loads, cfg.eta);
        if moves.is_empty() {
            // No tunnel crosses the threshold from this center; nothing new
            // can be generated.
            break;
        }
        for _ in 0..cfg.solutions_per_iter {
            let cand = apply_moves(&center, &moves, cfg.radius, &mut rng);
            let cand_mlu = mlu(topo, &offered_loads(topo, demand, &cand));
            if cand_mlu <= cfg.eta {
                let l1 = cand.l1_distance(proto);
                let better = match &best_feasible {
                    None => true,
                    Some((_, cur_mlu, cur_l1)) => {
                        l1 < *cur_l1 || (l1 == *cur_l1 && cand_mlu < *cur_mlu)
                    }
                };
                if better {
                    best_feasible = Some((cand, cand_mlu, l1));
                }
            } else if cand_mlu < best_unsafe.1 {
                best_unsafe = (cand, cand_mlu);
            }
        }
        if best_feasible.is_some() {
            break;
        }
        center = best_unsafe.0.clone();
        center_loads = offered_loads(topo, demand, &center);
    }

    match best_feasible {
        Some((action, mlu_after, l1_distance)) => ProjectionOutcome {
            action,
            was_modified: true,
            feasible_found: true,
            mlu_before,
            mlu_after,
            l1_distance,
        },
        None => {
            let (action, mlu_after) = best_unsafe;
            let l1_distance = action.l1_distance(proto);
            ProjectionOutcome {
                was_modified: l1_distance > 0.0,
                feasible_found: false,
                mlu_before,
                mlu_after,
                l1_distance,
                action,
            }
        }
    }
}

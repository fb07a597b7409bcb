//! Benchmark solver: minimizes the average tunnel delay under MLU and simplex
//! constraints with the M/M/1 delay closure.
//!
//! `solve` runs multi-start projected descent on a mass-weighted softmax
//! relaxation of the per-tunnel max, annealing the temperature toward the
//! true max; iterates are projected onto the intersection of the per-tunnel
//! simplices and the per-link capacity half-spaces (Dykstra). `brute_force`
//! exhausts a simplex grid and serves as the verification oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow_env::{link_delay, mlu, offered_loads, SplitAction};
use crate::topology::Topology;

/// One delay-minimization instance.
#[derive(Debug, Clone)]
pub struct NlpProblem<'a> {
    pub topo: &'a Topology,
    pub demand: Vec<f64>,
    /// Feasibility bound on the offered MLU.
    pub mlu_target: f64,
    pub kappa: f64,
    pub rho_max: f64,
    pub tau_active: f64,
}

impl<'a> NlpProblem<'a> {
    pub fn new(topo: &'a Topology, demand: Vec<f64>) -> Self {
        Self {
            topo,
            demand,
            mlu_target: 0.999,
            kappa: 1.0,
            rho_max: 0.999,
            tau_active: 1e-6,
        }
    }

    /// Mean tunnel delay of `action`: per tunnel, the exact maximum over
    /// active paths (split ratio above `tau_active`) of the summed M/M/1 link
    /// delays. Matches the environment's delay pipeline whenever admission is
    /// inactive.
    pub fn true_objective(&self, action: &SplitAction) -> f64 {
        let loads = offered_loads(self.topo, &self.demand, action);
        let link_delays: Vec<f64> = self
            .topo
            .links()
            .iter()
            .zip(&loads)
            .map(|(l, &load)| link_delay(l.prop_delay, l.capacity, load, self.kappa, self.rho_max))
            .collect();
        let mut total = 0.0;
        for (k, tunnel) in self.topo.tunnels().iter().enumerate() {
            let mut worst = f64::NEG_INFINITY;
            let mut fallback = 0.0_f64;
            for (p, path) in tunnel.paths.iter().enumerate() {
                let d: f64 = path.links.iter().map(|&e| link_delays[e]).sum();
                fallback = fallback.max(d);
                if action.splits[k][p] > self.tau_active && d > worst {
                    worst = d;
                }
            }
            total += if worst.is_finite() { worst } else { fallback };
        }
        total / self.topo.num_tunnels().max(1) as f64
    }

    pub fn offered_mlu(&self, action: &SplitAction) -> f64 {
        mlu(self.topo, &offered_loads(self.topo, &self.demand, action))
    }

    /// Smoothed objective: per tunnel, a mass-weighted log-sum-exp of path
    /// delays at temperature `tau`. As `tau -> 0` this tends to the max over
    /// paths that carry split mass.
    fn smooth_objective(&self, flat: &[f64], tau: f64, scratch: &mut Scratch) -> f64 {
        scratch.loads.iter_mut().for_each(|l| *l = 0.0);
        let mut offset = 0;
        for (k, tunnel) in self.topo.tunnels().iter().enumerate() {
            let t_k = self.demand[k];
            for (p, path) in tunnel.paths.iter().enumerate() {
                let rate = t_k * flat[offset + p];
                if rate != 0.0 {
                    for &e in &path.links {
                        scratch.loads[e] += rate;
                    }
                }
            }
            offset += tunnel.paths.len();
        }
        for (e, link) in self.topo.links().iter().enumerate() {
            scratch.delays[e] = link_delay(
                link.prop_delay,
                link.capacity,
                scratch.loads[e],
                self.kappa,
                self.rho_max,
            );
        }
        let mut total = 0.0;
        let mut offset = 0;
        for tunnel in self.topo.tunnels() {
            let mut d_max = f64::NEG_INFINITY;
            for (p, path) in tunnel.paths.iter().enumerate() {
                let w = flat[offset + p].max(0.0);
                scratch.path_delay[p] = path.links.iter().map(|&e| scratch.delays[e]).sum();
                scratch.path_weight[p] = w;
                if w > 0.0 && scratch.path_delay[p] > d_max {
                    d_max = scratch.path_delay[p];
                }
            }
            if !d_max.is_finite() {
                d_max = scratch.path_delay[..tunnel.paths.len()]
                    .iter()
                    .copied()
                    .fold(0.0, f64::max);
            }
            let mut acc = 0.0;
            for p in 0..tunnel.paths.len() {
                if scratch.path_weight[p] > 0.0 {
                    acc += scratch.path_weight[p] * ((scratch.path_delay[p] - d_max) / tau).exp();
                }
            }
            total += if acc > 0.0 { tau * acc.ln() + d_max } else { d_max };
            offset += tunnel.paths.len();
        }
        total / self.topo.num_tunnels().max(1) as f64
    }
}

struct Scratch {
    loads: Vec<f64>,
    delays: Vec<f64>,
    path_delay: Vec<f64>,
    path_weight: Vec<f64>,
}

impl Scratch {
    fn new(topo: &Topology) -> Self {
        let max_paths = topo.tunnels().iter().map(|t| t.paths.len()).max().unwrap_or(1);
        Self {
            loads: vec![0.0; topo.links().len()],
            delays: vec![0.0; topo.links().len()],
            path_delay: vec![0.0; max_paths],
            path_weight: vec![0.0; max_paths],
        }
    }
}

/// Search effort knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveBudget {
    pub restarts: usize,
    /// Descent iterations per annealing round.
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for SolveBudget {
    fn default() -> Self {
        Self {
            restarts: 16,
            max_iters: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlpSolution {
    pub action: SplitAction,
    /// Mean tunnel delay (ms), evaluated with the exact max.
    pub objective: f64,
    pub feasible: bool,
    pub iterations: u64,
    /// False when an iteration cap stopped the descent before the movement
    /// tolerance was reached.
    pub converged: bool,
    /// Most violated link when no feasible point was found.
    pub violating_link: Option<String>,
}

/// Euclidean projection onto one probability simplex.
fn project_simplex(x: &mut [f64]) {
    let n = x.len();
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    let mut support = 0;
    for (i, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let candidate = (cumsum - 1.0) / (i + 1) as f64;
        if v - candidate > 0.0 {
            theta = candidate;
            support = i + 1;
        }
    }
    debug_assert!(support > 0 && support <= n);
    for v in x.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
}

/// Sparse linear constraint `sum coeff_i * x_i <= bound` (one capacity
/// half-space per link).
struct HalfSpace {
    terms: Vec<(usize, f64)>,
    norm_sq: f64,
    bound: f64,
}

fn capacity_halfspaces(problem: &NlpProblem) -> Vec<HalfSpace> {
    let topo = problem.topo;
    let mut spaces = Vec::new();
    for (e, link) in topo.links().iter().enumerate() {
        let mut terms = Vec::new();
        let mut offset = 0;
        for (k, tunnel) in topo.tunnels().iter().enumerate() {
            for (p, path) in tunnel.paths.iter().enumerate() {
                if path.links.contains(&e) && problem.demand[k] > 0.0 {
                    terms.push((offset + p, problem.demand[k]));
                }
            }
            offset += tunnel.paths.len();
        }
        if terms.is_empty() {
            continue;
        }
        let norm_sq = terms.iter().map(|(_, c)| c * c).sum();
        spaces.push(HalfSpace {
            terms,
            norm_sq,
            bound: problem.mlu_target * link.capacity,
        });
    }
    spaces
}

/// Dykstra's alternating projection onto the intersection of the per-tunnel
/// simplices and the capacity half-spaces.
fn project_feasible(
    topo: &Topology,
    spaces: &[HalfSpace],
    flat: &mut [f64],
    corrections: &mut [Vec<f64>],
) {
    let tunnel_spans: Vec<(usize, usize)> = {
        let mut spans = Vec::new();
        let mut offset = 0;
        for t in topo.tunnels() {
            spans.push((offset, t.paths.len()));
            offset += t.paths.len();
        }
        spans
    };
    let num_sets = tunnel_spans.len() + spaces.len();
    for c in corrections.iter_mut() {
        c.iter_mut().for_each(|v| *v = 0.0);
    }
    let mut prev = flat.to_vec();
    for _sweep in 0..500 {
        for set in 0..num_sets {
            if set < tunnel_spans.len() {
                let (start, len) = tunnel_spans[set];
                let seg = &mut flat[start..start + len];
                for (v, c) in seg.iter_mut().zip(&corrections[set]) {
                    *v += c;
                }
                let before: Vec<f64> = seg.to_vec();
                project_simplex(seg);
                for ((c, b), v) in corrections[set].iter_mut().zip(before).zip(seg.iter()) {
                    *c = b - v;
                }
            } else {
                let hs = &spaces[set - tunnel_spans.len()];
                let corr = &mut corrections[set];
                for (slot, &(idx, _)) in corr.iter_mut().zip(&hs.terms) {
                    flat[idx] += *slot;
                }
                let dot: f64 = hs.terms.iter().map(|&(idx, c)| c * flat[idx]).sum();
                if dot > hs.bound {
                    let scale = (dot - hs.bound) / hs.norm_sq;
                    for (slot, &(idx, c)) in corr.iter_mut().zip(&hs.terms) {
                        let before = flat[idx];
                        flat[idx] -= scale * c;
                        *slot = before - flat[idx];
                    }
                } else {
                    corr.iter_mut().for_each(|v| *v = 0.0);
                }
            }
        }
        let delta = flat
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        if delta < 1e-12 {
            break;
        }
        prev.copy_from_slice(flat);
    }
}

fn central_gradient(
    problem: &NlpProblem,
    flat: &[f64],
    tau: f64,
    scratch: &mut Scratch,
    grad: &mut [f64],
) {
    let mut x = flat.to_vec();
    for i in 0..flat.len() {
        let h = 1e-6 * flat[i].abs().max(1.0);
        x[i] = flat[i] + h;
        let up = problem.smooth_objective(&x, tau, scratch);
        x[i] = flat[i] - h;
        let down = problem.smooth_objective(&x, tau, scratch);
        x[i] = flat[i];
        grad[i] = (up - down) / (2.0 * h);
    }
}

fn multi_start_points(problem: &NlpProblem, budget: &SolveBudget) -> Vec<Vec<f64>> {
    let topo = problem.topo;
    let mut starts = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);

    starts.push(SplitAction::uniform(topo).to_flat());
    let ucmp = crate::baselines::baseline_action(
        &crate::baselines::BaselineKind::Ucmp,
        topo,
        &problem.demand,
        &mut rng,
    );
    starts.push(ucmp.to_flat());
    let max_paths = topo.tunnels().iter().map(|t| t.paths.len()).max().unwrap_or(1);
    for j in 0..max_paths {
        let splits = topo
            .tunnels()
            .iter()
            .map(|t| {
                let mut x = vec![0.0; t.paths.len()];
                x[j.min(t.paths.len() - 1)] = 1.0;
                x
            })
            .collect();
        starts.push(SplitAction { splits }.to_flat());
    }
    while starts.len() < budget.restarts {
        let splits = topo
            .tunnels()
            .iter()
            .map(|t| {
                let draws: Vec<f64> = (0..t.paths.len())
                    .map(|_| -(rng.random::<f64>().max(1e-12)).ln())
                    .collect();
                let total: f64 = draws.iter().sum();
                draws.iter().map(|d| d / total).collect()
            })
            .collect();
        starts.push(SplitAction { splits }.to_flat());
    }
    starts.truncate(budget.restarts.max(1));
    starts
}

/// Cleans accumulated projection error: clamps negatives and renormalizes
/// each tunnel's splits to sum exactly to 1.
fn renormalize(topo: &Topology, flat: &mut [f64]) {
    let mut offset = 0;
    for t in topo.tunnels() {
        let seg = &mut flat[offset..offset + t.paths.len()];
        let mut sum = 0.0;
        for v in seg.iter_mut() {
            *v = v.max(0.0);
            sum += *v;
        }
        if sum > 0.0 {
            for v in seg.iter_mut() {
                *v /= sum;
            }
        } else {
            seg.iter_mut().for_each(|v| *v = 1.0 / t.paths.len() as f64);
        }
        offset += t.paths.len();
    }
}

/// Approximate minimum achievable MLU: projected gradient on a log-sum-exp
/// relaxation of the (convex, piecewise-linear) MLU, annealed to a small
/// temperature. Returns the best point and its exact MLU.
fn min_mlu_search(problem: &NlpProblem, budget: &SolveBudget) -> (Vec<f64>, f64) {
    let topo = problem.topo;
    let spaces: Vec<HalfSpace> = Vec::new(); // simplices only here
    let mut corrections = vec![Vec::new(); topo.num_tunnels()];
    for (i, t) in topo.tunnels().iter().enumerate() {
        corrections[i] = vec![0.0; t.paths.len()];
    }
    let caps: Vec<f64> = topo.links().iter().map(|l| l.capacity).collect();
    let eval_mlu = |flat: &[f64]| {
        let action = SplitAction::from_flat(topo, flat).unwrap();
        mlu(topo, &offered_loads(topo, &problem.demand, &action))
    };
    let smooth_mlu = |flat: &[f64], tau: f64| {
        let action = SplitAction::from_flat(topo, flat).unwrap();
        let loads = offered_loads(topo, &problem.demand, &action);
        let m = loads
            .iter()
            .zip(&caps)
            .map(|(l, c)| l / c)
            .fold(0.0_f64, f64::max);
        let acc: f64 = loads
            .iter()
            .zip(&caps)
            .map(|(l, c)| ((l / c - m) / tau).exp())
            .sum();
        tau * acc.ln() + m
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in multi_start_points(problem, budget).into_iter().take(4) {
        let mut x = start;
        project_feasible(topo, &spaces, &mut x, &mut corrections);
        let mut tau = 0.05;
        while tau > 5e-4 {
            let mut step = 0.1;
            for _ in 0..budget.max_iters {
                let f0 = smooth_mlu(&x, tau);
                let mut grad = vec![0.0; x.len()];
                let mut xs = x.clone();
                for i in 0..x.len() {
                    let h = 1e-6;
                    xs[i] = x[i] + h;
                    let up = smooth_mlu(&xs, tau);
                    xs[i] = x[i] - h;
                    let down = smooth_mlu(&xs, tau);
                    xs[i] = x[i];
                    grad[i] = (up - down) / (2.0 * h);
                }
                let mut improved = false;
                for _ in 0..20 {
                    let mut cand: Vec<f64> =
                        x.iter().zip(&grad).map(|(v, g)| v - step * g).collect();
                    project_feasible(topo, &spaces, &mut cand, &mut corrections);
                    if smooth_mlu(&cand, tau) < f0 - 1e-12 {
                        let movement = cand
                            .iter()
                            .zip(&x)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0_f64, f64::max);
                        x = cand;
                        improved = true;
                        if movement < 1e-7 {
                            improved = false;
                        }
                        break;
                    }
                    step *= 0.5;
                }
                if !improved {
                    break;
                }
            }
            tau *= 0.2;
        }
        let value = eval_mlu(&x);
        if best.as_ref().map_or(true, |(_, b)| value < *b) {
            best = Some((x, value));
        }
    }
    best.unwrap()
}

/// Multi-start projected descent on the annealed smooth objective.
pub fn solve(problem: &NlpProblem, budget: &SolveBudget) -> Result<NlpSolution> {
    if problem.demand.len() != problem.topo.num_tunnels() {
        return Err(Error::ShapeMismatch(format!(
            "{} demands for {} tunnels",
            problem.demand.len(),
            problem.topo.num_tunnels()
        )));
    }
    let topo = problem.topo;
    let spaces = capacity_halfspaces(problem);
    let num_sets = topo.num_tunnels() + spaces.len();
    let mut corrections: Vec<Vec<f64>> = Vec::with_capacity(num_sets);
    for t in topo.tunnels() {
        corrections.push(vec![0.0; t.paths.len()]);
    }
    for hs in &spaces {
        corrections.push(vec![0.0; hs.terms.len()]);
    }
    let mut scratch = Scratch::new(topo);

    // Feasibility gate: C0 + C1 admit a point iff the minimum achievable MLU
    // is within the bound.
    let (min_mlu_point, min_mlu_value) = min_mlu_search(problem, budget);
    if min_mlu_value > problem.mlu_target + 1e-9 {
        let mut flat = min_mlu_point;
        renormalize(topo, &mut flat);
        let action = SplitAction::from_flat(topo, &flat)?;
        let loads = offered_loads(topo, &problem.demand, &action);
        let worst = topo
            .links()
            .iter()
            .zip(&loads)
            .max_by(|a, b| (a.1 / a.0.capacity).total_cmp(&(b.1 / b.0.capacity)))
            .map(|(l, _)| l.id.clone());
        return Ok(NlpSolution {
            objective: problem.true_objective(&action),
            action,
            feasible: false,
            iterations: 0,
            converged: true,
            violating_link: worst,
        });
    }

    let taus = [
        1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125,
    ];
    let mut best: Option<(SplitAction, f64, f64)> = None; // (action, objective, mlu)
    let mut iterations = 0u64;
    let mut converged = true;

    for start in multi_start_points(problem, budget) {
        let mut x = start;
        project_feasible(topo, &spaces, &mut x, &mut corrections);
        let mut grad = vec![0.0; x.len()];
        for &tau in &taus {
            let mut step = 0.05;
            let mut moved = true;
            let mut iters_this_round = 0;
            while moved && iters_this_round < budget.max_iters {
                iters_this_round += 1;
                iterations += 1;
                let f0 = problem.smooth_objective(&x, tau, &mut scratch);
                central_gradient(problem, &x, tau, &mut scratch, &mut grad);
                moved = false;
                for _ in 0..25 {
                    let mut cand: Vec<f64> =
                        x.iter().zip(&grad).map(|(v, g)| v - step * g).collect();
                    project_feasible(topo, &spaces, &mut cand, &mut corrections);
                    let f1 = problem.smooth_objective(&cand, tau, &mut scratch);
                    if f1 < f0 - 1e-12 {
                        let movement = cand
                            .iter()
                            .zip(&x)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0_f64, f64::max);
                        x = cand;
                        moved = movement >= 1e-6;
                        step *= 1.5;
                        break;
                    }
                    step *= 0.5;
                }
            }
            if iters_this_round == budget.max_iters {
                converged = false;
            }
        }
        renormalize(topo, &mut x);
        let action = SplitAction::from_flat(topo, &x)?;
        let action_mlu = problem.offered_mlu(&action);
        if action_mlu <= problem.mlu_target + 1e-9 {
            let objective = problem.true_objective(&action);
            if best.as_ref().map_or(true, |(_, b, _)| objective < *b) {
                best = Some((action, objective, action_mlu));
            }
        }
    }

    // Descent starts are pre-projected into the feasible region, so at least
    // one start ends feasible once the gate above passes.
    let (action, objective, _) = best.ok_or_else(|| {
        Error::Solver("no feasible iterate survived projected descent".into())
    })?;
    Ok(NlpSolution {
        action,
        objective,
        feasible: true,
        iterations,
        converged,
        violating_link: None,
    })
}

/// Exhaustive evaluation of the true objective on a simplex grid restricted
/// to C0-feasible points. Grid resolution is `grid_step` (for example 0.01).
pub fn brute_force(problem: &NlpProblem, grid_step: f64) -> Result<NlpSolution> {
    let topo = problem.topo;
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::Solver(format!("bad grid step {grid_step}")));
    }
    let m = (1.0 / grid_step).round() as usize;

    // Per-tunnel compositions of m into |P_k| nonnegative parts.
    fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
        if parts == 1 {
            return vec![vec![total]];
        }
        let mut out = Vec::new();
        for first in 0..=total {
            for mut rest in compositions(total - first, parts - 1) {
                let mut v = vec![first];
                v.append(&mut rest);
                out.push(v);
            }
        }
        out
    }

    let per_tunnel: Vec<Vec<Vec<f64>>> = topo
        .tunnels()
        .iter()
        .map(|t| {
            compositions(m, t.paths.len())
                .into_iter()
                .map(|c| c.iter().map(|&v| v as f64 / m as f64).collect())
                .collect()
        })
        .collect();
    let total_points: f64 = per_tunnel.iter().map(|c| c.len() as f64).product();
    if total_points > 1e7 {
        return Err(Error::Solver(format!(
            "grid of {total_points:.3e} points exceeds the 1e7 limit"
        )));
    }

    let mut indices = vec![0usize; per_tunnel.len()];
    let mut best: Option<(SplitAction, f64)> = None;
    let mut least_violating: Option<(SplitAction, f64)> = None;
    let mut evaluated = 0u64;
    loop {
        let splits: Vec<Vec<f64>> = indices
            .iter()
            .zip(&per_tunnel)
            .map(|(&i, options)| options[i].clone())
            .collect();
        let action = SplitAction { splits };
        let action_mlu = problem.offered_mlu(&action);
        evaluated += 1;
        if action_mlu <= problem.mlu_target + 1e-12 {
            let objective = problem.true_objective(&action);
            if best.as_ref().map_or(true, |(_, b)| objective < *b) {
                best = Some((action, objective));
            }
        } else if least_violating
            .as_ref()
            .map_or(true, |(_, b)| action_mlu < *b)
        {
            least_violating = Some((action, action_mlu));
        }

        // odometer increment
        let mut axis = 0;
        loop {
            if axis == indices.len() {
                break;
            }
            indices[axis] += 1;
            if indices[axis] < per_tunnel[axis].len() {
                break;
            }
            indices[axis] = 0;
            axis += 1;
        }
        if axis == indices.len() {
            break;
        }
    }

    match best {
        Some((action, objective)) => Ok(NlpSolution {
            action,
            objective,
            feasible: true,
            iterations: evaluated,
            converged: true,
            violating_link: None,
        }),
        None => {
            let (action, _) = least_violating.expect("grid has at least one point");
            let loads = offered_loads(topo, &problem.demand, &action);
            let worst = topo
                .links()
                .iter()
                .zip(&loads)
                .max_by(|a, b| (a.1 / a.0.capacity).total_cmp(&(b.1 / b.0.capacity)))
                .map(|(l, _)| l.id.clone());
            Ok(NlpSolution {
                objective: problem.true_objective(&action),
                action,
                feasible: false,
                iterations: evaluated,
                converged: true,
                violating_link: worst,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Link, PathDef, Tunnel};

    fn two_path(caps: [f64; 2], props: [f64; 2]) -> Topology {
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

    #[test]
    fn limit_case_prefers_fast_path() {
        // demand -> 0: optimum plants (almost) all mass on the 1.67 ms path
        let topo = two_path([20.0, 10.0], [9.0, 1.67]);
        let problem = NlpProblem::new(&topo, vec![1e-6]);
        let sol = solve(&problem, &SolveBudget::default()).unwrap();
        assert!(sol.feasible);
        assert!(
            sol.action.splits[0][1] >= 0.99,
            "fast-path mass {:?}",
            sol.action.splits[0]
        );
        let floor = 1.67 + 1.0 / 10.0;
        assert!((sol.objective - floor).abs() < 1e-3, "objective {}", sol.objective);
    }

    #[test]
    fn symmetric_instance_splits_evenly() {
        let topo = two_path([10.0, 10.0], [1.0, 1.0]);
        let problem = NlpProblem::new(&topo, vec![8.0]);
        let sol = solve(&problem, &SolveBudget::default()).unwrap();
        assert!(sol.feasible);
        assert!(
            (sol.action.splits[0][0] - 0.5).abs() < 1e-3,
            "split {:?}",
            sol.action.splits[0]
        );
    }

    #[test]
    fn solve_matches_grid_oracle() {
        let topo = two_path([10.0, 20.0], [1.67, 9.0]);
        let problem = NlpProblem::new(&topo, vec![8.0]);
        let sol = solve(&problem, &SolveBudget::default()).unwrap();
        let oracle = brute_force(&problem, 0.01).unwrap();
        assert!(sol.feasible && oracle.feasible);
        let gap = (sol.objective - oracle.objective) / oracle.objective.abs();
        assert!(gap <= 1e-3, "solver {} oracle {}", sol.objective, oracle.objective);
    }

    #[test]
    fn both_routes_agree_on_infeasibility() {
        let topo = two_path([5.0, 20.0], [1.0, 2.0]);
        let problem = NlpProblem::new(&topo, vec![100.0]);
        let sol = solve(&problem, &SolveBudget::default()).unwrap();
        let oracle = brute_force(&problem, 0.05).unwrap();
        assert!(!sol.feasible);
        assert!(!oracle.feasible);
        assert!(sol.violating_link.is_some());
    }

    #[test]
    fn zero_demand_grid_uses_load_free_delays() {
        let topo = two_path([10.0, 20.0], [1.67, 9.0]);
        let problem = NlpProblem::new(&topo, vec![0.0]);
        let oracle = brute_force(&problem, 0.1).unwrap();
        assert!(oracle.feasible);
        // cheapest vertex: all mass on path 0 (1.67 prop + 1/10 queueing)
        assert!((oracle.objective - (1.67 + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn grid_size_guard() {
        let topo = crate::topology::build_abilene(crate::topology::AbileneProfile::default());
        let problem = NlpProblem::new(&topo, vec![1.0; 6]);
        // 1001^6 compositions is far beyond the cap
        assert!(brute_force(&problem, 0.001).is_err());
    }

    #[test]
    fn exhausted_budget_reports_nonconverged() {
        let topo = two_path([10.0, 20.0], [1.67, 9.0]);
        let problem = NlpProblem::new(&topo, vec![8.0]);
        let sol = solve(
            &problem,
            &SolveBudget {
                restarts: 2,
                max_iters: 1,
                seed: 0,
            },
        )
        .unwrap();
        // one descent iteration per round cannot reach the movement tolerance
        assert!(!sol.converged);
        assert!(sol.iterations > 0);
    }

    #[test]
    fn feasible_solutions_respect_constraints() {
        let topo = two_path([10.0, 20.0], [1.0, 2.0]);
        for demand in [1.0, 5.0, 12.0, 25.0] {
            let problem = NlpProblem::new(&topo, vec![demand]);
            let sol = solve(&problem, &SolveBudget::default()).unwrap();
            if sol.feasible {
                assert!(problem.offered_mlu(&sol.action) <= problem.mlu_target + 1e-9);
                sol.action.validate(&topo).unwrap();
            }
        }
    }
}

//! Frozen-trace evaluation and policy comparison.
//!
//! Every compared policy sees the same demand samples through a fresh
//! environment evaluation, so rows are directly comparable and runs are
//! reproducible.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{baseline_action, BaselineKind};
use crate::error::{Error, Result};
use crate::flow_env::{evaluate_action, EnvParams, SplitAction, StepReport};
use crate::optimizer::{solve, NlpProblem, SolveBudget};
use crate::rl::checkpoint::Checkpoint;
use crate::rl::train::LoadedPolicy;
use crate::safety::{project, CbfConfig};
use crate::topology::Topology;
use crate::traffic::TrafficSample;

/// A policy under evaluation.
pub enum EvalPolicy {
    Baseline {
        name: String,
        kind: BaselineKind,
        rng: ChaCha8Rng,
    },
    Learned {
        name: String,
        policy: LoadedPolicy,
        shield: Option<CbfConfig>,
    },
    /// Per-sample delay-optimal solve; results are cached per trace.
    Nlp {
        name: String,
        budget: SolveBudget,
        mlu_target: f64,
        cache_dir: Option<PathBuf>,
    },
}

impl EvalPolicy {
    pub fn baseline(kind: BaselineKind, seed: u64) -> Self {
        EvalPolicy::Baseline {
            name: kind.name(),
            kind,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn learned(name: &str, ckpt: &Checkpoint, topo: &Topology, shield: Option<CbfConfig>) -> Result<Self> {
        Ok(EvalPolicy::Learned {
            name: name.to_string(),
            policy: LoadedPolicy::from_checkpoint(ckpt, topo)?,
            shield,
        })
    }

    pub fn nlp(budget: SolveBudget, mlu_target: f64, cache_dir: Option<PathBuf>) -> Self {
        EvalPolicy::Nlp {
            name: "nlp".into(),
            budget,
            mlu_target,
            cache_dir,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            EvalPolicy::Baseline { name, .. } => name,
            EvalPolicy::Learned { name, .. } => name,
            EvalPolicy::Nlp { name, .. } => name,
        }
    }
}

/// Aggregates over one policy's pass across the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub policy: String,
    pub samples: usize,
    pub mean_delay_ms: f64,
    pub median_delay_ms: f64,
    pub p95_delay_ms: f64,
    pub mean_mlu: f64,
    pub max_mlu: f64,
    pub mean_acceptance: f64,
}

/// Per-sample outputs alongside the summary.
pub struct EvalResult {
    pub summary: EvalSummary,
    pub reports: Vec<StepReport>,
    pub actions: Vec<SplitAction>,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

fn trace_fingerprint(
    topo: &Topology,
    trace: &[TrafficSample],
    budget: &SolveBudget,
    mlu_target: f64,
    params: &EnvParams,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(topo.to_json().expect("topology serializes"));
    hasher.update(serde_json::to_string(trace).expect("trace serializes"));
    hasher.update(serde_json::to_string(budget).expect("budget serializes"));
    hasher.update(mlu_target.to_le_bytes());
    hasher.update(serde_json::to_string(params).expect("params serialize"));
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct NlpCache {
    fingerprint: String,
    actions: Vec<SplitAction>,
    objectives: Vec<f64>,
    feasible: Vec<bool>,
}

/// Per-sample NLP actions with on-disk caching keyed by the trace content.
/// The solver shares the environment's delay constants so its objective is
/// the environment's delay metric.
pub fn nlp_actions_for_trace(
    topo: &Topology,
    trace: &[TrafficSample],
    budget: &SolveBudget,
    mlu_target: f64,
    params: &EnvParams,
    cache_dir: Option<&Path>,
) -> Result<Vec<SplitAction>> {
    let fingerprint = trace_fingerprint(topo, trace, budget, mlu_target, params);
    let cache_path = cache_dir.map(|d| d.join(format!("nlp-{}.json", &fingerprint[..16])));
    if let Some(path) = &cache_path {
        if path.exists() {
            let cached: NlpCache = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            if cached.fingerprint == fingerprint && cached.actions.len() == trace.len() {
                return Ok(cached.actions);
            }
        }
    }
    let mut actions = Vec::with_capacity(trace.len());
    let mut objectives = Vec::with_capacity(trace.len());
    let mut feasible = Vec::with_capacity(trace.len());
    for sample in trace {
        let problem = NlpProblem {
            mlu_target,
            kappa: params.kappa,
            rho_max: params.rho_max,
            tau_active: params.tau_active,
            ..NlpProblem::new(topo, sample.demand.clone())
        };
        let sol = solve(&problem, budget)?;
        objectives.push(sol.objective);
        feasible.push(sol.feasible);
        actions.push(sol.action);
    }
    if let Some(path) = &cache_path {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let cache = NlpCache {
            fingerprint,
            actions: actions.clone(),
            objectives,
            feasible,
        };
        std::fs::write(path, serde_json::to_string(&cache)?)?;
    }
    Ok(actions)
}

/// Evaluates one policy over a frozen trace.
pub fn eval_policy(
    topo: &Topology,
    params: &EnvParams,
    trace: &[TrafficSample],
    policy: &mut EvalPolicy,
) -> Result<EvalResult> {
    if trace.is_empty() {
        return Err(Error::Eval("empty evaluation trace".into()));
    }
    let nlp_actions = match policy {
        EvalPolicy::Nlp {
            budget,
            mlu_target,
            cache_dir,
            ..
        } => Some(nlp_actions_for_trace(
            topo,
            trace,
            budget,
            *mlu_target,
            params,
            cache_dir.as_deref(),
        )?),
        _ => None,
    };

    let mut reports = Vec::with_capacity(trace.len());
    let mut actions = Vec::with_capacity(trace.len());
    for (i, sample) in trace.iter().enumerate() {
        let action = match policy {
            EvalPolicy::Baseline { kind, rng, .. } => {
                baseline_action(kind, topo, &sample.demand, rng)
            }
            EvalPolicy::Learned { policy, shield, .. } => {
                let obs: Vec<f64> = sample.demand.iter().map(|d| d / params.obs_scale).collect();
                let proto = policy.act(topo, &obs)?;
                match shield {
                    None => proto,
                    Some(cfg) => {
                        let outcome = project(
                            topo,
                            &sample.demand,
                            &proto,
                            &CbfConfig {
                                seed: cfg.seed.wrapping_add(i as u64),
                                ..cfg.clone()
                            },
                        );
                        outcome.action
                    }
                }
            }
            EvalPolicy::Nlp { .. } => nlp_actions.as_ref().unwrap()[i].clone(),
        };
        let report = evaluate_action(topo, params, &sample.demand, &action)?;
        reports.push(report);
        actions.push(action);
    }

    let mut delays: Vec<f64> = reports.iter().map(|r| r.mean_tunnel_delay()).collect();
    let mean_delay_ms = delays.iter().sum::<f64>() / delays.len() as f64;
    delays.sort_by(f64::total_cmp);
    let summary = EvalSummary {
        policy: policy.name().to_string(),
        samples: trace.len(),
        mean_delay_ms,
        median_delay_ms: percentile(&delays, 0.5),
        p95_delay_ms: percentile(&delays, 0.95),
        mean_mlu: reports.iter().map(|r| r.mlu).sum::<f64>() / reports.len() as f64,
        max_mlu: reports.iter().map(|r| r.mlu).fold(0.0, f64::max),
        mean_acceptance: reports.iter().map(|r| r.acceptance_rate).sum::<f64>()
            / reports.len() as f64,
    };
    Ok(EvalResult {
        summary,
        reports,
        actions,
    })
}

/// Evaluates every policy on the same frozen trace.
pub fn run_eval(
    topo: &Topology,
    params: &EnvParams,
    trace: &[TrafficSample],
    policies: &mut [EvalPolicy],
) -> Result<Vec<EvalResult>> {
    policies
        .iter_mut()
        .map(|p| eval_policy(topo, params, trace, p))
        .collect()
}

/// Ranks summaries by mean delay (ascending; ties break by name) and renders
/// both a human-readable table and CSV.
pub fn compare(summaries: &[EvalSummary]) -> Result<(String, String)> {
    if summaries.len() < 2 {
        return Err(Error::Eval(format!(
            "comparison needs at least 2 policies, got {}",
            summaries.len()
        )));
    }
    let mut ranked: Vec<&EvalSummary> = summaries.iter().collect();
    ranked.sort_by(|a, b| {
        a.mean_delay_ms
            .total_cmp(&b.mean_delay_ms)
            .then_with(|| a.policy.cmp(&b.policy))
    });

    let mut table = String::new();
    table.push_str(&format!(
        "{:<14} {:>12} {:>12} {:>12} {:>9} {:>9} {:>11}\n",
        "policy", "mean_delay", "median", "p95", "mean_mlu", "max_mlu", "acceptance"
    ));
    for s in &ranked {
        table.push_str(&format!(
            "{:<14} {:>12.4} {:>12.4} {:>12.4} {:>9.4} {:>9.4} {:>11.6}\n",
            s.policy,
            s.mean_delay_ms,
            s.median_delay_ms,
            s.p95_delay_ms,
            s.mean_mlu,
            s.max_mlu,
            s.mean_acceptance
        ));
    }

    let mut csv_text = String::from(
        "policy,samples,mean_delay_ms,median_delay_ms,p95_delay_ms,mean_mlu,max_mlu,mean_acceptance\n",
    );
    for s in &ranked {
        csv_text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            s.policy,
            s.samples,
            s.mean_delay_ms,
            s.median_delay_ms,
            s.p95_delay_ms,
            s.mean_mlu,
            s.max_mlu,
            s.mean_acceptance
        ));
    }
    Ok((table, csv_text))
}

pub fn write_summary_csv(path: &Path, csv_text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(csv_text.as_bytes())?;
    Ok(())
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<EvalSummary>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow_env::EnvConfig;
    use crate::topology::{build_abilene, AbileneProfile};
    use crate::traffic::{TrafficConfig, TrafficGenerator};

    fn trace(len: usize) -> (Topology, Vec<TrafficSample>) {
        let topo = build_abilene(AbileneProfile::default());
        let mut generator = TrafficGenerator::new(TrafficConfig::default(), &topo).unwrap();
        let trace = generator.sample_episode(len);
        (topo, trace)
    }

    #[test]
    fn shared_trace_identical_demand_totals() {
        let (topo, trace) = trace(20);
        let params = EnvConfig::default().resolve(&topo);
        let mut policies = vec![
            EvalPolicy::baseline(BaselineKind::Ecmp, 0),
            EvalPolicy::baseline(BaselineKind::Ucmp, 0),
        ];
        let results = run_eval(&topo, &params, &trace, &mut policies).unwrap();
        assert_eq!(results.len(), 2);
        // both policies faced the same offered demand per sample
        for (a, b) in results[0].reports.iter().zip(&results[1].reports) {
            let off_a: f64 = a.link_state.offered.iter().sum();
            let off_b: f64 = b.link_state.offered.iter().sum();
            assert!((off_a - off_b).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_trace_is_an_error() {
        let (topo, _) = trace(1);
        let params = EnvConfig::default().resolve(&topo);
        let mut p = EvalPolicy::baseline(BaselineKind::Ecmp, 0);
        assert!(eval_policy(&topo, &params, &[], &mut p).is_err());
    }

    #[test]
    fn compare_ranks_and_round_trips() {
        let (topo, trace) = trace(10);
        let params = EnvConfig::default().resolve(&topo);
        let mut policies = vec![
            EvalPolicy::baseline(BaselineKind::Ecmp, 0),
            EvalPolicy::baseline(BaselineKind::Static(1), 0),
            EvalPolicy::baseline(BaselineKind::Ucmp, 0),
        ];
        let results = run_eval(&topo, &params, &trace, &mut policies).unwrap();
        let summaries: Vec<EvalSummary> = results.iter().map(|r| r.summary.clone()).collect();
        let (table, csv_text) = compare(&summaries).unwrap();
        assert!(table.contains("policy"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        write_summary_csv(&path, &csv_text).unwrap();
        let parsed = read_summary_csv(&path).unwrap();
        assert_eq!(parsed.len(), 3);
        // ascending mean delay
        for pair in parsed.windows(2) {
            assert!(pair[0].mean_delay_ms <= pair[1].mean_delay_ms);
        }
    }

    #[test]
    fn identical_policies_tie_stably_by_name() {
        let s = EvalSummary {
            policy: "b".into(),
            samples: 1,
            mean_delay_ms: 2.0,
            median_delay_ms: 2.0,
            p95_delay_ms: 2.0,
            mean_mlu: 0.1,
            max_mlu: 0.1,
            mean_acceptance: 1.0,
        };
        let mut a = s.clone();
        a.policy = "a".into();
        let (_, csv_text) = compare(&[s, a]).unwrap();
        let lines: Vec<&str> = csv_text.lines().collect();
        assert!(lines[1].starts_with("a,"));
        assert!(lines[2].starts_with("b,"));
    }

    #[test]
    fn nlp_cache_hits_on_second_call() {
        let (topo, trace) = trace(2);
        let dir = tempfile::tempdir().unwrap();
        let budget = SolveBudget {
            restarts: 4,
            max_iters: 30,
            seed: 0,
        };
        let params = EnvConfig::default().resolve(&topo);
        let a =
            nlp_actions_for_trace(&topo, &trace, &budget, 0.999, &params, Some(dir.path())).unwrap();
        let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(entries.len(), 1);
        let b =
            nlp_actions_for_trace(&topo, &trace, &budget, 0.999, &params, Some(dir.path())).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x, y);
        }
    }
}

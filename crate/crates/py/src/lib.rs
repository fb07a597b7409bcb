//! Python bindings: the environment, safety shield, baselines, and solver
//! driven in-process from Python.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lbsim_core::baselines::{baseline_action, BaselineKind};
use lbsim_core::flow_env::{self, EnvConfig, SplitAction};
use lbsim_core::optimizer::{brute_force, solve, NlpProblem, SolveBudget};
use lbsim_core::rl::ddpg::DdpgConfig;
use lbsim_core::rl::ppo::PpoConfig;
use lbsim_core::rl::train::{train, Algo, AlgoConfig, Schedule};
use lbsim_core::safety::{is_safe, project, CbfConfig};
use lbsim_core::topology::{build_abilene, AbileneProfile};
use lbsim_core::traffic::{TrafficConfig, TrafficGenerator};

fn to_py_err(e: lbsim_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Immutable network topology.
#[pyclass(name = "Topology", from_py_object)]
#[derive(Clone)]
struct PyTopology {
    inner: Arc<lbsim_core::Topology>,
}

#[pymethods]
impl PyTopology {
    /// The 11-node Abilene fixture with the given green/red capacities.
    #[staticmethod]
    #[pyo3(signature = (c_hi=20.0, c_lo=10.0))]
    fn abilene(c_hi: f64, c_lo: f64) -> Self {
        Self {
            inner: Arc::new(build_abilene(AbileneProfile { c_hi, c_lo })),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(lbsim_core::Topology::from_json(text).map_err(to_py_err)?),
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py_err)
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.nodes().len()
    }

    #[getter]
    fn num_tunnels(&self) -> usize {
        self.inner.num_tunnels()
    }

    #[getter]
    fn num_paths(&self) -> usize {
        self.inner.total_paths()
    }

    #[getter]
    fn tunnel_ids(&self) -> Vec<String> {
        self.inner.tunnels().iter().map(|t| t.id.clone()).collect()
    }

    /// Per-tunnel list of path propagation delays (ms).
    fn path_prop_delays(&self) -> Vec<Vec<f64>> {
        self.inner
            .tunnels()
            .iter()
            .enumerate()
            .map(|(k, t)| {
                (0..t.paths.len())
                    .map(|p| self.inner.path_prop_delay(k, p).unwrap())
                    .collect()
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Topology(nodes={}, tunnels={}, paths={})",
            self.inner.nodes().len(),
            self.inner.num_tunnels(),
            self.inner.total_paths()
        )
    }
}

fn split_action(topo: &lbsim_core::Topology, splits: Vec<Vec<f64>>) -> PyResult<SplitAction> {
    let action = SplitAction { splits };
    action.validate(topo).map_err(to_py_err)?;
    Ok(action)
}

fn report_to_dict(py: Python<'_>, report: &flow_env::StepReport) -> PyResult<Py<PyDict>> {
    let d = PyDict::new(py);
    d.set_item("tunnel_delays", report.tunnel_delays.clone())?;
    d.set_item("path_delays", report.path_delays.clone())?;
    d.set_item("mean_delay_ms", report.mean_tunnel_delay())?;
    d.set_item("mlu", report.mlu)?;
    d.set_item("acceptance_rate", report.acceptance_rate)?;
    d.set_item("reward", report.reward)?;
    d.set_item("offered_loads", report.link_state.offered.clone())?;
    d.set_item("admitted_loads", report.link_state.admitted.clone())?;
    Ok(d.into())
}

/// Stateful M/M/1 flow environment over noisy sinusoidal traffic.
#[pyclass(name = "FlowEnv")]
struct PyFlowEnv {
    env: flow_env::FlowEnv,
}

#[pymethods]
impl PyFlowEnv {
    #[new]
    #[pyo3(signature = (topology, seed=0, base=6.0, amplitude=4.0, period=64, noise_std=0.5, sigma=0.8, kappa=1.0, rho_max=0.999))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        topology: PyTopology,
        seed: u64,
        base: f64,
        amplitude: f64,
        period: u64,
        noise_std: f64,
        sigma: f64,
        kappa: f64,
        rho_max: f64,
    ) -> PyResult<Self> {
        let traffic = TrafficConfig {
            base,
            amplitude,
            period,
            noise_std,
            seed,
            ..TrafficConfig::default()
        };
        let cfg = EnvConfig {
            sigma,
            kappa,
            rho_max,
            ..EnvConfig::default()
        };
        let generator =
            TrafficGenerator::new(traffic, &topology.inner).map_err(to_py_err)?;
        Ok(Self {
            env: flow_env::FlowEnv::new(topology.inner.clone(), &cfg, generator),
        })
    }

    /// Current demand vector (Mbps), one entry per tunnel.
    fn demand(&self) -> Vec<f64> {
        self.env.current_demand().demand.clone()
    }

    /// Current demand normalized by the observation scale.
    fn observation(&self) -> Vec<f64> {
        self.env.observation()
    }

    /// Applies per-tunnel splits to the current demand and advances the
    /// traffic clock. Returns a dict of step metrics plus the next
    /// observation under key "next_observation".
    fn step(&mut self, py: Python<'_>, splits: Vec<Vec<f64>>) -> PyResult<Py<PyDict>> {
        let action = split_action(self.env.topology(), splits)?;
        let out = self.env.step(&action).map_err(to_py_err)?;
        let d = report_to_dict(py, &out.report)?;
        d.bind(py).set_item("next_observation", out.next_observation)?;
        Ok(d)
    }
}

/// CBF local-search shield.
#[pyclass(name = "CbfShield")]
struct PyCbfShield {
    cfg: CbfConfig,
}

#[pymethods]
impl PyCbfShield {
    #[new]
    #[pyo3(signature = (radius=0.3, solutions_per_iter=450, max_iter=20, eta=1.0, seed=0))]
    fn new(radius: f64, solutions_per_iter: usize, max_iter: usize, eta: f64, seed: u64) -> Self {
        Self {
            cfg: CbfConfig {
                radius,
                solutions_per_iter,
                max_iter,
                eta,
                seed,
            },
        }
    }

    /// Offered-MLU feasibility check.
    fn is_safe(&self, topology: PyTopology, demand: Vec<f64>, splits: Vec<Vec<f64>>) -> PyResult<bool> {
        let action = split_action(&topology.inner, splits)?;
        Ok(is_safe(&topology.inner, &demand, &action, self.cfg.eta))
    }

    /// Projects a proto-action toward the feasible set. Returns a dict with
    /// the projected splits and the projection diagnostics.
    #[pyo3(signature = (topology, demand, splits, seed=None))]
    fn project(
        &self,
        py: Python<'_>,
        topology: PyTopology,
        demand: Vec<f64>,
        splits: Vec<Vec<f64>>,
        seed: Option<u64>,
    ) -> PyResult<Py<PyDict>> {
        let action = split_action(&topology.inner, splits)?;
        let cfg = CbfConfig {
            seed: seed.unwrap_or(self.cfg.seed),
            ..self.cfg.clone()
        };
        let outcome = project(&topology.inner, &demand, &action, &cfg);
        let d = PyDict::new(py);
        d.set_item("splits", outcome.action.splits.clone())?;
        d.set_item("was_modified", outcome.was_modified)?;
        d.set_item("feasible_found", outcome.feasible_found)?;
        d.set_item("mlu_before", outcome.mlu_before)?;
        d.set_item("mlu_after", outcome.mlu_after)?;
        d.set_item("l1_distance", outcome.l1_distance)?;
        Ok(d.into())
    }
}

/// Split of a classical baseline: "ecmp", "ucmp", "random", or "static:<p>".
#[pyfunction]
#[pyo3(signature = (policy, topology, demand, seed=0))]
fn baseline_split(
    policy: &str,
    topology: PyTopology,
    demand: Vec<f64>,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let kind = match policy {
        "ecmp" => BaselineKind::Ecmp,
        "ucmp" => BaselineKind::Ucmp,
        "random" => BaselineKind::Random,
        "static" => BaselineKind::Static(1),
        other => match other.strip_prefix("static:") {
            Some(idx) => BaselineKind::Static(
                idx.parse()
                    .map_err(|e| PyValueError::new_err(format!("bad path index: {e}")))?,
            ),
            None => return Err(PyValueError::new_err(format!("unknown policy `{other}`"))),
        },
    };
    kind.validate(&topology.inner).map_err(to_py_err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(baseline_action(&kind, &topology.inner, &demand, &mut rng).splits)
}

/// Minimizes the average tunnel delay for one demand vector under the MLU
/// bound. Returns (splits, objective_ms, feasible).
#[pyfunction]
#[pyo3(signature = (topology, demand, mlu_target=0.999, restarts=16, seed=0))]
fn solve_nlp(
    topology: PyTopology,
    demand: Vec<f64>,
    mlu_target: f64,
    restarts: usize,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, f64, bool)> {
    let problem = NlpProblem {
        mlu_target,
        ..NlpProblem::new(&topology.inner, demand)
    };
    let budget = SolveBudget {
        restarts,
        seed,
        ..SolveBudget::default()
    };
    let sol = solve(&problem, &budget).map_err(to_py_err)?;
    Ok((sol.action.splits, sol.objective, sol.feasible))
}

/// Grid-search oracle for `solve_nlp` on small instances.
#[pyfunction]
#[pyo3(signature = (topology, demand, grid_step=0.01, mlu_target=0.999))]
fn brute_force_nlp(
    topology: PyTopology,
    demand: Vec<f64>,
    grid_step: f64,
    mlu_target: f64,
) -> PyResult<(Vec<Vec<f64>>, f64, bool)> {
    let problem = NlpProblem {
        mlu_target,
        ..NlpProblem::new(&topology.inner, demand)
    };
    let sol = brute_force(&problem, grid_step).map_err(to_py_err)?;
    Ok((sol.action.splits, sol.objective, sol.feasible))
}

/// Max-min fair admission. `subflows` is a list of (link_indices, demand).
#[pyfunction]
#[pyo3(signature = (link_capacities, subflows, cap_frac=1.0))]
fn water_fill(
    link_capacities: Vec<f64>,
    subflows: Vec<(Vec<usize>, f64)>,
    cap_frac: f64,
) -> Vec<f64> {
    let subflows: Vec<flow_env::Subflow> = subflows
        .into_iter()
        .map(|(links, demand)| flow_env::Subflow { links, demand })
        .collect();
    flow_env::water_fill(&link_capacities, &subflows, cap_frac)
}

/// Short training run; returns (episode_mean_rewards, min_acceptance_rate)
/// and writes a checkpoint when `checkpoint_path` is given.
#[pyfunction]
#[pyo3(signature = (topology, algo="ppo", episodes=10, width=64, seed=0, cbf=true, lr=3e-4, checkpoint_path=None))]
#[allow(clippy::too_many_arguments)]
fn train_policy(
    py: Python<'_>,
    topology: PyTopology,
    algo: &str,
    episodes: u64,
    width: usize,
    seed: u64,
    cbf: bool,
    lr: f64,
    checkpoint_path: Option<String>,
) -> PyResult<(Vec<f64>, f64)> {
    let algo_cfg = match algo {
        "ppo" => AlgoConfig::Ppo(PpoConfig {
            hidden: vec![width; 3],
            lr,
            ..PpoConfig::default()
        }),
        "ddpg" => AlgoConfig::Ddpg(DdpgConfig {
            hidden: vec![width; 3],
            lr,
            warmup: 128,
            ..DdpgConfig::default()
        }),
        other => return Err(PyValueError::new_err(format!("unknown algo `{other}`"))),
    };
    debug_assert_eq!(algo_cfg.algo(), if algo == "ppo" { Algo::Ppo } else { Algo::Ddpg });
    let schedule = Schedule {
        episodes,
        seed,
        ..Schedule::default()
    };
    let shield = cbf.then(CbfConfig::default);
    let traffic = TrafficConfig {
        seed,
        ..TrafficConfig::default()
    };
    let out = py
        .detach(|| {
            train(
                &topology.inner,
                &EnvConfig::default(),
                &traffic,
                &algo_cfg,
                shield.as_ref(),
                &schedule,
                None,
                None,
            )
        })
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    if let Some(path) = checkpoint_path {
        out.checkpoint
            .save(std::path::Path::new(&path))
            .map_err(to_py_err)?;
    }
    Ok((out.episode_rewards, out.min_acceptance))
}

#[pymodule]
fn lbsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyTopology>()?;
    m.add_class::<PyFlowEnv>()?;
    m.add_class::<PyCbfShield>()?;
    m.add_function(wrap_pyfunction!(baseline_split, m)?)?;
    m.add_function(wrap_pyfunction!(solve_nlp, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_nlp, m)?)?;
    m.add_function(wrap_pyfunction!(water_fill, m)?)?;
    m.add_function(wrap_pyfunction!(train_policy, m)?)?;
    Ok(())
}

//! Flow-level network load-balancing laboratory.
//!
//! The crate models an SDN-style traffic-engineering problem: demand for a set
//! of origin-destination tunnels is split over candidate paths, links behave as
//! M/M/1 queues, and congestion is resolved by max-min fair admission. On top
//! of the environment sit a local-search safety shield that keeps the maximum
//! link utilization feasible, from-scratch PPO/DDPG learners, classical
//! splitting baselines, and a nonlinear benchmark solver with a brute-force
//! oracle. The `harness` module ties everything into reproducible experiments.

pub mod baselines;
pub mod error;
pub mod flow_env;
pub mod harness;
pub mod optimizer;
pub mod rl;
pub mod safety;
pub mod topology;
pub mod traffic;

pub use error::{Error, Result};
pub use flow_env::{EnvConfig, FlowEnv, SplitAction, StepReport};
pub use safety::{CbfConfig, ProjectionOutcome};
pub use topology::Topology;
pub use traffic::{TrafficConfig, TrafficGenerator, TrafficSample};

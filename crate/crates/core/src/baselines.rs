//! Non-learning split policies used for benchmarking: STATIC, RANDOM, ECMP,
//! UCMP. All outputs satisfy the per-tunnel simplex invariants.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow_env::SplitAction;
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineKind {
    /// All traffic on one designated path index (no load balancing).
    Static(usize),
    /// Per-tunnel Dirichlet(1,..,1) draw: expectation-uniform, modeling
    /// random per-microflow path picks at flow granularity.
    Random,
    /// Uniform split over the available paths.
    Ecmp,
    /// Split proportional to each path's bottleneck capacity.
    Ucmp,
}

impl BaselineKind {
    pub fn name(&self) -> String {
        match self {
            BaselineKind::Static(p) => format!("static{p}"),
            BaselineKind::Random => "random".into(),
            BaselineKind::Ecmp => "ecmp".into(),
            BaselineKind::Ucmp => "ucmp".into(),
        }
    }

    /// Checks a Static path index against every tunnel.
    pub fn validate(&self, topo: &Topology) -> Result<()> {
        if let BaselineKind::Static(p) = self {
            for t in topo.tunnels() {
                if *p >= t.paths.len() {
                    return Err(Error::UnknownPath {
                        tunnel: t.id.clone(),
                        path: *p,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Produces the baseline's split for one demand sample. `demand` is unused by
/// the closed-form policies but part of the common policy interface.
pub fn baseline_action<R: Rng>(
    kind: &BaselineKind,
    topo: &Topology,
    _demand: &[f64],
    rng: &mut R,
) -> SplitAction {
    let splits = topo
        .tunnels()
        .iter()
        .enumerate()
        .map(|(k, tunnel)| {
            let n = tunnel.paths.len();
            match kind {
                BaselineKind::Static(p) => {
                    let mut x = vec![0.0; n];
                    x[*p] = 1.0;
                    x
                }
                BaselineKind::Ecmp => vec![1.0 / n as f64; n],
                BaselineKind::Ucmp => {
                    let weights: Vec<f64> = (0..n)
                        .map(|p| topo.path_bottleneck_capacity(k, p).unwrap())
                        .collect();
                    let total: f64 = weights.iter().sum();
                    weights.iter().map(|w| w / total).collect()
                }
                BaselineKind::Random => {
                    // Dirichlet(1,..,1) via normalized unit exponentials
                    let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
                    let total: f64 = draws.iter().sum();
                    draws.iter().map(|d| d / total).collect()
                }
            }
        })
        .collect();
    SplitAction { splits }
}

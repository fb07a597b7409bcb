//! Property tests for the spec-level invariants that hold for arbitrary
//! inputs, not just the worked examples.

use proptest::prelude::*;

use lbsim_core::baselines::{baseline_action, BaselineKind};
use lbsim_core::flow_env::{mlu, offered_loads, water_fill, SplitAction, Subflow};
use lbsim_core::rl::{softmax_per_tunnel, tunnel_spans};
use lbsim_core::safety::{is_safe, project, CbfConfig};
use lbsim_core::topology::{build_abilene, AbileneProfile, Topology};
use lbsim_core::traffic::TrafficConfig;

fn abilene() -> Topology {
    build_abilene(AbileneProfile::default())
}

fn simplex_action(greens: &[f64]) -> SplitAction {
    SplitAction {
        splits: greens.iter().map(|&g| vec![g, 1.0 - g]).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn traffic_deterministic_and_nonnegative(
        seed in any::<u64>(),
        base in 0.5f64..20.0,
        amp_frac in 0.0f64..1.0,
        noise in 0.0f64..4.0,
        tunnel in 0usize..6,
        t in 0u64..10_000,
    ) {
        let cfg = TrafficConfig {
            base,
            amplitude: base * amp_frac,
            noise_std: noise,
            seed,
            ..TrafficConfig::default()
        };
        let a = cfg.demand_at(tunnel, t).unwrap();
        let b = cfg.demand_at(tunnel, t).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn noiseless_traffic_is_periodic(
        base in 1.0f64..10.0,
        amp_frac in 0.0f64..1.0,
        period in 2u64..200,
        t in 0u64..1000,
    ) {
        let cfg = TrafficConfig {
            base,
            amplitude: base * amp_frac,
            period,
            noise_std: 0.0,
            ..TrafficConfig::default()
        };
        let a = cfg.demand_at(2, t).unwrap();
        let b = cfg.demand_at(2, t + period).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn offered_loads_scale_with_demand(
        greens in proptest::collection::vec(0.0f64..=1.0, 6),
        demands in proptest::collection::vec(0.0f64..15.0, 6),
        alpha in 0.0f64..4.0,
    ) {
        let topo = abilene();
        let action = simplex_action(&greens);
        let base = offered_loads(&topo, &demands, &action);
        let scaled_demand: Vec<f64> = demands.iter().map(|d| alpha * d).collect();
        let scaled = offered_loads(&topo, &scaled_demand, &action);
        for (b, s) in base.iter().zip(&scaled) {
            prop_assert!((alpha * b - s).abs() <= 1e-9 * (1.0 + s.abs()));
        }
        // mlu scales identically
        prop_assert!((alpha * mlu(&topo, &base) - mlu(&topo, &scaled)).abs() <= 1e-9);
    }

    #[test]
    fn water_fill_respects_caps_and_demands(
        caps in proptest::collection::vec(0.5f64..10.0, 1..4),
        flows in proptest::collection::vec(
            (proptest::collection::vec(0usize..4, 1..4), 0.0f64..8.0),
            1..6,
        ),
    ) {
        let subflows: Vec<Subflow> = flows
            .iter()
            .map(|(links, demand)| Subflow {
                links: links
                    .iter()
                    .map(|l| l % caps.len())
                    .collect::<std::collections::BTreeSet<_>>()
                    .into_iter()
                    .collect(),
                demand: *demand,
            })
            .collect();
        let admitted = water_fill(&caps, &subflows, 1.0);
        let mut load = vec![0.0; caps.len()];
        for (sf, &rate) in subflows.iter().zip(&admitted) {
            prop_assert!(rate >= 0.0);
            prop_assert!(rate <= sf.demand + 1e-12);
            for &e in &sf.links {
                load[e] += rate;
            }
        }
        for (l, c) in load.iter().zip(&caps) {
            prop_assert!(*l <= c + 1e-9);
        }
    }

    #[test]
    fn baselines_stay_on_simplex(
        kind_idx in 0usize..4,
        demands in proptest::collection::vec(0.0f64..12.0, 6),
        seed in any::<u64>(),
    ) {
        let topo = abilene();
        let kind = [
            BaselineKind::Static(1),
            BaselineKind::Random,
            BaselineKind::Ecmp,
            BaselineKind::Ucmp,
        ][kind_idx];
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let action = baseline_action(&kind, &topo, &demands, &mut rng);
        prop_assert!(action.validate(&topo).is_ok());
    }

    #[test]
    fn softmax_policy_actions_stay_on_simplex(
        logits in proptest::collection::vec(-30.0f64..30.0, 12),
    ) {
        let topo = abilene();
        let spans = tunnel_spans(&topo);
        let flat = softmax_per_tunnel(&spans, &logits);
        let action = SplitAction::from_flat(&topo, &flat).unwrap();
        prop_assert!(action.validate(&topo).is_ok());
    }

    #[test]
    fn projection_closure_and_monotonicity(
        greens in proptest::collection::vec(0.0f64..=1.0, 6),
        demands in proptest::collection::vec(0.0f64..18.0, 6),
        seed in any::<u64>(),
    ) {
        let topo = abilene();
        let proto = simplex_action(&greens);
        let cfg = CbfConfig {
            solutions_per_iter: 60,
            max_iter: 5,
            seed,
            ..CbfConfig::default()
        };
        let outcome = project(&topo, &demands, &proto, &cfg);
        prop_assert!(outcome.action.validate(&topo).is_ok());
        prop_assert!(outcome.mlu_after <= outcome.mlu_before + 1e-12);
        if is_safe(&topo, &demands, &proto, cfg.eta) {
            prop_assert_eq!(outcome.action, proto);
            prop_assert_eq!(outcome.l1_distance, 0.0);
        }
        if outcome.feasible_found {
            prop_assert!(outcome.mlu_after <= cfg.eta + 1e-12);
        }
    }
}

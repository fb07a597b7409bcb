// temporary: seed-robustness probe for the acceptance quality config
use std::sync::Arc;
use lbsim_core::flow_env::EnvConfig;
use lbsim_core::harness::eval::{eval_policy, EvalPolicy};
use lbsim_core::rl::ppo::PpoConfig;
use lbsim_core::rl::train::{train, AlgoConfig, Schedule};
use lbsim_core::safety::CbfConfig;
use lbsim_core::topology::{build_abilene, AbileneProfile};
use lbsim_core::traffic::{TrafficConfig, TrafficGenerator};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args[1].parse().unwrap();
    let init_std: f64 = args[2].parse().unwrap();
    let lr: f64 = args[3].parse().unwrap();
    let minibatch: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(64);

    let topo = Arc::new(build_abilene(AbileneProfile::default()));
    let env = EnvConfig { tau_active: 0.05, ..EnvConfig::default() };
    let cbf = CbfConfig { eta: 0.8, ..CbfConfig::default() };
    let cfg = PpoConfig { hidden: vec![256; 3], lr, init_std, minibatch, ..PpoConfig::default() };
    let traffic = TrafficConfig { seed, ..TrafficConfig::default() };
    let schedule = Schedule { episodes: 300, steps_per_episode: 64, update_period: 128, workers: 1, seed, lr: None };

    let out = train(&topo, &env, &traffic, &AlgoConfig::Ppo(cfg), Some(&cbf), &schedule, None, None).unwrap();

    let mut generator = TrafficGenerator::new(TrafficConfig { seed: 123, ..TrafficConfig::default() }, &topo).unwrap();
    let trace = generator.sample_episode(100);
    let params = env.resolve(&topo);
    let mut policy = EvalPolicy::learned("ppo-cbf", &out.checkpoint, &topo, Some(cbf)).unwrap();
    let result = eval_policy(&topo, &params, &trace, &mut policy).unwrap();
    println!(
        "seed {seed} std {init_std} lr {lr} mb {minibatch}: delay {:.4} ms (ratio vs 4.9558 = {:.4}), min train acc {}",
        result.summary.mean_delay_ms,
        result.summary.mean_delay_ms / 4.9558,
        out.min_acceptance
    );
}

//! `lbsim`: train, evaluate, and benchmark safe load-balancing policies.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lbsim_core::baselines::BaselineKind;
use lbsim_core::harness::config::ExperimentConfig;
use lbsim_core::harness::eval::{
    compare, read_summary_csv, run_eval, write_summary_csv, EvalPolicy, EvalResult, EvalSummary,
};
use lbsim_core::harness::metrics::{read_trace, write_trace, StepLogWriter};
use lbsim_core::harness::run_training_campaign;
use lbsim_core::optimizer::{solve, NlpProblem, SolveBudget};
use lbsim_core::rl::checkpoint::Checkpoint;
use lbsim_core::rl::train::{Algo, StepRecord};
use lbsim_core::traffic::TrafficGenerator;
use lbsim_core::{Error, Result, Topology, TrafficSample};

#[derive(Parser)]
#[command(name = "lbsim", version, about = "Flow-level safe load-balancing laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct CommonConfig {
    /// Experiment config file (TOML or JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override (sets both the schedule and traffic seeds).
    #[arg(long)]
    seed: Option<u64>,
    /// Safety shield switch.
    #[arg(long, value_enum)]
    cbf: Option<Switch>,
    /// Local search radius delta_s.
    #[arg(long)]
    cbf_radius: Option<f64>,
    /// Local search candidates per iteration.
    #[arg(long)]
    cbf_n: Option<usize>,
    /// Local search iteration cap.
    #[arg(long)]
    cbf_m: Option<usize>,
    /// Safety threshold eta on the offered MLU.
    #[arg(long)]
    cbf_eta: Option<f64>,
}

impl CommonConfig {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => serde_json::from_str(r#"{"algo": "ppo", "output_dir": "runs/default"}"#)
                .expect("default config parses"),
        };
        if let Some(seed) = self.seed {
            cfg.schedule.seed = seed;
            cfg.traffic.seed = seed;
        }
        if let Some(switch) = self.cbf {
            cfg.cbf.enabled = switch == Switch::On;
        }
        if let Some(r) = self.cbf_radius {
            cfg.cbf.config.radius = r;
        }
        if let Some(n) = self.cbf_n {
            cfg.cbf.config.solutions_per_iter = n;
        }
        if let Some(m) = self.cbf_m {
            cfg.cbf.config.max_iter = m;
        }
        if let Some(eta) = self.cbf_eta {
            cfg.cbf.config.eta = eta;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a PPO or DDPG policy, optionally behind the CBF shield.
    Train(TrainArgs),
    /// Evaluate policies on a frozen traffic trace.
    Eval(EvalArgs),
    /// Run a single non-learning baseline over the evaluation trace.
    Baseline(BaselineArgs),
    /// Solve the delay-minimization problem for each sample in a trace.
    Solve(SolveArgs),
    /// Rank a previously written summary CSV.
    Compare(CompareArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonConfig,
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory for metrics.csv, checkpoint.json, manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Resume from a checkpoint with the fine-tuning learning rate.
    #[arg(long)]
    fine_tune: Option<PathBuf>,
    /// Learning-rate override.
    #[arg(long)]
    lr: Option<f64>,
    /// Hidden layer width override (all hidden layers).
    #[arg(long)]
    width: Option<usize>,
}

#[derive(Copy, Clone, ValueEnum)]
enum AlgoArg {
    Ppo,
    Ddpg,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonConfig,
    /// Demand trace CSV; generated from the config when omitted.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Policies: ecmp | ucmp | random | static | static:<path> | nlp | ckpt:<file>
    #[arg(long = "policy", required = true)]
    policies: Vec<String>,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    common: CommonConfig,
    /// static | random | ecmp | ucmp (static:<path> selects the path index)
    #[arg(long)]
    policy: String,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonConfig,
    /// Demand samples CSV (same layout as eval traces).
    #[arg(long)]
    samples: PathBuf,
    /// Output CSV of per-sample optimal actions and objectives.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    mlu_target: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    /// Summary CSV produced by `lbsim eval`.
    #[arg(long)]
    summary: PathBuf,
}

fn parse_baseline(spec: &str) -> Result<BaselineKind> {
    match spec {
        "ecmp" => Ok(BaselineKind::Ecmp),
        "ucmp" => Ok(BaselineKind::Ucmp),
        "random" => Ok(BaselineKind::Random),
        // bare `static` pins the low-capacity path, the worst case
        "static" => Ok(BaselineKind::Static(1)),
        other => {
            if let Some(idx) = other.strip_prefix("static:") {
                let path: usize = idx
                    .parse()
                    .map_err(|e| Error::Config(format!("bad static path index `{idx}`: {e}")))?;
                Ok(BaselineKind::Static(path))
            } else {
                Err(Error::Config(format!("unknown baseline `{other}`")))
            }
        }
    }
}

fn load_or_generate_trace(
    cfg: &ExperimentConfig,
    topo: &Topology,
    trace_arg: &Option<PathBuf>,
    out_dir: &std::path::Path,
) -> Result<Vec<TrafficSample>> {
    match trace_arg {
        Some(path) => read_trace(path, topo),
        None => {
            let mut generator = TrafficGenerator::new(cfg.traffic.clone(), topo)?;
            let trace = generator.sample_episode(cfg.eval_trace_len);
            std::fs::create_dir_all(out_dir)?;
            write_trace(&out_dir.join("trace.csv"), topo, &trace)?;
            Ok(trace)
        }
    }
}

fn build_policy(
    spec: &str,
    cfg: &ExperimentConfig,
    topo: &Topology,
    out_dir: &std::path::Path,
) -> Result<EvalPolicy> {
    if let Some(path) = spec.strip_prefix("ckpt:") {
        let ckpt = Checkpoint::load(std::path::Path::new(path))?;
        let shield = cfg.cbf.enabled.then(|| cfg.cbf.config.clone());
        let name = format!("{}{}", ckpt.algo, if shield.is_some() { "-cbf" } else { "" });
        return EvalPolicy::learned(&name, &ckpt, topo, shield);
    }
    if spec == "nlp" {
        return Ok(EvalPolicy::nlp(
            SolveBudget {
                seed: cfg.schedule.seed,
                ..SolveBudget::default()
            },
            0.999,
            Some(out_dir.join("nlp-cache")),
        ));
    }
    let kind = parse_baseline(spec)?;
    kind.validate(topo)?;
    Ok(EvalPolicy::baseline(kind, cfg.schedule.seed))
}

fn write_step_logs(
    out_dir: &std::path::Path,
    topo: &Topology,
    results: &[EvalResult],
) -> Result<()> {
    for result in results {
        let path = out_dir.join(format!("steps-{}.csv", result.summary.policy));
        let mut log = StepLogWriter::create(&path, topo)?;
        for (i, report) in result.reports.iter().enumerate() {
            log.write(&StepRecord {
                episode: 0,
                step: i as u64,
                worker: 0,
                mean_delay_ms: report.mean_tunnel_delay(),
                mlu: report.mlu,
                acceptance_rate: report.acceptance_rate,
                reward: report.reward,
                tunnel_delays: report.tunnel_delays.clone(),
                shield_modified: false,
                shield_feasible: true,
            })?;
        }
        log.finish()?;
    }
    Ok(())
}

fn summary_csv_text(summaries: &[EvalSummary]) -> String {
    let mut text = String::from(
        "policy,samples,mean_delay_ms,median_delay_ms,p95_delay_ms,mean_mlu,max_mlu,mean_acceptance\n",
    );
    for s in summaries {
        text.push_str(&format!(
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
    text
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut cfg = args.common.load()?;
    if let Some(algo) = args.algo {
        cfg.algo = match algo {
            AlgoArg::Ppo => Algo::Ppo,
            AlgoArg::Ddpg => Algo::Ddpg,
        };
    }
    if let Some(episodes) = args.episodes {
        cfg.schedule.episodes = episodes;
    }
    if let Some(workers) = args.workers {
        cfg.schedule.workers = workers;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if let Some(lr) = args.lr {
        cfg.schedule.lr = Some(lr);
    }
    if let Some(width) = args.width {
        cfg.ppo.hidden = vec![width; cfg.ppo.hidden.len()];
        cfg.ddpg.hidden = vec![width; cfg.ddpg.hidden.len()];
    }
    let init = match &args.fine_tune {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            // published fine-tuning rate, unless explicitly overridden
            if cfg.schedule.lr.is_none() {
                cfg.schedule.lr = Some(1e-6);
            }
            Some(ckpt)
        }
        None => None,
    };
    let out = run_training_campaign(&cfg, init.as_ref())?;
    let episodes = out.train.episode_rewards.len();
    let tail = &out.train.episode_rewards[episodes.saturating_sub(10)..];
    let tail_mean = if tail.is_empty() {
        0.0
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    };
    println!(
        "trained {} for {} episodes ({} steps)",
        cfg.policy_name(),
        episodes,
        out.train.total_steps
    );
    println!("mean reward over final 10 episodes: {tail_mean:.4}");
    println!("minimum acceptance rate: {:.6}", out.train.min_acceptance);
    println!("checkpoint: {}", out.checkpoint_path.display());
    println!("metrics:    {}", out.metrics_path.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let cfg = args.common.load()?;
    let topo = cfg.build_topology()?;
    std::fs::create_dir_all(&args.out)?;
    let trace = load_or_generate_trace(&cfg, &topo, &args.trace, &args.out)?;
    let params = cfg.env.resolve(&topo);
    let mut policies = args
        .policies
        .iter()
        .map(|spec| build_policy(spec, &cfg, &topo, &args.out))
        .collect::<Result<Vec<_>>>()?;
    let results = run_eval(&topo, &params, &trace, &mut policies)?;
    write_step_logs(&args.out, &topo, &results)?;
    let summaries: Vec<EvalSummary> = results.iter().map(|r| r.summary.clone()).collect();
    if summaries.len() >= 2 {
        let (table, csv_text) = compare(&summaries)?;
        write_summary_csv(&args.out.join("summary.csv"), &csv_text)?;
        print!("{table}");
    } else {
        let s = &summaries[0];
        println!(
            "{}: mean delay {:.4} ms, mean mlu {:.4}, acceptance {:.6}",
            s.policy, s.mean_delay_ms, s.mean_mlu, s.mean_acceptance
        );
        write_summary_csv(&args.out.join("summary.csv"), &summary_csv_text(&summaries))?;
    }
    Ok(())
}

fn cmd_baseline(args: BaselineArgs) -> Result<()> {
    let cfg = args.common.load()?;
    let topo = cfg.build_topology()?;
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join("baseline"));
    std::fs::create_dir_all(&out_dir)?;
    let trace = load_or_generate_trace(&cfg, &topo, &args.trace, &out_dir)?;
    let params = cfg.env.resolve(&topo);
    let kind = parse_baseline(&args.policy)?;
    kind.validate(&topo)?;
    let mut policies = vec![EvalPolicy::baseline(kind, cfg.schedule.seed)];
    let results = run_eval(&topo, &params, &trace, &mut policies)?;
    write_step_logs(&out_dir, &topo, &results)?;
    let s = &results[0].summary;
    println!(
        "{}: mean delay {:.4} ms (median {:.4}, p95 {:.4}), mean mlu {:.4}, max mlu {:.4}, acceptance {:.6}",
        s.policy,
        s.mean_delay_ms,
        s.median_delay_ms,
        s.p95_delay_ms,
        s.mean_mlu,
        s.max_mlu,
        s.mean_acceptance
    );
    write_summary_csv(
        &out_dir.join("summary.csv"),
        &summary_csv_text(std::slice::from_ref(&results[0].summary)),
    )?;
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let cfg = args.common.load()?;
    let topo = cfg.build_topology()?;
    let trace = read_trace(&args.samples, &topo)?;
    let budget = SolveBudget {
        restarts: args.restarts.unwrap_or(16),
        seed: cfg.schedule.seed,
        ..SolveBudget::default()
    };
    let mut header = String::from("t,objective_ms,feasible");
    for t in topo.tunnels() {
        for p in 0..t.paths.len() {
            header.push_str(&format!(",x_{}:{}", t.id, p));
        }
    }
    let mut lines = vec![header];
    for sample in &trace {
        let problem = NlpProblem {
            mlu_target: args.mlu_target.unwrap_or(0.999),
            ..NlpProblem::new(&topo, sample.demand.clone())
        };
        let sol = solve(&problem, &budget)?;
        let mut line = format!("{},{},{}", sample.t, sol.objective, sol.feasible);
        for x in sol.action.to_flat() {
            line.push_str(&format!(",{x}"));
        }
        lines.push(line);
        println!(
            "t={}: objective {:.4} ms, feasible {}",
            sample.t, sol.objective, sol.feasible
        );
    }
    if let Some(out) = &args.out {
        if let Some(parent) = out.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(out, lines.join("\n") + "\n")?;
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let summaries = read_summary_csv(&args.summary)?;
    let (table, _) = compare(&summaries)?;
    print!("{table}");
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Baseline(args) => cmd_baseline(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Compare(args) => cmd_compare(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

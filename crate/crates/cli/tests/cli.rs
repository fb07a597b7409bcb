//! End-to-end runs of the `lbsim` binary.

use std::path::Path;
use std::process::Command;

fn lbsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lbsim"))
}

fn run(args: &[&str]) -> (bool, String, String) {
    let out = lbsim().args(args).output().expect("binary runs");
    (
        out.status.success(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn train_eval_compare_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let train_dir = dir.path().join("train");
    let (ok, stdout, stderr) = run(&[
        "train",
        "--algo",
        "ppo",
        "--episodes",
        "2",
        "--width",
        "16",
        "--seed",
        "3",
        "--cbf",
        "on",
        "--out",
        train_dir.to_str().unwrap(),
    ]);
    assert!(ok, "train failed: {stderr}");
    assert!(stdout.contains("trained ppo-cbf"), "{stdout}");
    let ckpt = train_dir.join("checkpoint.json");
    assert!(ckpt.exists());
    assert!(train_dir.join("metrics.csv").exists());
    assert!(train_dir.join("manifest.json").exists());

    let header = std::fs::read_to_string(train_dir.join("metrics.csv"))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(
        header,
        "episode,step,policy,mean_delay_ms,mlu,acceptance_rate,reward"
    );

    let eval_dir = dir.path().join("eval");
    let ckpt_arg = format!("ckpt:{}", ckpt.display());
    let (ok, stdout, stderr) = run(&[
        "eval",
        "--out",
        eval_dir.to_str().unwrap(),
        "--seed",
        "3",
        "--policy",
        "ecmp",
        "--policy",
        "ucmp",
        "--policy",
        &ckpt_arg,
    ]);
    assert!(ok, "eval failed: {stderr}");
    assert!(stdout.contains("ucmp"), "{stdout}");
    let summary = eval_dir.join("summary.csv");
    assert!(summary.exists());
    assert!(eval_dir.join("trace.csv").exists());
    assert!(eval_dir.join("steps-ucmp.csv").exists());

    let (ok, stdout, stderr) = run(&["compare", "--summary", summary.to_str().unwrap()]);
    assert!(ok, "compare failed: {stderr}");
    assert!(stdout.contains("mean_delay"), "{stdout}");
}

#[test]
fn baseline_subcommand_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("baseline");
    let (ok, stdout, stderr) = run(&[
        "baseline",
        "--policy",
        "ucmp",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(ok, "baseline failed: {stderr}");
    assert!(stdout.contains("ucmp"), "{stdout}");
    assert!(out.join("summary.csv").exists());
}

#[test]
fn solve_subcommand_reads_trace() {
    let dir = tempfile::tempdir().unwrap();
    // produce a trace via baseline, then solve its first samples
    let out = dir.path().join("b");
    let (ok, _, stderr) = run(&[
        "baseline",
        "--policy",
        "ecmp",
        "--seed",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(ok, "{stderr}");
    let trace = out.join("trace.csv");
    // shorten the trace so the solver runs quickly
    let text = std::fs::read_to_string(&trace).unwrap();
    let short: Vec<&str> = text.lines().take(3).collect();
    let short_path = dir.path().join("short.csv");
    std::fs::write(&short_path, short.join("\n") + "\n").unwrap();

    let solved = dir.path().join("solved.csv");
    let (ok, stdout, stderr) = run(&[
        "solve",
        "--samples",
        short_path.to_str().unwrap(),
        "--out",
        solved.to_str().unwrap(),
    ]);
    assert!(ok, "solve failed: {stderr}");
    assert!(stdout.contains("objective"), "{stdout}");
    let text = std::fs::read_to_string(&solved).unwrap();
    assert!(text.starts_with("t,objective_ms,feasible,x_1-5:0,"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn rejects_unknown_baseline() {
    let (ok, _, stderr) = run(&["baseline", "--policy", "leastloaded"]);
    assert!(!ok);
    assert!(stderr.contains("unknown baseline"), "{stderr}");
}

#[test]
fn fine_tune_uses_reduced_learning_rate() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let (ok, _, stderr) = run(&[
        "train",
        "--algo",
        "ppo",
        "--episodes",
        "2",
        "--width",
        "16",
        "--seed",
        "4",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert!(ok, "{stderr}");
    let b = dir.path().join("b");
    let ckpt = a.join("checkpoint.json");
    let (ok, _, stderr) = run(&[
        "train",
        "--algo",
        "ppo",
        "--episodes",
        "2",
        "--width",
        "16",
        "--seed",
        "4",
        "--fine-tune",
        ckpt.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    assert!(ok, "fine-tune failed: {stderr}");
    let loaded: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(b.join("checkpoint.json")).unwrap()).unwrap();
    assert_eq!(loaded["lr"], serde_json::json!(1e-6));
    assert_eq!(loaded["episode"], serde_json::json!(4));
}

#[test]
fn loads_checked_in_abilene_document() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .unwrap()
        .join("core/data/abilene.json");
    let dir = tempfile::tempdir().unwrap();
    let config = format!(
        r#"{{"topology": {{"kind": "file", "path": {:?}}}, "algo": "ppo", "output_dir": "unused"}}"#,
        fixture.to_str().unwrap()
    );
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, config).unwrap();
    let out = dir.path().join("out");
    let (ok, _, stderr) = run(&[
        "baseline",
        "--policy",
        "ecmp",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(ok, "config-driven baseline failed: {stderr}");
}

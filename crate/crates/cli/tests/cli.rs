use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rollout_cli::{
    cmd_replay, cmd_simulate, load_config, RecordedAllocation, ReplayArgs, SimulateArgs,
};
use rollout_core::allocators::{StrategyKind, StrategySpec};
use rollout_core::config::ExperimentConfig;
use rollout_core::engine::BudgetMode;
use rollout_core::trace::ReplayRecord;

fn bundled_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/imbalanced_benchmark.toml")
}

fn rollout(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rollout"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn bundled_config_is_the_benchmark() {
    let cfg = load_config(&bundled_config()).unwrap();
    assert_eq!(cfg, ExperimentConfig::benchmark());
}

#[test]
fn allocate_prints_comma_line() {
    let ln3 = 3f64.ln().to_string();
    let scores = format!("0,{ln3}");
    let o = rollout(&[
        "allocate",
        "--strategy",
        "rebase",
        "--reward-temperature",
        "1",
        "--budget",
        "4",
        "--scores",
        &scores,
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "1,3\n");
    let o = rollout(&[
        "allocate",
        "--strategy",
        "beam",
        "--beam-width",
        "4",
        "--budget",
        "8",
        "--scores",
        "0.9,0.1,0.5,0.7",
    ]);
    assert_eq!(stdout(&o), "4,0,0,4\n");
    let o = rollout(&[
        "allocate",
        "--strategy",
        "temperature",
        "--budget",
        "3",
        "--scores",
        "0.1,0.2,0.3",
    ]);
    assert_eq!(stdout(&o), "1,1,1\n");
}

#[test]
fn allocate_dora_with_embeddings_file() {
    let dir = tempfile::tempdir().unwrap();
    let emb = dir.path().join("e.json");
    fs::write(&emb, "[[1,0],[1,0],[1,0],[0,1]]").unwrap();
    let o = rollout(&[
        "allocate",
        "--strategy",
        "dora",
        "--reward-temperature",
        "1",
        "--budget",
        "8",
        "--scores",
        "0.5,0.5,0.5,0.5",
        "--embeddings",
        emb.to_str().unwrap(),
    ]);
    assert_eq!(stdout(&o), "2,1,1,4\n");
    let o = rollout(&[
        "allocate",
        "--strategy",
        "dora",
        "--budget",
        "8",
        "--scores",
        "0.5,0.5",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    assert_eq!(
        rollout(&["verify", "--claims", "nope"]).status.code(),
        Some(1)
    );
    assert_eq!(rollout(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        rollout(&[
            "simulate",
            "--config",
            "/no/such/file.toml",
            "--output",
            "/tmp/x"
        ])
        .status
        .code(),
        Some(1)
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "trials = 3\nbogus_key = 1\n").unwrap();
    let out = dir.path().join("out");
    let o = rollout(&[
        "simulate",
        "--config",
        bad.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_prop2_passes_quickly() {
    let start = std::time::Instant::now();
    let o = rollout(&["verify", "--claims", "prop2", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1);
    assert!(out.starts_with("prop2 PASS max_deviation="));
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn minimal_simulation_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = rollout(&[
        "simulate",
        "--config",
        bundled_config().to_str().unwrap(),
        "--output",
        dir.path().to_str().unwrap(),
        "--trials",
        "1",
        "--budget",
        "1",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("strategy,budget,accuracy,ci_low,ci_high,pass_rate,coverage")
    );
    assert_eq!(lines.count(), 5);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["results"]["rows"].as_array().unwrap().len(), 5);
}

#[test]
fn simulate_trace_replays_to_recorded_allocations() {
    let dir = tempfile::tempdir().unwrap();
    let args = SimulateArgs {
        config: bundled_config(),
        output: dir.path().to_path_buf(),
        seed: Some(11),
        trials: Some(3),
        budgets: vec![8, 32],
        strategies: Some(vec![
            StrategyKind::Temperature,
            StrategyKind::Beam,
            StrategyKind::Rebase,
            StrategyKind::Dora,
            StrategyKind::OptimalBayes,
        ]),
    };
    let table = cmd_simulate(&args, &mut std::io::sink()).unwrap();
    let mut compared = 0;
    for row in &table.rows {
        let stem = format!("{}_N{}", row.strategy, row.budget);
        let traces = dir.path().join("traces");
        let mut buf = Vec::new();
        cmd_replay(
            &ReplayArgs {
                trace: traces.join(format!("{stem}.jsonl")),
                specs: vec![StrategySpec::new(row.strategy)],
                budget: row.budget,
                budget_mode: BudgetMode::Remaining,
            },
            &mut buf,
        )
        .unwrap();
        let replayed: Vec<ReplayRecord> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        let recorded: Vec<RecordedAllocation> =
            fs::read_to_string(traces.join(format!("{stem}.allocations.jsonl")))
                .unwrap()
                .lines()
                .map(|l| serde_json::from_str(l).unwrap())
                .collect();
        for rec in &recorded {
            let rep = replayed.iter().find(|r| r.round == rec.round).unwrap();
            assert_eq!(rep.budget, rec.budget, "{stem} round {}", rec.round);
            assert_eq!(rep.candidate_ids, rec.candidate_ids);
            assert_eq!(
                rep.allocations[0].counts, rec.counts,
                "{stem} round {}",
                rec.round
            );
            compared += 1;
        }
    }
    assert!(compared > 10);
}

#[test]
fn replay_errors_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let o = rollout(&[
        "replay",
        "--trace",
        empty.to_str().unwrap(),
        "--strategy",
        "rebase",
        "--budget",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(1));

    let mixed = dir.path().join("mixed.jsonl");
    fs::write(
        &mixed,
        concat!(
            r#"{"round":0,"candidate_id":0,"prm_score":0.5,"embedding":[1.0,0.0],"complete":false}"#, "\n",
            r#"{"round":0,"candidate_id":1,"prm_score":0.5,"embedding":[1.0,0.0,0.0],"complete":false}"#, "\n",
        ),
    )
    .unwrap();
    let o = rollout(&[
        "replay",
        "--trace",
        mixed.to_str().unwrap(),
        "--strategy",
        "rebase",
        "--budget",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(2));

    let grouped = dir.path().join("grouped.jsonl");
    let lines: String = [0, 0, 0, 1]
        .iter()
        .enumerate()
        .map(|(i, d)| {
            format!(r#"{{"round":0,"candidate_id":{i},"prm_score":0.7,"direction_id":{d},"complete":false}}"#) + "\n"
        })
        .collect();
    fs::write(&grouped, lines).unwrap();
    let o = rollout(&[
        "replay",
        "--trace",
        grouped.to_str().unwrap(),
        "--strategy",
        "rebase,beam",
        "--budget",
        "8",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rec: ReplayRecord = serde_json::from_str(stdout(&o).trim()).unwrap();
    let gap = rec.directions.unwrap().kl_gap;
    assert!((gap - 0.143_84).abs() < 1e-5, "{gap}");
}

#[test]
fn identical_invocations_are_byte_identical() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let o = rollout(&[
            "--seed",
            "5",
            "simulate",
            "--config",
            bundled_config().to_str().unwrap(),
            "--output",
            dir.path().to_str().unwrap(),
            "--trials",
            "4",
            "--budget",
            "16",
        ]);
        assert_eq!(o.status.code(), Some(0));
        (
            fs::read(dir.path().join("results.csv")).unwrap(),
            fs::read(dir.path().join("report.json")).unwrap(),
            fs::read(dir.path().join("traces/dora_N16.jsonl")).unwrap(),
            o.stdout,
        )
    };
    assert_eq!(run(), run());
}

#[test]
fn verify_all_claims_at_default_seed() {
    let o = rollout(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    let claims: Vec<&str> = out.lines().map(|l| l.split(' ').next().unwrap()).collect();
    assert_eq!(
        claims,
        ["prop1", "prop2", "theorem1", "greedy_oracle", "beta_mc"]
    );
}

//! End-to-end runs of the `agentcycle` binary: output bytes and exit codes.

use std::path::Path;
use std::process::{Command, Output};

use agentcycle::formal::{random_posg, AnySpec, GenParams};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agentcycle")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn rollouts_are_byte_identical_and_replay_clean() {
    let dir = tempfile::tempdir().unwrap();
    for env in ["tictactoe", "rps", "reverse_game", "pursuit", "cleanup"] {
        let a = dir.path().join(format!("{env}_a.jsonl"));
        let b = dir.path().join(format!("{env}_b.jsonl"));
        for p in [&a, &b] {
            let out = run(&["rollout", env, "--seed", "5", "--out", s(p)]);
            assert_eq!(code(&out), 0, "{env}: {}", String::from_utf8_lossy(&out.stderr));
        }
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{env}");
        assert_eq!(code(&run(&["replay", s(&a)])), 0, "{env}");
        assert_eq!(code(&run(&["attribute", s(&a)])), 0, "{env}");
    }
}

#[test]
fn edited_trajectory_fails_replay_with_findings_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    assert_eq!(code(&run(&["rollout", "rps", "--out", s(&path)])), 0);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // Flip the second recorded action between rock and paper.
    let mut rec: serde_json::Value = serde_json::from_str(&lines[2]).unwrap();
    let a = rec["action"].as_u64().unwrap();
    rec["action"] = serde_json::json!((a + 1) % 3);
    lines[2] = serde_json::to_string(&rec).unwrap();
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let out = run(&["replay", s(&path), "--format", "json"]);
    assert_eq!(code(&out), 1);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["ok"], false);
}

#[test]
fn race_detect_flags_fig5_only_in_buggy_mode() {
    assert_eq!(code(&run(&["race-detect", "cleanup_fig5", "--mode", "parallel_buggy"])), 1);
    assert_eq!(code(&run(&["race-detect", "cleanup_fig5", "--mode", "aec"])), 0);
    assert_eq!(code(&run(&["race-detect", "rps"])), 0);
}

#[test]
fn compliance_and_mutants() {
    assert_eq!(code(&run(&["check", "api", "tictactoe", "--episodes", "3"])), 0);
    assert_eq!(code(&run(&["check", "api", "mutant:tictactoe_leaky_rewards", "--episodes", "3"])), 1);
    assert_eq!(code(&run(&["check", "api", "no_such_env"])), 2);
}

#[test]
fn convert_then_check_equivalence() {
    let dir = tempfile::tempdir().unwrap();
    let posg = dir.path().join("posg.json");
    let aec = dir.path().join("aec.json");
    let spec = AnySpec::Posg(random_posg(&GenParams::default(), 3));
    std::fs::write(&posg, serde_json::to_string(&spec).unwrap()).unwrap();
    assert_eq!(code(&run(&["check", "spec", s(&posg)])), 0);
    let out = run(&["convert", s(&posg), "--to", "aec", "--out", s(&aec)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&run(&["check", "spec", s(&aec)])), 0);
    let out = run(&["check", "equivalence", s(&posg), s(&aec), "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    // Converting an AEC spec to AEC is an error, not a finding.
    assert_eq!(code(&run(&["convert", s(&aec), "--to", "aec"])), 2);
}

#[test]
fn spec_file_rollout_runs() {
    let dir = tempfile::tempdir().unwrap();
    let posg = dir.path().join("posg.json");
    let aec = dir.path().join("aec.json");
    std::fs::write(&posg, serde_json::to_string(&AnySpec::Posg(random_posg(&GenParams::default(), 1))).unwrap()).unwrap();
    assert_eq!(code(&run(&["convert", s(&posg), "--to", "aec", "--out", s(&aec)])), 0);
    let out = run(&["rollout", s(&aec), "--horizon", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("{\"format\":\"aec-traj/1\""));
}

#[test]
fn pruning_experiment_reports() {
    let out = run(&["prune-exp", "--episodes", "5", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["episodes"], 5);
}

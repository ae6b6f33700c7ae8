//! Exit codes and report content of the command-line tool.

use netfactor::io;
use netfactor::network::{canonical_instance, CanonicalInstance};
use netfactor::search::square_network;
use netfactor::{DenseTensor, DistributionTask, Domain, NodeAssignment};
use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_netfactor"))
        .args(args)
        .env_remove("NETFACTOR_SEED")
        .output()
        .expect("run netfactor");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn verify_accepts_the_parity_assignment() {
    let (code, out, _) = run(&["verify", "--builtin", "butterfly"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("matched: true"), "{out}");
}

#[test]
fn verify_rejects_a_zero_assignment() {
    let dir = tempfile::tempdir().unwrap();
    let net = canonical_instance(CanonicalInstance::Butterfly).unwrap();
    let zero = NodeAssignment::zeros(&net, Domain::NonNegative).unwrap();
    let file = write(dir.path(), "zero.json", &io::assignment_json(&zero).unwrap());
    let (code, out, _) = run(&["verify", "--builtin", "butterfly", "--assignment", &file]);
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("matched: false"), "{out}");
}

#[test]
fn verify_reports_client_dimension_mismatch_as_error() {
    let dir = tempfile::tempdir().unwrap();
    let task = netfactor::task::cross_pairs_task(&[("S1", "T1"), ("S2", "T2")], &[3, 3], Domain::NonNegative).unwrap();
    let file = write(dir.path(), "task.json", &io::task_json(&task).unwrap());
    let (code, _, err) = run(&["verify", "--builtin", "butterfly", "--task", &file]);
    assert_eq!(code, 2);
    assert!(err.starts_with("error:"), "{err}");
}

#[test]
fn search_outcomes() {
    let (code, out, _) = run(&["search", "--builtin", "typewriter", "--domain", "complex", "--restarts", "20"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("hit: true"));

    let (code, out, _) = run(&["search", "--builtin", "typewriter", "--domain", "nonneg", "--restarts", "10"]);
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("no factorization found (evidence, not proof)"));
    assert_eq!(out.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).count(), 10);

    let (code, out, _) = run(&["search", "--builtin", "square", "--reduced", "--restarts", "20"]);
    assert_eq!(code, 1, "{out}");

    let (code, _, _) = run(&["search", "--builtin", "typewriter", "--reduced"]);
    assert_eq!(code, 2);
}

#[test]
fn search_seed_comes_from_the_environment() {
    let args = ["search", "--builtin", "typewriter", "--domain", "nonneg", "--restarts", "4"];
    let by_env = Command::new(env!("CARGO_BIN_EXE_netfactor"))
        .args(args)
        .env("NETFACTOR_SEED", "7")
        .output()
        .unwrap();
    let (_, by_flag, _) = run(&[&args[..], &["--seed", "7"]].concat());
    assert_eq!(String::from_utf8(by_env.stdout).unwrap(), by_flag);
}

#[test]
fn analyze_reports_bounds() {
    let (code, out, _) = run(&["analyze", "--builtin", "typewriter"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("rank: 3"), "{out}");

    let (code, out, _) = run(&["analyze", "--builtin", "identity:4"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("rank: 4"), "{out}");
}

#[test]
fn analyze_rejects_negative_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let m = DenseTensor::matrix("u", "v", &[vec![1.0, -1.0], vec![0.0, 1.0]], Domain::Complex).unwrap();
    let task = DistributionTask::new(m, Domain::Complex).unwrap();
    let file = write(dir.path(), "m.json", &io::task_json(&task).unwrap());
    let (code, _, err) = run(&["analyze", "--matrix", &file]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn simulate_runs_protocols() {
    let (code, out, _) = run(&["simulate", "--builtin", "ternary-cross"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("branches: 2"), "{out}");

    let (code, out, _) = run(&["simulate", "--builtin", "measure-demo"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("branch [z=0] probability=5.000000e-1"), "{out}");
    assert!(out.contains("branch [z=1] probability=5.000000e-1"), "{out}");

    let (code, out, _) = run(&["simulate", "--builtin", "butterfly", "--lifted"]);
    assert_eq!(code, 0, "{out}");
}

#[test]
fn simulate_rejects_unknown_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{"steps":[{"op":"send","subsystem":"x","from":"ghost","to":"v"}]}"#;
    let file = write(dir.path(), "p.json", body);
    let (code, _, err) = run(&["simulate", "--builtin", "measure-demo", "--protocol", &file]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn instances_export_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let (code, out, _) = run(&["instances", "--builtin", "square", "--out", out_dir]);
    assert_eq!(code, 0, "{out}");
    let net = io::read_network(&dir.path().join("network.json")).unwrap();
    assert_eq!(net, square_network());
    let task_file = dir.path().join("task.json");
    let (code, out, _) = run(&[
        "verify",
        "--network",
        dir.path().join("network.json").to_str().unwrap(),
        "--task",
        task_file.to_str().unwrap(),
        "--assignment",
        &write(
            dir.path(),
            "zero.json",
            &io::assignment_json(&NodeAssignment::zeros(&net, Domain::Complex).unwrap()).unwrap(),
        ),
    ]);
    assert_eq!(code, 1, "{out}");
}

#[test]
fn unknown_builtin_is_an_error() {
    let (code, _, err) = run(&["verify", "--builtin", "nope"]);
    assert_eq!(code, 2);
    assert!(err.starts_with("error:"));
}

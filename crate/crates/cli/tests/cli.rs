use std::process::Command;

fn director() -> Command {
    Command::new(env!("CARGO_BIN_EXE_director"))
}

#[test]
fn run_writes_a_report_that_replays() {
    let dir = tempfile::tempdir().unwrap();
    let out = director()
        .args(["run", "--goals", "1-2", "--repeats", "2", "--backend", "scripted", "--seed", "3", "--report"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("Find the ball"));
    assert!(table.contains("Approach the ball"));
    assert!(dir.path().join("results.json").exists());

    let log = dir.path().join("logs/goal2_seed4.jsonl");
    let out = director().args(["replay", "--log"]).arg(&log).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("replay matches the log"));
}

#[test]
fn bad_arguments_fail() {
    assert!(!director().args(["run", "--backend", "oracle"]).status().unwrap().success());
    assert!(!director().args(["run", "--goals", "0-3"]).status().unwrap().success());
    let out = director().args(["replay", "--log", "/nonexistent/log.jsonl"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn faulty_backend_completes_every_trial() {
    let out = director().args(["run", "--goals", "9", "--repeats", "1", "--backend", "faulty"]).output().unwrap();
    assert!(out.status.success());
}

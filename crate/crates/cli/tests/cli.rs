use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qaebac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qaebac"))
        .args(args)
        .env_remove("QAE_SEED")
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn gen(dir: &Path) {
    let out = qaebac(&["gen", "--case", "C2", "--scale", "0.001", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(qaebac(&["bench", "--case", "C2", "--frobnicate"]).status.code(), Some(2));
    assert_eq!(qaebac(&[]).status.code(), Some(2));
    assert_eq!(qaebac(&["gen", "--case", "C2"]).status.code(), Some(2));
    assert_eq!(qaebac(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w");
    let out = out.to_str().unwrap();
    assert_eq!(qaebac(&["gen", "--case", "C16", "--out", out]).status.code(), Some(1));
    assert_eq!(qaebac(&["gen", "--case", "C2", "--scale", "2", "--out", out]).status.code(), Some(1));
    assert_eq!(qaebac(&["load", "--state", "/nonexistent/state.jsonl"]).status.code(), Some(1));
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let out = qaebac(&[
        "bench", "--case", "C2", "--variant", "full", "--runs", "10", "--scale", "0.001", "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "case,variant,run,throughput_tps,latency_avg_ms,latency_p50_ms,latency_p99_ms,comparisons_avg,grant_rate"
    );
    assert_eq!(lines.len(), 12);
    assert!(lines[11].starts_with("C2,full,mean,"));
}

#[test]
fn tampered_request_is_a_decision_not_a_failure() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w");
    gen(&w);
    let first = std::fs::read_to_string(w.join("requests.jsonl")).unwrap();
    let mut req: Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    let path = dir.path().join("req.json");
    std::fs::write(&path, req.to_string()).unwrap();
    let args = ["authz", "--workload", w.to_str().unwrap(), "--request", path.to_str().unwrap()];
    let out = qaebac(&args);
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(stdout_json(&out)["reason"], "bad-signature");

    let cred = req["signed_credential"]["credential"].as_object_mut().unwrap();
    let (name, _) = cred.iter().next().map(|(k, v)| (k.clone(), v.clone())).unwrap();
    cred.insert(name, Value::from("tampered"));
    std::fs::write(&path, req.to_string()).unwrap();
    let out = qaebac(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let decision = stdout_json(&out);
    assert_eq!(decision["reason"], "bad-signature");
    assert_eq!(decision["outcome"], "DENY");
}

#[test]
fn keygen_sign_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let key = dir.path().join("key.json");
    let seed = "AQEBAQEBAQEBAQEBAQEBAQEBAQEBAQEBAQEBAQEBAQE=";
    assert!(qaebac(&["keygen", "--seed", seed, "--out", key.to_str().unwrap()]).status.success());
    let sign = |k: &Path| {
        qaebac(&["sign", "--key", k.to_str().unwrap(), "--attr", "role=nurse", "--attr", "ward=east"])
    };
    let (a, b) = (sign(&key), sign(&key));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let sc = stdout_json(&a);
    assert_eq!(sc["credential"]["ward"], "east");
    assert!(sc["signature"].as_str().unwrap().len() == 88);
    assert_eq!(qaebac(&["sign", "--key", key.to_str().unwrap(), "--attr", "novalue"]).status.code(), Some(1));
}

#[test]
fn seed_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_qaebac"))
            .args(["gen", "--case", "C2", "--scale", "0.001", "--out", out.to_str().unwrap()])
            .env("QAE_SEED", seed)
            .output()
            .unwrap();
        assert!(status.status.success());
        let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        (manifest["seed"].as_u64().unwrap(), std::fs::read(out.join("requests.jsonl")).unwrap())
    };
    let (s1, r1) = run("7", "a");
    let (_, r2) = run("7", "b");
    let (s3, r3) = run("8", "c");
    assert_eq!((s1, s3), (7, 8));
    assert_eq!(r1, r2);
    assert_ne!(r1, r3);
}

#[test]
fn state_files_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w");
    gen(&w);
    let state = dir.path().join("state.jsonl");
    let out = qaebac(&["snapshot", "--workload", w.to_str().unwrap(), "--out", state.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&qaebac(&["load", "--state", state.to_str().unwrap()]));
    assert_eq!(summary["subjects"], 10);
    assert_eq!(summary["history"], 1000);
    assert_eq!(summary["last_seq"], 1000);

    let empty = dir.path().join("empty.jsonl");
    let init = qaebac(&["init", "--space", w.join("space.json").to_str().unwrap(), "--out", empty.to_str().unwrap()]);
    assert!(init.status.success());
    assert_eq!(stdout_json(&qaebac(&["load", "--state", empty.to_str().unwrap()]))["subjects"], 0);

    let csv = dir.path().join("anon.csv");
    let out = qaebac(&["report", "--case", "C2", "--case", "C13", "--scale", "0.001", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("case,t,r,cohort_size,e_req_min,e_req_mean,e_req_max,a_sub_q1,a_sub_median,a_sub_q3\n"));
    assert_eq!(text.lines().count(), 1 + 4 + 3);
}

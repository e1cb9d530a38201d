//! Behaviour of the `qrl` binary: reports, headers and exit codes.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

pub fn qrl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrl")).current_dir(dir).args(args).output().expect("qrl runs")
}

fn qrl_env(dir: &Path, env: (&str, &str), args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrl")).current_dir(dir).env(env.0, env.1).args(args).output().expect("qrl runs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("JSON report")
}

const MACHINE: &str = r#"{"programs":[
  {"sigma":"00","dim_qubits":1,"vectors":[[[1,0],[0,0]]]},
  {"sigma":"01","dim_qubits":1,"vectors":[[[0,0],[1,0]]]},
  {"sigma":"1","dim_qubits":2,"vectors":[[[0.5,0],[0.5,0],[0.5,0],[0.5,0]]]}
]}"#;

const BAD_MACHINE: &str = r#"{"programs":[
  {"sigma":"0","dim_qubits":1,"vectors":[[[1,0],[0,0]]]},
  {"sigma":"01","dim_qubits":1,"vectors":[[[0,0],[1,0]]]}
]}"#;

pub fn workspace() -> tempfile::TempDir {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    std::fs::write(p.join("tracial.json"), r#"{"kind":"tracial","params":{},"N":8}"#).unwrap();
    std::fs::write(p.join("c4.json"), r#"{"kind":"chapter4","params":{},"N":6}"#).unwrap();
    std::fs::write(p.join("bern.json"), r#"{"kind":"bernoulli","params":{"p":0.25},"N":10}"#).unwrap();
    std::fs::write(p.join("f1.json"), r#"{"kind":"diagonal_f","params":{"f":"f1"},"N":12}"#).unwrap();
    std::fs::write(p.join("v.json"), "[[[0.6,0],[0,0.8]]]").unwrap();
    std::fs::write(p.join("m.json"), MACHINE).unwrap();
    std::fs::write(p.join("bad_m.json"), BAD_MACHINE).unwrap();
    d
}

pub const COMMANDS: &[&[&str]] = &[
    &["state", "coherence", "--state", "tracial.json", "--N", "8"],
    &["state", "coherence", "--state", "c4.json"],
    &["state", "dump", "--state", "c4.json", "--level", "5"],
    &["test", "build", "--builder", "chapter4", "--m", "1"],
    &["test", "run", "--builder", "chapter4", "--m", "1"],
    &["test", "run", "--builder", "lln", "--delta", "1/5", "--n-max", "12", "--format", "csv"],
    &["test", "run", "--builder", "smb", "--delta", "1/2", "--p", "0.1", "--n-max", "22"],
    &["test", "run", "--builder", "eigenmass", "--state", "f1.json", "--eps", "1/2", "--delta", "3/10", "--m", "1"],
    &["measure", "premeasure", "--state", "c4.json", "--basis", "hadamard", "--depth", "6"],
    &[
        "measure",
        "premeasure",
        "--state",
        "bern.json",
        "--basis",
        "periodic:v.json",
        "--depth",
        "4",
        "--format",
        "json",
    ],
    &["measure", "sample", "--state", "c4.json", "--basis", "hadamard", "--n", "11", "--seed", "5"],
    &["measure", "sample", "--state", "bern.json", "--n", "10", "--seed", "9", "--format", "json"],
    &["measure", "lln", "--state", "bern.json", "--seed", "3"],
    &["qk", "validate", "--machine", "m.json"],
    &["qk", "eval", "--machine", "m.json", "--state", "tracial.json", "--level", "2", "--eps", "0.2"],
    &["qk", "count", "--machine", "m.json", "--s", "2", "--b", "2", "--eps", "0.5"],
    &["entropy", "report", "--state", "c4.json", "--m", "1,2"],
    &["entropy", "bound", "--state", "f1.json", "--m", "2"],
    &["oracle", "run", "--check", "all", "--seed", "3", "--scale", "5"],
];

#[test]
fn oracle_all_seed_7_identical_json() {
    let d = workspace();
    let args = ["oracle", "run", "--check", "all", "--seed", "7", "--out", "o.json"];
    let first = qrl(d.path(), &args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let a = std::fs::read(d.path().join("o.json")).unwrap();
    assert!(qrl(d.path(), &args).status.success());
    let b = std::fs::read(d.path().join("o.json")).unwrap();
    assert_eq!(a, b);
    let v: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);
}

#[test]
fn header_fields() {
    let d = workspace();
    let o =
        qrl(d.path(), &["measure", "sample", "--state", "bern.json", "--n", "10", "--seed", "9", "--format", "json"]);
    let v = json(&o);
    let h = &v["header"];
    assert_eq!(h["seed"], 9);
    assert_eq!(h["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(h["config_sha256"].as_str().unwrap().len(), 64);
    assert!(h["rng"].as_str().unwrap().starts_with("ChaCha20"));
    assert!(h.get("timestamp").is_none());
    let other =
        qrl(d.path(), &["measure", "sample", "--state", "bern.json", "--n", "10", "--seed", "10", "--format", "json"]);
    assert_ne!(json(&other)["header"]["config_sha256"], h["config_sha256"]);
}

#[test]
fn out_path_does_not_change_report() {
    let d = workspace();
    let base = ["entropy", "report", "--state", "c4.json", "--m", "1"];
    let mut a = base.to_vec();
    a.extend(["--out", "a.csv"]);
    let mut b = base.to_vec();
    b.extend(["--out", "b.csv"]);
    assert!(qrl(d.path(), &a).status.success());
    assert!(qrl(d.path(), &b).status.success());
    assert_eq!(std::fs::read(d.path().join("a.csv")).unwrap(), std::fs::read(d.path().join("b.csv")).unwrap());
    let text = std::fs::read_to_string(d.path().join("a.csv")).unwrap();
    assert!(text.contains("n,H,H/n,H-n,S_1"));
}

#[test]
fn tracial_coherence_passes() {
    let d = workspace();
    let o = qrl(d.path(), &["state", "coherence", "--state", "tracial.json", "--N", "8"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["pass"], true);
    assert_eq!(v["summary"]["depth"], 8);
}

#[test]
fn chapter4_m1_run() {
    let d = workspace();
    let v = json(&qrl(d.path(), &["test", "run", "--builder", "chapter4", "--m", "1"]));
    assert!((v["summary"]["trace"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(v["summary"]["tau"].as_f64().unwrap() < 0.5);
    assert_eq!(v["summary"]["N"], 9);
}

#[test]
fn state_build_roundtrip() {
    let d = workspace();
    let o = qrl(d.path(), &["state", "build", "--kind", "diagonal-f", "--f", "f2", "--N", "6", "--out", "f2.json"]);
    assert!(o.status.success());
    let o = qrl(d.path(), &["state", "coherence", "--state", "f2.json"]);
    assert!(o.status.success());
    assert_eq!(json(&o)["summary"]["depth"], 6);
}

#[test]
fn exit_codes() {
    let d = workspace();
    std::fs::write(d.path().join("broken.json"), "{").unwrap();
    let code = |o: Output| o.status.code().unwrap();
    assert_eq!(code(qrl(d.path(), &["state", "coherence", "--state", "broken.json"])), 2);
    assert_eq!(code(qrl(d.path(), &["state", "coherence", "--state", "missing.json"])), 2);
    assert_eq!(code(qrl(d.path(), &["test", "run", "--builder", "lln"])), 2);
    assert_eq!(
        code(qrl(
            d.path(),
            &["measure", "sample", "--state", "c4.json", "--basis", "bogus", "--n", "3", "--seed", "1"]
        )),
        2
    );
    assert_eq!(code(qrl(d.path(), &["test", "run", "--builder", "chapter4", "--m", "2"])), 3);
    assert_eq!(
        code(qrl_env(d.path(), ("QRL_MAX_DIM", "factored=8"), &["test", "run", "--builder", "chapter4", "--m", "1"])),
        3
    );
    assert_eq!(code(qrl_env(d.path(), ("QRL_MAX_DIM", "nonsense"), &["test", "build", "--builder", "chapter4"])), 2);
    let bad = qrl(d.path(), &["qk", "validate", "--machine", "bad_m.json"]);
    assert_eq!(bad.status.code(), Some(4));
    assert_eq!(json(&bad)["pass"], false);
    assert_eq!(
        code(qrl(
            d.path(),
            &["qk", "eval", "--machine", "bad_m.json", "--state", "tracial.json", "--level", "1", "--eps", "0.5"]
        )),
        2
    );
}

#[test]
fn qk_values() {
    let d = workspace();
    let v = json(&qrl(
        d.path(),
        &["qk", "eval", "--machine", "m.json", "--state", "tracial.json", "--level", "2", "--eps", "0.2"],
    ));
    assert_eq!(v["summary"]["qk_eps"], 1.0);
    let v = json(&qrl(
        d.path(),
        &["qk", "eval", "--machine", "m.json", "--state", "tracial.json", "--level", "1", "--eps", "0.5"],
    ));
    assert_eq!(v["summary"]["qk_eps"], "inf");
    let v = json(&qrl(d.path(), &["qk", "validate", "--machine", "m.json"]));
    assert_eq!(v["summary"]["kraft_sum"], 1.0);
}

#[test]
fn premeasure_csv_rows() {
    let d = workspace();
    let o = qrl(d.path(), &["measure", "premeasure", "--state", "tracial.json", "--depth", "2"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body, ["tau,p", ",1.0", "0,0.5", "1,0.5", "00,0.25", "01,0.25", "10,0.25", "11,0.25"]);
}

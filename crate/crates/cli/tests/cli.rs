use std::process::{Command, Output};

use serde_json::Value;

fn flatstep(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_flatstep"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("FLATSTEP_THREADS", t);
    } else {
        cmd.env_remove("FLATSTEP_THREADS");
    }
    cmd.output().unwrap()
}

fn error_record(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("no stderr");
    serde_json::from_str(line).unwrap_or_else(|_| panic!("stderr is not a JSON record: {stderr}"))
}

#[test]
fn list_names_every_experiment() {
    let out = flatstep(&["list"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["calibrate-slopes", "order-select", "stability-map", "decay-ringing", "noise-floor", "ellipsoid-run", "logdet-bench", "hodge-demo", "chebyshev-compare", "adaptive-precond"] {
        assert!(text.contains(name), "missing {name}");
    }
    assert!(text.contains("required"));
}

#[test]
fn run_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("run");
    let p = prefix.to_str().unwrap();
    let out = flatstep(&["decay-ringing", "--seed", "2", "--out", p, "--param", "k_max=150"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(format!("{p}.csv")).unwrap();
    assert!(csv.starts_with("# schema=decay_ringing/v1\nk,y,casorati\n"));
    let json: Value = serde_json::from_str(&std::fs::read_to_string(format!("{p}.json")).unwrap()).unwrap();
    assert_eq!(json["inputs"]["params"]["k_max"], 150.0);
    assert_eq!(json["inputs"]["seed"], 2);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let p = dir.path().join("o");
    std::fs::write(&cfg, r#"{"experiment":"stability-map","seed":1,"params":{"eta1":0.05,"grid":10,"lambda_grid":11}}"#).unwrap();
    let out = flatstep(&["stability-map", "--config", cfg.to_str().unwrap(), "--out", p.to_str().unwrap(), "-p", "grid=12"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(p.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 144);
}

#[test]
fn validation_errors_exit_two() {
    let out = flatstep(&["stability-map"], None);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["level"], "error");
    assert_eq!(rec["exit"], 2);
    assert!(rec["message"].as_str().unwrap().contains("eta1"));

    assert_eq!(flatstep(&["decay-ringing", "-p", "bogus=1"], None).status.code(), Some(2));
    assert_eq!(flatstep(&["no-such-experiment"], None).status.code(), Some(2));
    assert_eq!(flatstep(&["decay-ringing", "-p", "eta0=abc"], None).status.code(), Some(2));
    assert_eq!(flatstep(&["decay-ringing"], Some("zero")).status.code(), Some(2));
}

#[test]
fn numerical_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x");
    // Real multipliers: there is no ringing to measure.
    let out = flatstep(&["decay-ringing", "--out", p.to_str().unwrap(), "-p", "gamma1=0", "-p", "eta1=0", "-p", "eta0=0.1"], None);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_record(&out)["kind"], "OutOfDomain");
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for t in ["1", "4"] {
        let p = dir.path().join(format!("t{t}"));
        let out = flatstep(&["noise-floor", "--seed", "9", "--out", p.to_str().unwrap(), "-p", "steps=50000", "-p", "n_omega=2048"], Some(t));
        assert!(out.status.success());
        csvs.push(std::fs::read_to_string(p.with_extension("csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

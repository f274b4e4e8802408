use std::process::Command;

use frechet_sets::cli::run;
use serde_json::Value;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("frechet-sets").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn mean_on_uniform_discrete() {
    let (code, out, _) = call(&["mean", "--space", r#"{"kind":"discrete","m":3}"#, "--measure", r#"{"uniform":true}"#]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["argmin"], serde_json::json!([0, 1, 2]));
    let (code, out, _) =
        call(&["medoid", "--space", r#"{"kind":"discrete","m":3}"#, "--measure", r#"{"weights":[0.5,0.3,0.2]}"#]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["argmin"], serde_json::json!([0]));
}

#[test]
fn exit_codes() {
    assert_eq!(call(&["mean", "--space", "{not json", "--measure", r#"{"uniform":true}"#]).0, 2);
    assert_eq!(call(&["frobnicate"]).0, 2);
    assert_eq!(call(&["mean"]).0, 2);
    assert_eq!(call(&["--help"]).0, 0);
    // domain errors
    assert_eq!(call(&["example", "ex9"]).0, 1);
    let bad = r#"{"labels":["a","b"],"dist":[[0,1],[2,0]]}"#;
    let (code, out, _) = call(&["validate", "--space", bad]);
    assert_eq!(code, 1);
    assert!(!json(&out)["violations"].as_array().unwrap().is_empty());
    let (code, _, _) =
        call(&["mean", "--space", r#"{"kind":"discrete","m":3}"#, "--measure", r#"{"weights":[0.5,0.2]}"#]);
    assert_eq!(code, 1);
}

#[test]
fn files_and_embedded_space() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    std::fs::write(&m, r#"{"space":{"kind":"circle_grid","N":8},"uniform_on":[0,4]}"#).unwrap();
    let (code, out, err) = call(&["mean", "--measure", m.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(json(&out)["argmin"], serde_json::json!([2, 6]));
    let (code, out, _) = call(&["equiv", "--measure", m.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["holds"], true);
}

#[test]
fn simulate_config_echo_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"space":{"kind":"circle_grid","N":8},"measure":{"uniform_on":[0,4]},"p":2,"n_max":400,"reps":6,"seed":9}"#,
    )
    .unwrap();
    let (code, first, err) = call(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let echo = dir.path().join("echo.json");
    std::fs::write(&echo, serde_json::to_string(&json(&first)["config"]).unwrap()).unwrap();
    let (_, second, _) = call(&["simulate", "--config", echo.to_str().unwrap(), "--threads", "3"]);
    assert_eq!(first, second);
}

#[test]
fn example_report_is_deterministic() {
    let args = ["example", "ex5_3", "--n-max", "200", "--reps", "5", "--tie-reps", "200", "--seed", "4"];
    let (code, a, err) = call(&args);
    assert_eq!(code, 0, "{err}");
    let (_, b, _) = call(&args);
    assert_eq!(a, b);
    let v = json(&a);
    assert_eq!(v["example"], "ex5_3");
    assert!(!v["verdicts"].as_array().unwrap().is_empty());
}

#[test]
fn decay_csv_and_binary() {
    let out = Command::new(env!("CARGO_BIN_EXE_frechet-sets"))
        .args([
            "decay", "--space", r#"{"kind":"discrete","m":2}"#, "--measure", r#"{"weights":[0.7,0.3]}"#,
            "--p", "1", "--epsilon", "0.5", "--n-grid", "5,9,13", "--reps", "500", "--seed", "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("n,estimate,stderr,censored\n"));
    assert_eq!(text.lines().count(), 4);
}

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_partial-control"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("valid JSON on stdout")
}

fn csv_rows(out: &Output) -> Vec<Vec<String>> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn safeset_fig5() {
    let out = run(&["safeset", "--map", "asymmetric-tent", "--q", "0.5", "1", "--u", "0.04", "--beta", "0.05"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let comps = v["components"].as_array().unwrap();
    assert_eq!(comps.len(), 3);
    assert!((comps[0][0].as_f64().unwrap() - 0.5748).abs() < 5e-4);
    assert_eq!(v["converged"], true);
    assert!(v["maximality_residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn safeset_empty_below_vanishing_point() {
    let out = run(&["safeset", "--u", "0.03", "--beta", "0.05"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["components"], Value::Array(vec![]));
    assert_eq!(v["measure"].as_f64(), Some(0.0));
    assert_eq!(v["maximality_residual"], Value::Null);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["safeset", "--u", "0.04"]).status.code(), Some(1));
    assert_eq!(run(&["safeset", "--u", "0.04", "--beta", "0.05", "--q", "1", "0.5"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn map_files() {
    let good = temp_file("tent.json", r#"{"breakpoints": [0, 0.7, 1], "values": [0, 0.91, 0.01]}"#);
    let out = run(&["safeset", "--map", good.to_str().unwrap(), "--u", "0.04", "--beta", "0.05"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["components"].as_array().unwrap().len(), 3);

    let bad = temp_file("bad.json", r#"{"breakpoints": [0, 1], "values": [0]}"#);
    let out = run(&["safeset", "--map", bad.to_str().unwrap(), "--u", "0.04", "--beta", "0.05"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn controlled_run_never_crashes_and_is_reproducible() {
    let args = ["simulate", "--mode", "controlled", "--u", "0.04", "--beta", "0.05", "--n", "200", "--strategy", "adversarial"];
    let out = run(&args);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 200);
    assert!(rows.iter().all(|r| r[4] == "false"));
    assert!(rows.iter().all(|r| r[3].parse::<f64>().unwrap().abs() <= 0.04));
    assert_eq!(out.stdout, run(&args).stdout);

    let seeded = ["simulate", "--u", "0.04", "--beta", "0.05", "--strategy", "uniform", "--seed", "9"];
    assert_eq!(run(&seeded).stdout, run(&seeded).stdout);
}

#[test]
fn perturbed_run_crashes() {
    let out = run(&["simulate", "--mode", "perturbed", "--beta", "0.05", "--strategy", "adversarial", "--n", "200"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&out);
    assert!(rows.iter().any(|r| r[4] == "true"));
    assert!(rows.iter().all(|r| r[3] == "0.0"));
}

#[test]
fn zero_steps_is_header_only() {
    let out = run(&["simulate", "--mode", "uncontrolled", "--n", "0"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "n,x,xi,u,crash\n");
}

#[test]
fn json_trajectory() {
    let out = run(&["simulate", "--mode", "uncontrolled", "--n", "5", "--x0", "0.65", "--format", "json"]);
    let v = json(&out);
    assert_eq!(v["states"].as_array().unwrap().len(), 6);
    assert!((v["states"][1].as_f64().unwrap() - 0.845).abs() < 1e-12);
}

#[test]
fn unsafe_set_file_is_a_breach() {
    let s = temp_file("not_safe.json", "[[0.6, 0.61]]");
    let out = run(&["simulate", "--u", "0.04", "--beta", "0.05", "--safe-set", s.to_str().unwrap(), "--x0", "0.605"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn start_outside_safe_set_is_rejected() {
    let out = run(&["simulate", "--u", "0.04", "--beta", "0.05", "--x0", "0.7"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_grid_and_determinism() {
    let base = ["sweep", "--u-range", "0.0", "0.1", "20", "--beta-range", "0.0", "0.1", "20"];
    let one = run(&[&base[..], &["--jobs", "1"]].concat());
    let four = run(&[&base[..], &["--jobs", "4"]].concat());
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    let text = String::from_utf8(one.stdout.clone()).unwrap();
    assert_eq!(text.lines().next(), Some("u,beta,exists,measure,n_components,status"));
    let rows = csv_rows(&one);
    assert_eq!(rows.len(), 400);
    assert_eq!(rows.iter().filter(|r| r[5] == "outside-regime").count(), 210);
    let fig5 = rows.iter().find(|r| r[0] == "0.04" && r[1] == "0.05").unwrap();
    assert_eq!((fig5[2].as_str(), fig5[4].as_str()), ("true", "3"));
}

#[test]
fn umin_at_fig5_beta() {
    let out = run(&["umin", "--beta", "0.05"]);
    assert_eq!(out.status.code(), Some(0));
    let u = json(&out)["u_min"].as_f64().unwrap();
    assert!((u - 0.0357).abs() < 5e-4, "{u}");
}

#[test]
fn trace_and_bifurcate_find_both_events() {
    let out = run(&["trace", "--beta", "0.05", "--u-from", "0.05", "--u-to", "0.03"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let events = v["events"].as_array().unwrap();
    assert_eq!(events.len(), 2);
    assert_eq!(events[0]["kind"], "Split");
    assert!((events[0]["u_at"].as_f64().unwrap() - 0.045).abs() < 1e-3);
    assert_eq!(events[1]["kind"], "VanishingPoint");
    assert!((events[1]["u_at"].as_f64().unwrap() - 0.0357).abs() < 5e-4);

    let scan = json(&run(&["bifurcate", "--beta", "0.05"]));
    let kinds: Vec<&str> = scan.as_array().unwrap().iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["Split", "VanishingPoint"]);
}

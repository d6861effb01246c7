use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn overwatch(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_overwatch")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = overwatch(dir, args);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(out.status.success(), "{args:?} failed: {stderr}");
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

/// Default config shrunk to a map that solves in well under a second.
fn small_config(dir: &Path) -> String {
    ok(dir, &["init-config", "--out", "config.json"]);
    let mut cfg = read(dir, "config.json");
    cfg["dem"] = json!({ "kind": "synthetic", "width": 32, "height": 28, "resolution": 2.0, "seed": 5 });
    cfg["observers"] = json!({ "components": [
        { "weight": 1.0, "kind": "gaussian", "mean": [32.0, 28.0], "cov": [[16.0, 0.0], [0.0, 16.0]], "height": 1.7 }
    ] });
    cfg["graphgen"]["nu"] = json!(0.35);
    cfg["graphgen"]["xi_min"] = json!(6);
    cfg["graphgen"]["xi_max"] = json!(80);
    cfg["graphgen"]["d_max"] = json!(60.0);
    cfg["graphgen"]["ow_d_max"] = json!(40.0);
    cfg["refine"]["max_ow_dist"] = json!(15.0);
    cfg["scenario"] = json!({ "n_robots": 2, "start": [0.0, 0.0], "goal": [64.0, 56.0], "goal_count": 1, "horizon": 8, "time_weight": 1.0 });
    fs::write(dir.join("small.json"), serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    "small.json".into()
}

#[test]
fn fixture_chain_solve_allocate_render_simulate_metric() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = ok(d, &["build-model", "--fixture", "illustrative", "--out", "model.json"]);
    assert!(out.contains("460 variables"), "{out}");

    let out = ok(d, &["solve", "--fixture", "leapfrog", "--out", "sol.json"]);
    assert!(out.starts_with("status Optimal"), "{out}");
    assert_eq!(read(d, "sol.json")["status"], "optimal");

    ok(d, &["allocate", "--fixture", "leapfrog", "--solution", "sol.json", "--out", "routes.json"]);
    assert_eq!(read(d, "routes.json")["robots"].as_array().unwrap().len(), 4);

    ok(d, &["render", "--fixture", "leapfrog", "--routes", "routes.json", "--out", "plan.svg"]);
    ok(d, &["render", "--fixture", "leapfrog", "--out", "graph.dot"]);
    assert!(fs::read_to_string(d.join("plan.svg")).unwrap().contains(">t0<"));
    assert!(fs::read_to_string(d.join("graph.dot")).unwrap().starts_with("digraph dtg {"));

    ok(d, &["simulate", "--fixture", "leapfrog", "--routes", "routes.json", "--scale", "12", "--out", "sim"]);
    assert!(d.join("sim/sim_log.jsonl").exists());
    let out = ok(d, &["metric", "--protection", "sim/protection.json", "--out", "metric.json"]);
    let p = read(d, "metric.json")["protection"].as_f64().unwrap();
    assert!((0.0..=3.0).contains(&p));
    assert!(out.contains(&format!("protection {p:.4}")));
}

#[test]
fn export_lp_writes_both_formulations() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["export-lp", "--fixture", "bounding", "--out", "a.lp"]);
    ok(d, &["export-lp", "--fixture", "bounding", "--formulation", "gmip", "--out", "b.lp"]);
    for f in ["a.lp", "b.lp"] {
        let text = fs::read_to_string(d.join(f)).unwrap();
        assert!(text.contains("Minimize") && text.trim_end().ends_with("End"), "{f}");
    }
}

#[test]
fn ablate_reports_four_variants() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = ok(d, &["ablate", "--fixture", "illustrative", "--out", "ablation.json"]);
    let r = read(d, "ablation.json");
    let v = r["variants"].as_array().unwrap();
    assert_eq!(v.len(), 4);
    let obj: Vec<f64> = v.iter().map(|x| x["objective"].as_f64().unwrap()).collect();
    assert!(obj[1] <= obj[0] + 1e-9);
    for label in ["a ", "b ", "c ", "d "] {
        assert!(out.lines().any(|l| l.starts_with(label)), "{out}");
    }
}

#[test]
fn bench_model_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["bench", "--repeat", "1", "--out", "bench.json"]);
    let r = read(d, "bench.json");
    let vars: Vec<u64> = r["models"].as_array().unwrap().iter().map(|m| m["variables"].as_u64().unwrap()).collect();
    assert_eq!(vars, [460, 1160, 990, 1872]);
}

#[test]
fn pipeline_run_and_resume() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = small_config(d);
    let out = ok(d, &["gen-graph", "--config", &cfg, "--out", "run"]);
    assert!(out.starts_with("graph: "), "{out}");
    let instance = fs::read(d.join("run/instance.json")).unwrap();
    assert!(!d.join("run/solution.json").exists());

    ok(d, &["run", "--config", &cfg, "--out", "run", "--from", "model"]);
    for f in ["model.lp", "solution.json", "routes.json", "sim_log.jsonl", "metric.json", "plan.svg"] {
        assert!(d.join("run").join(f).exists(), "{f}");
    }
    assert_eq!(fs::read(d.join("run/instance.json")).unwrap(), instance);

    ok(d, &["run", "--config", &cfg, "--out", "again"]);
    for f in ["instance.json", "solution.json"] {
        assert_eq!(fs::read(d.join("run").join(f)).unwrap(), fs::read(d.join("again").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn overrides_reach_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = small_config(d);
    // horizon 1 leaves no time to move, so validation rejects the goal
    let out = overwatch(d, &["run", "--config", &cfg, "--horizon", "1", "--out", "bad"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage validate failed") && err.contains("goal unreachable"), "{err}");
    assert!(d.join("bad/instance.json").exists());

    let out = overwatch(d, &["run", "--config", &cfg, "--set", "refine.no_such_field=1", "--out", "bad2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown config field"));

    let out = ok(d, &["gen-graph", "--config", &cfg, "--set", "scenario.n_robots=3", "--out", "three"]);
    assert!(out.starts_with("graph: "));
    assert_eq!(read(&d.join("three"), "instance.json")["scenario"]["n_robots"], 3);
}

#[test]
fn bad_inputs_fail_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(overwatch(d, &["solve", "--instance", "missing.json"]).status.code(), Some(1));
    assert_ne!(overwatch(d, &["solve"]).status.code(), Some(0));
    assert_ne!(overwatch(d, &["run", "--from", "nowhere"]).status.code(), Some(0));
    assert_eq!(overwatch(d, &["render", "--fixture", "bounding", "--out", "x.png"]).status.code(), Some(1));
}

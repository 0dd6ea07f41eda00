use std::path::Path;
use std::process::{Command, Output};

use metric_union::glue::GlueSpec;
use metric_union::metric::{PartitionSpec, SpaceSpec};
use metric_union::testgen::{order_reversing_glue, random_instance};
use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_metric-union"));
    c.env_remove("METRIC_UNION_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {}", String::from_utf8_lossy(&out.stderr)))
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

fn instance_json(seed: u64, with_phi: bool) -> Value {
    let inst = random_instance(seed, 0).unwrap();
    let mut v = json!({
        "space": SpaceSpec::from_space(&inst.space),
        "partition": PartitionSpec { a: inst.partition.idx_a.clone(), b: inst.partition.idx_b.clone() },
    });
    if with_phi {
        v["phi_a"] = json!({ "dim": inst.phi_a.dim(), "points": inst.phi_a.to_vecs() });
        v["phi_b"] = json!({ "dim": inst.phi_b.dim(), "points": inst.phi_b.to_vecs() });
    }
    v
}

fn assert_slacks_ok(audit: &[Value]) {
    for a in audit {
        assert_eq!(a["pass"], true, "{a}");
        match a["slack"].as_f64() {
            Some(s) => {
                let scale = a["bound"].as_f64().unwrap_or(1.0).abs().max(1.0);
                let tol = a["tolerance"].as_f64().unwrap();
                assert!(s >= -tol * scale, "{a}");
            }
            // infinite slack: nothing to compare
            None => assert!(a["measured"].is_null() || a["bound"].is_null(), "{a}"),
        }
    }
}

#[test]
fn triangle_violation_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "tri.json", &json!({ "dist": [[0, 1, 3], [1, 0, 1], [3, 1, 0]] }));
    let out = run(&["check-metric", "--input", &path]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "InvalidMetric");
    let v = &err["detail"]["violations"][0];
    assert_eq!(v["kind"], "TriangleViolation");
    assert_eq!((v["i"].as_u64(), v["j"].as_u64(), v["k"].as_u64()), (Some(0), Some(2), Some(1)));
}

#[test]
fn valid_metric_passes() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "ok.json", &json!({ "labels": ["x", "y", "z"], "dist": [[0, 1, 2], [1, 0, 1.5], [2, 1.5, 0]] }));
    let out = run(&["check-metric", "--input", &path]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["points"], 3);
}

#[test]
fn malformed_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{ not json").unwrap();
    let out = run(&["embed", "--input", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "InputError");
    let out = run(&["cover"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn embed_generated_instance() {
    let dir = tempfile::tempdir().unwrap();
    let o1 = dir.path().join("a.json");
    let out = run(&["embed", "--seed", "7", "--output", o1.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&o1).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_slacks_ok(v["audit"].as_array().unwrap());
    assert_eq!(v["report"]["all_pass"], true);
    assert!(v["report"]["distortion"]["distortion"].as_f64().unwrap() < 8.93);
    let n = v["report"]["points"].as_u64().unwrap() as usize;
    assert_eq!(v["embedding"]["points"].as_array().unwrap().len(), n);

    // same config, same bytes, also with more threads
    let again = bin().args(["embed", "--seed", "7"]).env("METRIC_UNION_THREADS", "3").output().unwrap();
    assert_eq!(again.stdout, text.as_bytes());
}

#[test]
fn embed_from_file_with_and_without_phi() {
    let dir = tempfile::tempdir().unwrap();
    for with_phi in [true, false] {
        let path = write(dir.path(), "in.json", &instance_json(3, with_phi));
        let out = run(&["embed", "--input", &path, "--alpha", "0.5"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let v = stdout_json(&out);
        assert_eq!(v["report"]["alpha"].as_f64(), Some(0.5));
        assert!(v["report"]["distortion"]["distortion"].as_f64().unwrap() <= 11.0 + 1e-6);
        assert_slacks_ok(v["audit"].as_array().unwrap());
    }
}

#[test]
fn cover_command() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "in.json", &instance_json(5, false));
    let out = run(&["cover", "--input", &path, "--alpha", "0.25"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["cover"]["alpha"].as_f64(), Some(0.25));
    assert!(v["cover"]["lip_f"].as_f64().unwrap() <= v["lip_f_bound"].as_f64().unwrap());
    assert_eq!(v["lip_f_bound"].as_f64(), Some(10.0));
    assert!(v["check"]["property1_violation"].is_null());
}

#[test]
fn lowerbound_command() {
    let out = run(&["lowerbound", "--n", "64", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let delta = v["delta_star"].as_f64().unwrap();
    let bound = v["certified_bound"].as_f64().unwrap();
    assert!(delta < 1.0);
    assert!((bound - 3.0 / (1.0 + delta).powi(2)).abs() < 1e-15);
    assert!(bound > 0.75 && bound <= 3.0);
    assert!(v["embedding_distortion"].as_f64().unwrap() >= bound);
    assert_eq!(v["split"]["e1_edges"].as_u64().unwrap() + v["split"]["e2_edges"].as_u64().unwrap(), 64 * 64);
}

#[test]
fn lowerbound_small_n_exhausts_retries() {
    let out = run(&["lowerbound", "--n", "16", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "RetryBudgetExceeded");
}

#[test]
#[ignore = "grows n to 512; about a minute in release builds"]
fn lowerbound_epsilon_target() {
    let out = run(&["lowerbound", "--epsilon", "0.99", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["epsilon_target"]["reached"], true);
}

#[test]
fn glue_order_reversing() {
    let dir = tempfile::tempdir().unwrap();
    let g = order_reversing_glue().unwrap();
    let path = write(dir.path(), "g.json", &serde_json::to_value(GlueSpec::from_instance(&g)).unwrap());
    let out = run(&["glue", "--input", &path]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["glued"]["d_f"].as_f64(), Some(4.0));
    assert_eq!(v["bound"].as_f64(), Some(38.0));
    for k in ["distortion_f1", "distortion_f2"] {
        assert!(v[k].as_f64().unwrap() <= 38.0, "{k}");
    }
    // f(a_k) and a_k share one image
    let f1 = v["f1"]["points"].as_array().unwrap();
    let f2 = v["f2"]["points"].as_array().unwrap();
    for (k, &p) in [0usize, 2, 1].iter().enumerate() {
        assert_eq!(f1[k], f2[p]);
    }
}

#[test]
fn selftest_reports_every_criterion() {
    let out = run(&["selftest", "--seed", "3"]);
    let v = stdout_json(&out);
    let failing: Vec<&str> = v["suite"]["criteria"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    // the n = 16 lower bound is a known red line
    assert_eq!(failing, ["distortion lower bound n=16"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(v["mutations"]["gamma_zero_caught"], true);
    assert_eq!(v["mutations"]["tol_zero_error"], "SolverStall");
    let table = String::from_utf8_lossy(&out.stderr);
    assert_eq!(table.lines().filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]")).count(), 12);
}

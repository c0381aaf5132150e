use std::path::{Path, PathBuf};

use levinson_lab::{run_subcommand, EXIT_FAIL, EXIT_INPUT, EXIT_PASS};
use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("levinson-lab").chain(args.iter().copied());
    let code = run_subcommand(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|e| panic!("not JSON ({e}): {text}"))
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const SINGLE: &str = r#"{"L":1, "entries":[{"n":0,"re":[[1.5]],"im":[[0.0]]}]}"#;
const FREE: &str = r#"{"L":2, "entries":[]}"#;

#[test]
fn levinson_free_potential() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "free.json", FREE);
    let (code, out, _) = run(&["levinson", "--potential", p.to_str().unwrap(), "--quad-points", "128"]);
    assert_eq!(code, EXIT_PASS);
    let r = json(&out);
    assert_eq!(r["residual"].as_f64().unwrap(), 0.0);
    assert_eq!(r["pass"], Value::Bool(true));
    for key in ["input", "counts", "bound_states", "half_bound", "contour", "residual", "pass"] {
        assert!(r.get(key).is_some(), "missing section {key}");
    }
}

#[test]
fn levinson_single_site() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "v.json", SINGLE);
    let (code, out, _) = run(&["levinson", "--potential", p.to_str().unwrap(), "--quad-points", "256", "--eps-grid", "0.04,0.02,0.01"]);
    assert_eq!(code, EXIT_PASS);
    let r = json(&out);
    assert_eq!(r["counts"]["J_b"], 1);
    assert_eq!(r["counts"]["J_h"], 0);
    assert_eq!(r["counts"]["L"], 1);
    let w = &r["contour"]["normalized_winding"];
    assert!(w[0].as_f64().unwrap().abs() < 0.01 && w[1].as_f64().unwrap().abs() < 0.01);
}

#[test]
fn spectrum_single_site() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "v.json", SINGLE);
    let (code, out, _) = run(&["spectrum", "--potential", p.to_str().unwrap()]);
    assert_eq!(code, EXIT_PASS);
    let r = json(&out);
    let b = &r["bound_states"][0];
    assert!((b["z"].as_f64().unwrap() - 0.5).abs() < 1e-10);
    assert!((b["E"].as_f64().unwrap() - 2.5).abs() < 1e-10);
    assert_eq!(b["multiplicity"], 1);
    assert_eq!(r["oracle"]["count"], 1);
}

#[test]
fn scatter_point_and_circle() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "v.json", SINGLE);
    let (code, out, _) = run(&["scatter", "--potential", p.to_str().unwrap(), "--z", "0,1"]);
    assert_eq!(code, EXIT_PASS);
    let r = json(&out);
    let d = &r["det_s"];
    assert!((d[0].as_f64().unwrap() - 0.28).abs() < 1e-12 && (d[1].as_f64().unwrap() - 0.96).abs() < 1e-12);

    let report = dir.path().join("circle.json");
    let (code, _, _) = run(&["scatter", "--potential", p.to_str().unwrap(), "--circle-samples", "16", "--out", report.to_str().unwrap()]);
    assert_eq!(code, EXIT_PASS);
    let csv = std::fs::read_to_string(dir.path().join("circle.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "theta,re_detS,im_detS,re_delay,im_delay");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 16);
    for r in rows {
        assert!((r[1].hypot(r[2]) - 1.0).abs() < 1e-12);
    }
    let (code, out, _) = run(&["scatter", "--potential", p.to_str().unwrap(), "--z", "0.3"]);
    assert_eq!(code, EXIT_PASS, "{out}");
    assert!(json(&out).get("s").is_some());
    // at the bound state M± are singular: coefficients are reported, S is not
    let (code, out, _) = run(&["scatter", "--potential", p.to_str().unwrap(), "--z", "0.5"]);
    assert_eq!(code, EXIT_PASS, "{out}");
    let r = json(&out);
    assert!(r.get("s").is_none() && r["condition"].as_f64().unwrap() < 1e-13);
}

#[test]
fn jost_with_negative_window() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "v.json", SINGLE);
    let (code, out, _) = run(&["jost", "--potential", p.to_str().unwrap(), "--z", "0.5", "--window", "-3,2"]);
    assert_eq!(code, EXIT_PASS);
    let r = json(&out);
    let plus = r["plus"].as_array().unwrap();
    assert_eq!(plus.len(), 6);
    // u₊(−1) = E − V(0) − z = 2.5 − 1.5 − 0.5
    let at = plus.iter().find(|e| e["n"] == -1).unwrap();
    assert!((at["value"]["re"][0][0].as_f64().unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = run(&["levinson", "--potential", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code, EXIT_INPUT);
    assert_eq!(json(&out)["error"]["kind"], "io");

    let bad = write(dir.path(), "bad.json", r#"{"L":1, "entries":[{"n":0,"re":[[1.0]],"im":[[0.1]]}]}"#);
    let (code, out, _) = run(&["spectrum", "--potential", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_INPUT);
    assert_eq!(json(&out)["error"]["kind"], "not_hermitian");

    let broken = write(dir.path(), "broken.json", "{\"L\": 1,\n\"entries\": [}");
    let (code, out, _) = run(&["spectrum", "--potential", broken.to_str().unwrap()]);
    assert_eq!(code, EXIT_INPUT);
    assert!(json(&out)["error"]["message"].as_str().unwrap().contains("line 2"));

    let p = write(dir.path(), "v.json", SINGLE);
    assert_eq!(run(&["levinson", "--potential", p.to_str().unwrap(), "--eps-grid", "0.01,0.02,0.04"]).0, EXIT_INPUT);
    assert_eq!(run(&["levinson", "--potential", p.to_str().unwrap(), "--bogus"]).0, EXIT_INPUT);
    assert_eq!(run(&["scatter", "--potential", p.to_str().unwrap()]).0, EXIT_INPUT);
    assert_eq!(run(&["scatter", "--potential", p.to_str().unwrap(), "--z", "1"]).0, EXIT_INPUT);
    assert_eq!(run(&["--help"]).0, EXIT_PASS);
}

#[test]
fn verification_failure_exits_one() {
    // a quadrature too coarse to resolve the arc cannot reproduce the count
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "v.json", r#"{"L":1, "entries":[{"n":0,"re":[[-1.9]],"im":[[0.0]]},{"n":3,"re":[[1.7]],"im":[[0.0]]}]}"#);
    let (code, out, _) = run(&["levinson", "--potential", p.to_str().unwrap(), "--quad-points", "1", "--eps-grid", "0.4,0.3,0.2"]);
    assert_eq!(code, EXIT_FAIL, "{out}");
    assert_eq!(json(&out)["pass"], Value::Bool(false));
}

#[test]
fn sweep_is_sorted_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "b_single.json", SINGLE);
    write(dir.path(), "a_free.json", FREE);
    write(dir.path(), "notes.txt", "ignored");
    let args = ["sweep", "--potential-dir", dir.path().to_str().unwrap(), "--quad-points", "128"];
    let (code, first, _) = run(&args);
    assert_eq!(code, EXIT_PASS, "{first}");
    let r = json(&first);
    let files: Vec<&str> = r["results"].as_array().unwrap().iter().map(|x| x["file"].as_str().unwrap()).collect();
    assert!(files[0].ends_with("a_free.json") && files[1].ends_with("b_single.json"));
    assert_eq!(r["summary"]["passed"], 2);
    let (_, second, _) = run(&args);
    assert_eq!(first, second);

    write(dir.path(), "c_bad.json", "not json");
    let (code, out, _) = run(&args);
    assert_eq!(code, EXIT_INPUT);
    assert_eq!(json(&out)["summary"]["input_errors"], 1);
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "v.json", r#"{"L":2, "entries":[{"n":0,"re":[[1.0,0.5],[0.5,-1.2]],"im":[[0.0,0.3],[-0.3,0.0]]},{"n":1,"re":[[0.4,0.0],[0.0,0.9]],"im":[[0.0,0.0],[0.0,0.0]]}]}"#);
    let args = ["levinson", "--potential", p.to_str().unwrap(), "--quad-points", "256"];
    let a = run(&args).1;
    let b = run(&args).1;
    assert_eq!(a, b);
}

#[test]
fn config_file_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "v.json", SINGLE);
    let cfg = write(dir.path(), "cfg.json", r#"{"quad_points": 64, "eps_grid": [0.04, 0.02, 0.01]}"#);
    let (code, out, _) = run(&["levinson", "--potential", p.to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, EXIT_PASS);
    assert_eq!(json(&out)["contour"]["integrals"][0]["nodes"], 128);
    let bad = write(dir.path(), "bad.json", r#"{"quad_points": 0}"#);
    assert_eq!(run(&["levinson", "--potential", p.to_str().unwrap(), "--config", bad.to_str().unwrap()]).0, EXIT_INPUT);
}

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hilbert16"))
        .args(args)
        .env("HILBERT16_LOG", "quiet")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    doc["report"].clone()
}

#[test]
fn bounds_from_degree() {
    let r = report(&run(&["bounds", "--degree", "2"]));
    assert_eq!(r["quartic_bound"], 4);
    assert_eq!(r["master_bound"], 4);
    let r = report(&run(&["bounds", "--degree", "4"]));
    assert_eq!(r["quartic_bound"], 181);
}

#[test]
fn degree_one_is_a_usage_error() {
    let out = run(&["bounds", "--degree", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n > 1"));
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(run(&["bounds", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["contacts"]).status.code(), Some(2));
    let vdp = fixture("vdp.json");
    assert_eq!(run(&["contacts", "--system", vdp.to_str().unwrap(), "--window", "3:-3"]).status.code(), Some(2));
}

#[test]
fn van_der_pol_bounds_pipeline() {
    let vdp = fixture("vdp.json");
    let r = report(&run(&["bounds", "--system", vdp.to_str().unwrap(), "--window", "-4:4", "--grid", "512"]));
    assert_eq!(r["M"], 2);
    assert_eq!(r["N"], 2);
    assert_eq!(r["master_bound"], 17);
    assert_eq!(r["behaviors"], 4);
}

#[test]
fn van_der_pol_contacts() {
    let vdp = fixture("vdp.json");
    let r = report(&run(&["contacts", "--system", vdp.to_str().unwrap(), "--window", "-3:3"]));
    assert_eq!(r["N"], 2);
    let mut pts: Vec<(f64, f64)> = r["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| (p["x"].as_f64().unwrap(), p["y"].as_f64().unwrap()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert!((pts[0].0 + 1.0).abs() < 1e-8 && (pts[0].1 - 2.0 / 3.0).abs() < 1e-8);
    assert!((pts[1].0 - 1.0).abs() < 1e-8 && (pts[1].1 + 2.0 / 3.0).abs() < 1e-8);
}

#[test]
fn degenerate_divergence_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("linear.json");
    std::fs::write(&sys, r#"{"P": "x - y", "Q": "x"}"#).unwrap();
    assert_eq!(run(&["divcurve", "--system", sys.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn van_der_pol_oracle() {
    let vdp = fixture("vdp.json");
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("orbit.csv");
    let out = run(&["oracle", "--system", vdp.to_str().unwrap(), "--section", "x=0+", "--orbit-csv", csv.to_str().unwrap()]);
    let r = report(&out);
    assert!((r["period"].as_f64().unwrap() - 6.663).abs() < 1e-3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("period 6.66"));
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("t,x,y\n"));
    assert_eq!(text.lines().count(), 4098);
}

#[test]
fn cubic_circle_descent_writes_csv() {
    let cc = fixture("cubic_circle.json");
    let dir = tempfile::tempdir().unwrap();
    let path_csv = dir.path().join("path.csv");
    let trace_csv = dir.path().join("trace.csv");
    let out = run(&[
        "descend",
        "--system",
        cc.to_str().unwrap(),
        "--init",
        "circle:1.3",
        "--eps",
        "0",
        "--K",
        "256",
        "--h2-precondition",
        "--path-csv",
        path_csv.to_str().unwrap(),
        "--trace-csv",
        trace_csv.to_str().unwrap(),
    ]);
    let r = report(&out);
    let run0 = &r["runs"][0];
    assert!(run0["energy"].as_f64().unwrap() <= 1e-10);
    assert_eq!(run0["winding"], 1);
    let path = std::fs::read_to_string(path_csv).unwrap();
    assert_eq!(path.lines().count(), 257);
    for line in path.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!((f[2].hypot(f[3]) - 1.0).abs() <= 1e-3);
    }
    assert!(std::fs::read_to_string(trace_csv).unwrap().starts_with("run,iter,energy,grad_norm,winding,step\n"));
}

#[test]
fn census_from_indices() {
    let r = report(&run(&["census", "--indices", "0,1,0"]));
    assert_eq!(r["alternating_sum"], 1);
    let r = report(&run(&["census", "--indices", "0,1"]));
    assert_eq!(r["alternating_sum"], 0);
    assert_eq!(r["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn census_from_descents() {
    let cc = fixture("cubic_circle.json");
    let r = report(&run(&[
        "census", "--system", cc.to_str().unwrap(), "--K", "64", "--eps", "1e-3", "--starts", "3", "--h2-precondition",
    ]));
    assert_eq!(r["alternating_sum"], 1, "{r}");
}

#[test]
fn outputs_validate_and_are_reproducible() {
    let vdp = fixture("vdp.json");
    let cc = fixture("cubic_circle.json");
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["bounds", "--degree", "3"],
        vec!["bounds", "--table", "6"],
        vec!["bounds", "--system", vdp.to_str().unwrap(), "--window", "-4:4", "--grid", "256"],
        vec!["divcurve", "--system", vdp.to_str().unwrap(), "--window", "-4:4", "--grid", "128"],
        vec!["contacts", "--system", vdp.to_str().unwrap(), "--window", "-3:3", "--jobs", "2"],
        vec!["oracle", "--system", cc.to_str().unwrap(), "--x0", "0.5,0", "--section", "y=0+"],
        vec!["descend", "--system", cc.to_str().unwrap(), "--K", "64", "--noise", "0.05", "--starts", "2", "--seed", "4"],
        vec!["descend", "--system", cc.to_str().unwrap(), "--K", "64", "--h2-precondition", "--schedule", "1e-2,1e-3", "--amp", "80"],
        vec!["census", "--indices", "0"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let files: Vec<PathBuf> = (0..2).map(|r| dir.path().join(format!("{i}-{r}.json"))).collect();
        for f in &files {
            let mut full = args.clone();
            full.extend(["--out", f.to_str().unwrap()]);
            let out = run(&full);
            assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        }
        let a = std::fs::read(&files[0]).unwrap();
        assert_eq!(a, std::fs::read(&files[1]).unwrap(), "{args:?} is not reproducible");
        let v = run(&["validate", files[0].to_str().unwrap()]);
        assert!(v.status.success(), "{args:?}: {}", String::from_utf8_lossy(&v.stderr));
    }
}

#[test]
fn validate_rejects_foreign_json() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("x.json");
    std::fs::write(&f, r#"{"kind": "bounds", "version": 1, "report": {"n": 2}}"#).unwrap();
    assert_eq!(run(&["validate", f.to_str().unwrap()]).status.code(), Some(1));
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paramsym"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("PARAMSYM_THREADS")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn column(csv: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    let i = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().parse().unwrap()).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn circle_trace_matches_the_eigensum() {
    let dir = tempfile::tempdir().unwrap();
    let op = fixture("circle_laplacian.json");
    let r = run(dir.path(), &["trace", "--operator", s(&op), "--terms", "3"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stdout));
    let csv = dir.path().join("trace.csv");
    let (mus, oracle, res) = (column(&csv, "mu"), column(&csv, "oracle_re"), column(&csv, "residual"));
    assert_eq!(mus.len(), 21);
    for ((mu, o), r) in mus.iter().zip(&oracle).zip(&res) {
        let exact = std::f64::consts::PI / mu / (std::f64::consts::PI * mu).tanh();
        assert!((o - exact).abs() <= 1e-12 * exact);
        assert!(*r <= 1e-12 * exact, "residual {r:e} at {mu}");
    }
    let t = json(&dir.path().join("trace.json"));
    assert_eq!(t["variable"], "lambda");
    assert_eq!(t["m"], 2);
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["command"], "trace");
    assert_eq!(m["verdict"], "pass");
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert!(m["constants"]["command"]["resolvent_options"]["sector"].is_number());
}

#[test]
fn log_model_residual_decays() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), &["trace", s(&fixture("log_model.json")), "--terms", "1"]);
    assert_eq!(r.status.code(), Some(0));
    let res = column(&dir.path().join("trace.csv"), "residual");
    assert!(res.windows(2).all(|w| w[1] < w[0]));
    assert!(res.last().unwrap() < &(res[0] * 1e-6));
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    let r = run(dir.path(), &["expand", s(&missing)]);
    assert_eq!(r.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(err["error"], "IoError");
    assert_eq!(err["path"], s(&missing));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn grammar_errors_carry_a_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"dim": 1, "expr": {"node": "sum", "children": [{"node": "xi", "index": 3}]}}"#).unwrap();
    let r = run(dir.path(), &["oracle", "quad", s(&bad)]);
    assert_eq!(r.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(err["error"], "GrammarError");
    assert_eq!(err["location"], "expr.children[0].index");
}

#[test]
fn compare_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let circle = dir.path().join("circle");
    run(&circle, &["trace", "--operator", s(&fixture("circle_laplacian.json"))]);
    let r = run(&circle, &["--tol", "1e-6", "compare", s(&circle.join("trace.json")), s(&circle.join("trace.csv"))]);
    assert_eq!(r.status.code(), Some(0));
    assert_eq!(json(&circle.join("compare.json"))["passed"], true);

    // Truncation error of the log model is far above 1e-6.
    let log = dir.path().join("log");
    run(&log, &["trace", s(&fixture("log_model.json")), "--terms", "1"]);
    let r = run(&log, &["compare", s(&log.join("trace.json")), s(&log.join("trace.csv"))]);
    assert_eq!(r.status.code(), Some(2));

    let r = run(&log, &["--grid", "10,100,4", "compare", s(&log.join("trace.json")), s(&log.join("trace.csv"))]);
    assert_eq!(r.status.code(), Some(1));
    assert_eq!(serde_json::from_slice::<Value>(&r.stdout).unwrap()["error"], "GridMismatch");
}

#[test]
fn zero_expansion_against_zero_oracle_passes() {
    let dir = tempfile::tempdir().unwrap();
    let exp = dir.path().join("zero.json");
    let csv = dir.path().join("zero.csv");
    fs::write(&exp, r#"{"variable": "mu", "error_exponent": -3, "terms": []}"#).unwrap();
    fs::write(&csv, "mu,oracle_re,oracle_im\n10,0,0\n100,0,0\n1000,0,0\n").unwrap();
    let r = run(dir.path(), &["compare", s(&exp), s(&csv)]);
    assert_eq!(r.status.code(), Some(0));
    let c = json(&dir.path().join("compare.json"));
    assert_eq!(c["max_relative_residual"], 0.0);
    assert!(c["residual_slope"].is_null());
}

#[test]
fn more_terms_steepen_the_residual_by_two() {
    let dir = tempfile::tempdir().unwrap();
    let slope = |n: &str| {
        let out = dir.path().join(n);
        run(&out, &["trace", s(&fixture("log_model.json")), "--terms", n]);
        let r = run(&out, &["--tol", "1", "compare", s(&out.join("trace.json")), s(&out.join("trace.csv"))]);
        assert_eq!(r.status.code(), Some(0));
        json(&out.join("compare.json"))["residual_slope"].as_f64().unwrap()
    };
    let (s1, s3) = (slope("1"), slope("3"));
    assert!((s1 - s3 - 2.0).abs() <= 0.25, "slopes {s1} and {s3}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let r = run(out, &["expand", s(&fixture("schroedinger.json")), "--terms", "3", "--verify"]);
        assert_eq!(r.status.code(), Some(0));
    }
    for f in ["expansion.json", "remainder.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let (ma, mb) = (json(&a.join("manifest.json")), json(&b.join("manifest.json")));
    assert_eq!(ma["outputs"][0]["sha256"], mb["outputs"][0]["sha256"]);
}

#[test]
fn parametrix_defect_decays() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), &["parametrix", s(&fixture("schroedinger.json")), "--terms", "3"]);
    assert_eq!(r.status.code(), Some(0));
    let p = json(&dir.path().join("parametrix.json"));
    assert!(p["defect"]["slope_right"].as_f64().unwrap() <= -2.5);
    assert_eq!(column(&dir.path().join("defect.csv"), "size").len(), 21);
}

#[test]
fn verification_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), &["verify", s(&fixture("log_model.json")), "--family", "WeakTilde_10"]);
    assert_eq!(r.status.code(), Some(0));
    // Zero lies in every class, while a zero principal symbol is never elliptic.
    let r = run(dir.path(), &["verify", s(&fixture("zero.json")), "--elliptic", "weaktilde"]);
    assert_eq!(r.status.code(), Some(2), "{}", String::from_utf8_lossy(&r.stdout));
}

#[test]
fn oracle_fit_recovers_the_log_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["--grid", "10,1000,5", "oracle", "quad", s(&fixture("log_model.json"))]);
    let quad = dir.path().join("quad.csv");
    run(dir.path(), &["oracle", "fit", s(&quad), "--basis", "log-2,-2,-3"]);
    let f = json(&dir.path().join("fit.json"));
    let c = f["fit"]["coefficients"][0].as_f64().unwrap();
    assert!((c - std::f64::consts::FRAC_1_PI).abs() <= 0.01 * std::f64::consts::FRAC_1_PI, "{c}");
}

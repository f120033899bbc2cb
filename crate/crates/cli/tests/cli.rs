use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

fn tdho(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tdho"));
    cmd.args(args).env_remove("TDHO_OUT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = tdho(args, &[]);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(k).unwrap().parse().unwrap())
        .collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn decoupled_invariant_drift_is_tiny() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    run_ok(&["invariants", "--scenario", scenario("decoupled").to_str().unwrap(), "--out", out]);
    let g = fs::read_to_string(tmp.path().join("invariants/g.csv")).unwrap();
    let drift = column(&g, "drift");
    assert!(drift.len() > 100);
    assert!(drift.iter().all(|d| *d < 1e-12), "max {:e}", drift.iter().fold(0.0f64, |a, b| a.max(*b)));
    let g_col = column(&g, "G");
    assert!((g_col[0] - 3.0).abs() < 1e-15);

    let m = json(&tmp.path().join("invariants/manifest.json"));
    assert_eq!(m["task"], "invariants");
    assert_eq!(m["settings"]["ode_tol"], 1e-14);
    assert_eq!(m["defaults"]["tolerances"]["ode_tol"], 1e-10);
    assert_eq!(m["chain"]["n"], 3);
}

#[test]
fn malformed_scenario_exits_one_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    let text = fs::read_to_string(scenario("constant-pair")).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["chain"]["n"] = Value::from(3);
    fs::write(&bad, v.to_string()).unwrap();
    let out_dir = tmp.path().join("out");
    let out = tdho(
        &["simulate", "--scenario", bad.to_str().unwrap(), "--out", out_dir.to_str().unwrap()],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_dir.exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("n = 3"));

    let missing = tdho(&["simulate", "--scenario", "/nonexistent.json"], &[]);
    assert_eq!(missing.status.code(), Some(1));
    let flag = tdho(
        &["simulate", "--scenario", scenario("decoupled").to_str().unwrap(), "--tol", "1.0"],
        &[],
    );
    assert_eq!(flag.status.code(), Some(1));
    let pair_only = tdho(
        &["oracle2d", "--scenario", scenario("decoupled").to_str().unwrap(), "--out", out_dir.to_str().unwrap()],
        &[],
    );
    assert_eq!(pair_only.status.code(), Some(1));
    assert!(!out_dir.exists());
}

#[test]
fn numerical_failure_exits_two_with_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario("constant-pair")).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    // A packet far too wide for the grid trips the boundary guard.
    v["tolerances"] = serde_json::json!({ "grid": { "n": 32, "extent": 6.0 } });
    v["packet"]["spread"] = serde_json::json!([2.0, 2.0]);
    let path = tmp.path().join("wide.json");
    fs::write(&path, v.to_string()).unwrap();
    let out_dir = tmp.path().join("out");
    let out = tdho(
        &["oracle2d", "--scenario", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    let diag = json(&out_dir.join("oracle2d/error.json"));
    assert_eq!(diag["kind"], "numerical");
    assert!(diag["error"].as_str().unwrap().contains("boundary"));
    assert!(!out_dir.join("oracle2d/manifest.json").exists());
}

#[test]
fn runs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let s = scenario("random-chain");
    for k in ["a", "b"] {
        let d = tmp.path().join(k);
        run_ok(&["report", "--scenario", s.to_str().unwrap(), "--out", d.to_str().unwrap()]);
    }
    let (a, b) = (tree(&tmp.path().join("a")), tree(&tmp.path().join("b")));
    assert!(a.len() >= 8);
    assert_eq!(a, b);

    let c = tmp.path().join("c");
    run_ok(&["simulate", "--scenario", s.to_str().unwrap(), "--out", c.to_str().unwrap(), "--seed", "43"]);
    let changed = fs::read(c.join("simulate/u.csv")).unwrap();
    let original = fs::read(tmp.path().join("a/simulate/u.csv")).unwrap();
    assert_ne!(changed, original);
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tdho(
        &["simulate", "--scenario", scenario("decoupled").to_str().unwrap(), "--parallel", "2"],
        &[("TDHO_OUT", tmp.path())],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("decoupled/simulate");
    let u = fs::read_to_string(dir.join("u.csv")).unwrap();
    assert!(u.starts_with("t,u_1,u_2,u_3,du_1,du_2,du_3\n"));
    // 17 significant digits.
    let first = u.lines().nth(1).unwrap().split(',').nth(1).unwrap();
    assert_eq!(first, "1.0000000000000000e0");
    assert_eq!(json(&dir.join("manifest.json"))["settings"]["parallel"], 2);
}

#[test]
fn ermakov_and_gaussian_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let s = scenario("decoupled");
    run_ok(&["ermakov", "--scenario", s.to_str().unwrap(), "--out", out]);
    run_ok(&["gaussian", "--scenario", s.to_str().unwrap(), "--out", out]);
    let e = fs::read_to_string(tmp.path().join("ermakov/ermakov_2.csv")).unwrap();
    // Ω² = 4: ρ ≡ 1/√2 and θ = 2t.
    let rho = column(&e, "rho");
    assert!(rho.iter().all(|r| (r - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10));
    let m = json(&tmp.path().join("ermakov/manifest.json"));
    assert!(m["metrics"]["residual_1"].as_f64().unwrap() < 1e-6);
    let g = json(&tmp.path().join("gaussian/manifest.json"));
    assert!(g["metrics"]["g_drift"].as_f64().unwrap() < 1e-8);
    assert!(g["metrics"]["min_uncertainty_eigenvalue"].as_f64().unwrap() > -1e-10);
    let header = fs::read_to_string(tmp.path().join("gaussian/g.csv")).unwrap();
    assert!(header.starts_with("t,Re<G>,Im<G>,<GG+>\n"));
}

#[test]
fn pipeline_on_driven_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    run_ok(&["pipeline", "--scenario", scenario("driven-pair").to_str().unwrap(), "--out", out]);
    let report = json(&tmp.path().join("pipeline/report.json"));
    let f = report["fidelity"].as_f64().unwrap();
    assert!(f > 0.995, "fidelity {f}");
    let m = json(&tmp.path().join("pipeline/manifest.json"));
    let ratio = m["metrics"]["lam_derived_over_printed"].as_f64().unwrap();
    assert!((ratio + std::f64::consts::SQRT_2).abs() < 1e-8);
    let coef = fs::read_to_string(tmp.path().join("pipeline/coefficients.csv")).unwrap();
    let (a, b) = (column(&coef, "lam"), column(&coef, "lam_closed"));
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
}

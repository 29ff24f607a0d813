use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn pfdyn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfdyn"))
        .args(args)
        .current_dir(dir)
        .env_remove("PFDYN_THREADS")
        .output()
        .expect("binary runs")
}

fn schema() -> jsonschema::JSONSchema {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schemas/report.schema.json");
    let text = std::fs::read_to_string(path).unwrap();
    jsonschema::JSONSchema::options()
        .with_draft(jsonschema::Draft::Draft202012)
        .compile(&serde_json::from_str(&text).unwrap())
        .unwrap()
}

fn valid_report(bytes: &[u8]) -> Value {
    let v: Value = serde_json::from_slice(bytes).expect("report is JSON");
    let s = schema();
    if let Err(errors) = s.validate(&v) {
        let errors: Vec<String> = errors.map(|e| format!("{e} at {}", e.instance_path)).collect();
        panic!("{errors:#?}");
    }
    v
}

#[test]
fn schema_rejects_malformed_reports() {
    let s = schema();
    let bad = serde_json::json!({"format": "pfdyn-report", "version": 1, "command": "hermite"});
    assert!(!s.is_valid(&bad));
    let wrong_verb = serde_json::json!({
        "format": "pfdyn-report", "version": 1, "command": "plot", "seed": 0, "threads": 1,
        "config": {"seed": 0, "threads": null, "command": {"verb": "plot"}}, "result": {}
    });
    assert!(!s.is_valid(&wrong_verb));
}

fn read_report(path: &Path) -> Value {
    valid_report(&std::fs::read(path).unwrap())
}

#[test]
fn hermite_writes_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let out = pfdyn(dir.path(), &["hermite", "--n", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("zeros.csv")).unwrap();
    assert!(csv.contains("-0.7071067811865476"));
    assert!(csv.contains(",0.7071067811865476,"));
    let r = valid_report(&out.stdout);
    assert_eq!(r["command"], "hermite");
    assert_eq!(r["config"]["command"]["n"], 2);
}

#[test]
fn hermite_laws() {
    let dir = tempfile::tempdir().unwrap();
    let out = pfdyn(dir.path(), &["hermite", "--n", "100", "--laws", "laws.json", "--report", "r.json"]);
    assert_eq!(out.status.code(), Some(0));
    read_report(&dir.path().join("r.json"));
    let laws: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("laws.json")).unwrap()).unwrap();
    assert_eq!(laws.as_array().unwrap().len(), 2);
    let small = pfdyn(dir.path(), &["hermite", "--n", "5", "--laws", "l.json"]);
    assert_eq!(small.status.code(), Some(2));
    let too_big = pfdyn(dir.path(), &["hermite", "--n", "501"]);
    assert_eq!(too_big.status.code(), Some(2));
}

#[test]
fn analyze_logistic() {
    let dir = tempfile::tempdir().unwrap();
    let out = pfdyn(dir.path(), &["analyze", "--system", "logistic", "--alpha", "1", "--delta", "0.01"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = valid_report(&out.stdout);
    let zeros = r["result"]["search"]["zeros"].as_array().unwrap();
    assert_eq!(zeros.len(), 2);
    assert!(zeros[0]["location"][0].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(zeros[0]["classification"], "repulsive");
    assert_eq!(zeros[1]["location"][0], 1.0);
    assert_eq!(zeros[1]["classification"], "attractive");
    assert_eq!(r["system"]["params"]["alpha"], 1.0);
}

#[test]
fn analyze_lorenz_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = pfdyn(dir.path(), &["analyze", "--system", "lorenz", "--out", "a.json"]);
    assert_eq!(out.status.code(), Some(0));
    let r = read_report(&dir.path().join("a.json"));
    assert_eq!(r["result"]["search"]["zeros"].as_array().unwrap().len(), 3);
    assert_eq!(r["result"]["faults"].as_array().unwrap().len(), 3);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["analyze", "--delta", "0.01"],
        &["analyze", "--system", "missing.json"],
        &["analyze", "--system", "harmonic", "--sigma", "1"],
        &["analyze", "--system", "logistic", "--box", "0,1;0,1"],
        &["simulate", "--system", "harmonic", "--steps", "5", "--start", "1"],
        &["simulate", "--system", "harmonic", "--steps", "5", "--start", "1,0", "--delta", "-1"],
        &["ulam", "--system", "logistic", "--cells", "0"],
        &["lorenz", "--rho", "0.5", "--steps", "0"],
        &["lorenz", "--covector", "0,0,0", "--steps", "0"],
        &["saddle", "--system", "logistic", "--y", "1", "--n", "0"],
        &["frobnicate"],
        &["hermite", "--bogus"],
        &["--threads", "0", "hermite", "--n", "2"],
    ];
    for args in cases {
        let out = pfdyn(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let usage = pfdyn(dir.path(), &["analyze"]);
    assert!(String::from_utf8_lossy(&usage.stderr).contains("Usage"));
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = pfdyn(
        dir.path(),
        &["simulate", "--system", "lorenz", "--delta", "0.5", "--steps", "100", "--start", "1e6,1e6,1e6"],
    );
    assert_eq!(out.status.code(), Some(3));
    let out = pfdyn(
        dir.path(),
        &["ulam", "--system", "harmonic", "--delta", "0.1", "--cells", "8", "--max-iters", "1"],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_orbit_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = pfdyn(
        dir.path(),
        &["simulate", "--system", "harmonic", "--delta", "0.001", "--steps", "16000", "--start", "1,0", "--out", "o.csv"],
    );
    assert_eq!(out.status.code(), Some(0));
    let r = valid_report(&out.stdout);
    let period = r["result"]["cycle"]["period_time"].as_f64().unwrap();
    assert!((period - std::f64::consts::TAU).abs() < 0.01 * std::f64::consts::TAU);
    let csv = std::fs::read_to_string(dir.path().join("o.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("step,p,q"));
    assert_eq!(lines.next(), Some("0,1,0"));
    assert_eq!(lines.next(), Some("1,1,0.001"));
    assert_eq!(csv.lines().count(), 16002);
}

#[test]
fn custom_system_file() {
    let dir = tempfile::tempdir().unwrap();
    let sys = r#"{"dim": 1, "vars": ["x"], "components": [[{"coef": "k", "powers": [1]}, {"coef": "-k", "powers": [3]}]], "params": {"k": 2}}"#;
    std::fs::write(dir.path().join("cubic.json"), sys).unwrap();
    let out = pfdyn(dir.path(), &["analyze", "--system", "cubic.json", "--box", "-2,2", "--delta", "0.01"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = valid_report(&out.stdout);
    assert_eq!(r["result"]["search"]["zeros"].as_array().unwrap().len(), 3);
    let no_box = pfdyn(dir.path(), &["analyze", "--system", "cubic.json"]);
    assert_eq!(no_box.status.code(), Some(2));
}

fn read_density(path: &Path) -> (Vec<u64>, Vec<f64>) {
    let b = std::fs::read(path).unwrap();
    assert_eq!(&b[..4], b"PFDU");
    let u32_at = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().unwrap());
    let u64_at = |i: usize| u64::from_le_bytes(b[i..i + 8].try_into().unwrap());
    let f64_at = |i: usize| f64::from_le_bytes(b[i..i + 8].try_into().unwrap());
    assert_eq!(u32_at(4), 1);
    let d = u32_at(8) as usize;
    let cells: Vec<u64> = (0..d).map(|k| u64_at(12 + 8 * k)).collect();
    let mut at = 12 + 8 * d + 16 * d;
    let count = u64_at(at) as usize;
    at += 8;
    let w = (0..count).map(|k| f64_at(at + 8 * k)).collect();
    assert_eq!(b.len(), at + 8 * count);
    (cells, w)
}

#[test]
fn ulam_density_and_marginals() {
    let dir = tempfile::tempdir().unwrap();
    let sys = r#"{"dim": 1, "components": [[{"coef": 3, "powers": [1]}, {"coef": -4, "powers": [2]}]]}"#;
    std::fs::write(dir.path().join("full.json"), sys).unwrap();
    let args = [
        "ulam", "--system", "full.json", "--delta", "1", "--box", "0,1", "--cells", "128", "--samples", "16",
        "--seed", "7", "--report", "u.json",
    ];
    let out = pfdyn(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_report(&dir.path().join("u.json"));
    assert_eq!(r["seed"], 7);
    let (cells, w) = read_density(&dir.path().join("density.bin"));
    assert_eq!(cells, vec![128]);
    assert_eq!(w.len(), 128);
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(w[0] > w[64] && w[127] > w[64]);
    let m = std::fs::read_to_string(dir.path().join("marginals.csv")).unwrap();
    assert_eq!(m.lines().next(), Some("axis,cell,center,mass"));
    assert_eq!(m.lines().count(), 129);

    let first = std::fs::read(dir.path().join("density.bin")).unwrap();
    let out = pfdyn(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(first, std::fs::read(dir.path().join("density.bin")).unwrap());
}

#[test]
fn threads_do_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["ulam", "--system", "harmonic", "--delta", "0.05", "--cells", "16", "--samples", "4", "--policy", "absorbing"];
    let mut one = base.to_vec();
    one.extend(["--threads", "1", "--out", "one.bin", "--report", "one.json"]);
    let mut four = base.to_vec();
    four.extend(["--threads", "4", "--out", "four.bin", "--report", "four.json"]);
    assert_eq!(pfdyn(dir.path(), &one).status.code(), Some(0));
    let env_run = Command::new(env!("CARGO_BIN_EXE_pfdyn"))
        .args(&four[..four.len() - 6])
        .args(["--out", "four.bin", "--report", "four.json"])
        .env("PFDYN_THREADS", "4")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(env_run.status.code(), Some(0));
    let a = std::fs::read(dir.path().join("one.bin")).unwrap();
    let b = std::fs::read(dir.path().join("four.bin")).unwrap();
    assert_eq!(a, b);
    let r = read_report(&dir.path().join("four.json"));
    assert_eq!(r["threads"], 4);
    assert_eq!(r["config"]["threads"], 4);
}

#[test]
fn saddle_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = pfdyn(
        dir.path(),
        &["saddle", "--system", "lorenz", "--y", "0.1,1,1", "--n", "2,2,2", "--out", "s.json"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_report(&dir.path().join("s.json"));
    assert!(!r["result"]["critical"]["points"].as_array().unwrap().is_empty());
    assert!(r["result"]["resolvent_gap"].is_object());
    let ev = r["result"]["yf_hessian"]["eigenvalues"].as_array().unwrap();
    assert_eq!(ev.len(), 3);
}

#[test]
fn lorenz_report_and_ovals() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "lorenz", "--steps", "100000", "--hermite-n", "12", "--report", "l.json", "--csv", "ovals.csv",
    ];
    let out = pfdyn(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_report(&dir.path().join("l.json"));
    let res = &r["result"];
    assert_eq!(res["equilibria"].as_array().unwrap().len(), 3);
    assert_eq!(res["gaps"].as_array().unwrap().len(), 4);
    assert!(res["confrontation"]["crossings"].as_u64().unwrap() > 0);
    let csv = std::fs::read_to_string(dir.path().join("ovals.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("family,index,chi,radius"));
    assert_eq!(csv.lines().count(), 1 + 3 * 12);
    let first = std::fs::read(dir.path().join("l.json")).unwrap();
    assert_eq!(pfdyn(dir.path(), &args).status.code(), Some(0));
    assert_eq!(first, std::fs::read(dir.path().join("l.json")).unwrap());
}

#[test]
fn lorenz_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = pfdyn(dir.path(), &["lorenz", "--steps", "20000", "--hermite-n", "10", "--sweep"]);
    assert_eq!(out.status.code(), Some(0));
    let r = valid_report(&out.stdout);
    assert_eq!(r["result"]["sweep"].as_array().unwrap().len(), 64);
}

#[test]
fn doorstep_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = pfdyn(
        dir.path(),
        &["doorstep", "--system", "harmonic", "--delta", "0.01", "--start", "0.5,0", "--cells", "1", "--out", "d.csv"],
    );
    assert_eq!(out.status.code(), Some(0));
    let r = valid_report(&out.stdout);
    assert_eq!(r["result"]["t_delta"], 0.0);
    assert_eq!(r["result"]["visited_cells"], 1);
    let csv = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert_eq!(csv, "cell,first_visit_step\n0,0\n");
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lyasco"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn demo_three_bus_flips_stability() {
    let o = run(&["demo", "three-bus"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let line = text
        .lines()
        .find(|l| l.starts_with("stability"))
        .expect("stability row");
    let labels: Vec<&str> = line.split_whitespace().skip(1).collect();
    assert_eq!(labels, ["Unstable", "Stable"]);
    let cost = text
        .lines()
        .find(|l| l.starts_with("cost"))
        .expect("cost row");
    let costs: Vec<f64> = cost
        .split_whitespace()
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(costs[1] > costs[0]);
}

#[test]
fn demo_pendulum_runs() {
    let o = run(&["demo", "pendulum"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("status Optimal"));
}

#[test]
fn certify_pendulum_reports_positive_vmin() {
    let file = data("pendulum.json");
    let o = run(&["certify", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["p_matrix"].as_array().unwrap().len(), 2);
    assert!(v["sector"]["beta"].as_f64().unwrap() > 0.0);
    assert!(v["v_min"].as_f64().unwrap() > 0.0);
}

#[test]
fn malformed_input_reports_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data("pendulum.json")).unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, text.replace("\"tc\": 0.1", "\"tc\": \"soon\"")).unwrap();
    let o = run(&["certify", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/scenario/tc"), "{}", stderr(&o));

    std::fs::write(
        &bad,
        text.replace("\"damping\": 1.0", "\"damping\": 1.0, \"mass\": 2.0"),
    )
    .unwrap();
    let o = run(&["certify", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/pendulum/mass"), "{}", stderr(&o));

    std::fs::write(&bad, "{\"kind\": ").unwrap();
    let o = run(&["certify", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn infeasible_problem_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data("pendulum.json")).unwrap();
    let file = dir.path().join("hard.json");
    std::fs::write(&file, text.replace("\"pulse\": -14.0", "\"pulse\": 18.0")).unwrap();
    let o = run(&["solve-sco", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn solution_round_trips_and_output_is_deterministic() {
    let file = data("pendulum.json");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = dir.path().to_str().unwrap();
        let o = run(&["--out", out, "solve-sco", file.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let sol = dir.path().join("solution.json");
        let o = run(&[
            "--out",
            out,
            "simulate",
            file.to_str().unwrap(),
            "--from",
            sol.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).contains("label Stable"));
    }
    for name in ["solution.json", "trajectory.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between runs");
    }
    let csv = std::fs::read_to_string(a.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,x1,x2"));
}

#[test]
fn numbers_have_twelve_significant_digits() {
    let file = data("pendulum.json");
    let o = run(&["certify", file.to_str().unwrap()]);
    let text = stdout(&o);
    for tok in text.split(|c: char| !(c.is_ascii_digit() || c == '.' || c == 'e' || c == '-')) {
        let digits: String = tok
            .split('e')
            .next()
            .unwrap()
            .chars()
            .filter(|c| c.is_ascii_digit())
            .collect();
        let trimmed = digits.trim_start_matches('0');
        assert!(trimmed.len() <= 12, "{tok}");
    }
}

#[test]
fn verify_pendulum_has_no_counterexamples() {
    let file = data("pendulum.json");
    let o = run(&["verify", file.to_str().unwrap(), "--cases", "30"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("counterexamples 0"));
}

#[test]
fn thread_cap_is_validated() {
    let file = data("pendulum.json");
    let o = bin()
        .env("LYASCO_THREADS", "zero")
        .args(["certify", file.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin()
        .env("LYASCO_THREADS", "2")
        .args(["certify", file.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn solve_sco_rejects_certificate_only_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("poly.json");
    std::fs::write(
        &file,
        r#"{"kind": "polynomial",
            "system": {"nvars": 1, "rhs": [{"nvars": 1, "terms": [{"exponents": [1], "coeff": -1.0}]}]},
            "equilibrium": [0.0],
            "region": {"facet_normals": [[1.0], [-1.0]], "facet_offsets": [1.0, 1.0]}}"#,
    )
    .unwrap();
    let o = run(&["certify", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["v_min"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    let o = run(&["solve-sco", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

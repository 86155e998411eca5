use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_arma-rcd"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
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

fn write_config(dir: &Path, name: &str, agents: &str) -> PathBuf {
    let text = format!(
        r#"{{
  "version": 1,
  "graph": {{"type": "path", "n": 2, "weights": {{"rule": "metropolis"}}}},
  "agents": [
    {{"signal": {{"ar": [0.5], "gain": 1.0}}, "noise": {{"gain": 1.0}}}},
    {agents}
  ]
}}"#
    );
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn validate_shipped_configs() {
    let o = run(&["validate", config("regime_a.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("agent 3"), "{text}");
    for name in ["regime_b.json", "dc_white.json"] {
        assert_eq!(run(&["validate", config(name).to_str().unwrap()]).status.code(), Some(0));
    }
}

#[test]
fn validate_reports_cancellation_and_repeated_pole() {
    let dir = tempfile::tempdir().unwrap();
    // Signal pole 0.5 against signal zero 0.5.
    let cancel = write_config(
        dir.path(),
        "cancel.json",
        r#"{"signal": {"ar": [0.5], "ma": [-0.5], "gain": 1.0}, "noise": {"gain": 1.0}}"#,
    );
    let o = run(&["validate", cancel.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("cancels"), "{}", stdout(&o));

    // (1 - 0.5 w)^2.
    let repeated = write_config(
        dir.path(),
        "repeated.json",
        r#"{"signal": {"ar": [1.0, -0.25], "gain": 1.0}, "noise": {"gain": 1.0}}"#,
    );
    let o = run(&["validate", repeated.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("coincide"), "{}", stdout(&o));
}

#[test]
fn parse_error_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("broken.json");
    std::fs::write(&p, "{\n  \"version\": 1,\n  \"graph\": oops\n}\n").unwrap();
    let o = run(&["validate", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains(":3:"), "{err}");
    assert!(err.contains("oops"), "{err}");
}

#[test]
fn missing_file_is_a_runtime_failure() {
    let o = run(&["validate", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn analyze_reports() {
    let o = run(&["analyze", config("regime_a.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["regime"], "a");
    assert!((r["alpha"].as_f64().unwrap() - 0.01).abs() < 1e-12);
    assert!((r["beta_m"].as_f64().unwrap() - 0.00125).abs() < 1e-12);
    assert_eq!(r["informative_set"], serde_json::json!([3]));

    let o = run(&["analyze", config("regime_b.json").to_str().unwrap()]);
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["regime"], "b");
    assert_eq!(r["floor_f"], r["floor_m"]);

    let o = run(&["analyze", config("dc_white.json").to_str().unwrap()]);
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    // A = 1, sigma = 2: A^2 / (8 sigma^2).
    assert!((r["beta_f"].as_f64().unwrap() - 1.0 / 32.0).abs() < 1e-12);
}

#[test]
fn simulate_writes_outputs_and_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("regime_b.json");
    let sim = |out: &Path, seed: &str, hyp: &str| {
        run(&[
            "simulate",
            cfg.to_str().unwrap(),
            "--trials",
            "50",
            "--horizon",
            "30",
            "--seed",
            seed,
            "--hypothesis",
            hyp,
            "--out",
            out.to_str().unwrap(),
        ])
    };
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let o = sim(&a, "7", "both");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("max |empirical - predicted|"), "{}", stdout(&o));
    assert_eq!(sim(&b, "7", "both").status.code(), Some(0));
    let csv_a = std::fs::read(a.join("error_curves.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.join("error_curves.csv")).unwrap());
    let header = String::from_utf8_lossy(&csv_a).lines().next().unwrap().to_string();
    assert_eq!(header, "k,agent,p_false_alarm,p_miss,ci_half_width");

    let manifest: Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["trials"], 50);
    for f in manifest["outputs"].as_array().unwrap() {
        assert!(Path::new(f.as_str().unwrap()).exists() || a.join(f.as_str().unwrap()).exists());
    }

    assert_eq!(sim(&c, "7", "H0").status.code(), Some(0));
    let h0 = std::fs::read_to_string(c.join("error_curves.csv")).unwrap();
    assert!(!h0.contains("p_miss"), "{}", h0.lines().next().unwrap());
}

#[test]
fn simulate_rejects_invalid_config() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        "bad.json",
        r#"{"signal": {"ar": [1.0, -0.25], "gain": 1.0}, "noise": {"gain": 1.0}}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["simulate", bad.to_str().unwrap(), "--trials", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.join("error_curves.csv").exists());
}

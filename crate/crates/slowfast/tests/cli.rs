//! The `slowfast` binary end to end.

use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_slowfast"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn simulate(dir: &Path, n: usize) -> PathBuf {
    let path = dir.join(format!("obs{n}.csv"));
    let n_arg = n.to_string();
    stdout(&run(&[
        "simulate", "--model", "constant", "--theta", "1", "--epsilon", "0.01", "--eta", "0.001",
        "--fine-steps", "20000", "--n", &n_arg, "--seed", "5", "--output", path.to_str().unwrap(),
    ]));
    path
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

#[test]
fn simulate_writes_observation_grid() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate(dir.path(), 100);
    let text = std::fs::read_to_string(path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x_1");
    assert_eq!(lines.len(), 102);
    assert!(lines[1].starts_with("0.0000000000000000e0,1.0000000000000000e0"));
    let with_fast = stdout(&run(&["simulate", "--epsilon", "0.1", "--eta", "0.01", "--fine-steps", "100", "--include-fast"]));
    assert!(with_fast.starts_with("t,x_1,y_1\n"));
    assert_eq!(with_fast.lines().count(), 102);
}

#[test]
fn simulate_rejects_bad_n() {
    let o = run(&["simulate", "--epsilon", "0.1", "--eta", "0.01", "--fine-steps", "100", "--n", "7"]);
    assert!(!o.status.success());
}

#[test]
fn hurst_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate(dir.path(), 1000);
    let p = path.to_str().unwrap();
    let h2: Value = serde_json::from_str(&stdout(&run(&["estimate-hurst", "-i", p, "--method", "h2"]))).unwrap();
    assert_eq!(h2["method"], "h2");
    assert!(h2["theoretical_sd"].as_f64().unwrap() > 0.0);
    let h1: Value =
        serde_json::from_str(&stdout(&run(&["estimate-hurst", "-i", p, "--method", "h1", "--epsilon", "0.01"]))).unwrap();
    let est = h1["estimate"].as_f64().unwrap();
    assert!((0.5..1.0).contains(&est), "{est}");
    let csv = stdout(&run(&["estimate-hurst", "-i", p, "--method", "h2", "--format", "csv"]));
    assert!(csv.starts_with("method,estimate,theoretical_sd,in_range,clamped,statistic\nh2,"));
    assert!(!run(&["estimate-hurst", "-i", p, "--method", "h1"]).status.success());
}

#[test]
fn drift_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate(dir.path(), 16);
    let p = path.to_str().unwrap();
    let tfe: Value = serde_json::from_str(&stdout(&run(&[
        "estimate-drift", "-i", p, "--method", "tfe", "--hurst", "0.85", "--epsilon", "0.01", "--theta-box", "0.1:3",
    ])))
    .unwrap();
    let theta = tfe["theta"][0].as_f64().unwrap();
    assert!((0.1..=3.0).contains(&theta));
    assert!(tfe["covariance"][0][0].as_f64().unwrap() > 0.0);
    let scaled = tfe["scaled_covariance"]["matrix"][0][0].as_f64().unwrap();
    assert!((scaled - 0.01 * tfe["covariance"][0][0].as_f64().unwrap()).abs() < 1e-15);
    assert_eq!(tfe["diagnostics"]["starts"].as_array().unwrap().len(), 8);

    let mce: Value = serde_json::from_str(&stdout(&run(&[
        "estimate-drift", "-i", p, "--method", "mce", "--hurst", "0.85", "--xi-cells", "128",
    ])))
    .unwrap();
    assert_eq!(mce["method"], "mce");
    assert!(mce["scaled_covariance"].is_null());
    assert!(!run(&["estimate-drift", "-i", p, "--method", "mce"]).status.success());
    assert!(!run(&["estimate-drift", "-i", p, "--method", "tfe", "--model", "fbm"]).status.success());
}

#[test]
fn variance_matrices() {
    let text = stdout(&run(&["variance", "--n", "16", "--hurst-param", "0.7"]));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("matrix,row,col,value"));
    let rows: Vec<(String, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[3].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.iter().map(|r| r.0.as_str()).collect::<Vec<_>>(), ["M", "Mbar", "MH"]);
    assert!(rows.iter().all(|r| r.1 > 0.0));
}

const SMALL: &str = r#"
model = "constant"
theta0 = [1.0]
hurst = 0.85
scales = [{ epsilon = 0.1, eta = 0.01 }]
n = [10, 20]
replications = 3
fine_steps = 1000
seed = 1
[estimators]
h1 = {}
tfe = {}
"#;

#[test]
fn experiment_writes_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");
    let o = run(&["experiment", "-c", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "2"]);
    stdout(&o);
    for f in ["summary_mean.csv", "summary_sd.csv", "theoretical_sd.csv", "summary.txt", "config.toml"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let cells: Vec<_> = std::fs::read_dir(&out).unwrap().filter_map(|e| e.ok()).filter(|e| e.path().is_dir()).collect();
    assert_eq!(cells.len(), 2);
    for c in cells {
        assert!(c.path().join("raw.csv").is_file());
    }
    let mean = std::fs::read_to_string(out.join("summary_mean.csv")).unwrap();
    assert!(mean.starts_with("estimator,epsilon,eta,n=10,n=20\n"));
}

#[test]
fn experiment_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let typo = dir.path().join("typo.toml");
    std::fs::write(&typo, SMALL.replace("seed = 1", "sed = 1")).unwrap();
    let o = run(&["experiment", "-c", typo.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sed"));

    // dt/eta = 2.5 makes the explicit fast step unstable, so every
    // trajectory overflows and the cells fail.
    let unstable = dir.path().join("unstable.toml");
    std::fs::write(&unstable, SMALL.replace("eta = 0.01", "eta = 0.0004").replace("fine_steps = 1000", "fine_steps = 1000\n")
        .replace("theta0 = [1.0]", "theta0 = [3.0]")).unwrap();
    let o = run(&["experiment", "-c", unstable.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("warning: eta"), "{stderr}");
    assert!(std::fs::read_to_string(out.join("summary_mean.csv")).unwrap().contains("FAIL(3)"));

    let no_out = dir.path().join("no_out.toml");
    std::fs::write(&no_out, SMALL).unwrap();
    assert_eq!(run(&["experiment", "-c", no_out.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn shipped_configs_validate() {
    let dir = repo_root().join("configs");
    let mut count = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = slowfast::ExperimentConfig::load(&path).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.clone().at_paper_scale().validate().unwrap();
            count += 1;
        }
    }
    assert!(count >= 5);
}

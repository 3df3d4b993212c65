use std::path::Path;
use std::process::{Command, Output};

fn kton(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kton"))
        .args(args)
        .env_remove("KTON_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn expected_ktons_query() {
    let o = kton(&["exact", "expected-ktons", "--n", "2", "--N", "3", "--k", "3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "0.25");
}

#[test]
fn joint_query_is_json() {
    let o = kton(&["exact", "joint", "--n", "2", "--N", "2", "--m", "2", "--k", "2", "--r1", "0", "--r2", "1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["estimate"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn simulate_single_type() {
    let o = kton(&["simulate", "--n", "1", "--m", "1", "--trials", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    assert_eq!(v["T"], 1);
    assert_eq!(v["hist"]["1"], 1);
}

#[test]
fn usage_errors_exit_2() {
    let o = kton(&["simulate", "--n", "5", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = kton(&["experiment", "--preset", "er_gumbel_T", "--ladder", "10,100"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ladder"));
    let o = kton(&["experiment", "--preset", "no_such_preset"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_preset_passes() {
    let o = kton(&["experiment", "--preset", "exact_vs_oracle"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], true);
}

#[test]
fn verdict_failure_exits_1() {
    // A single rung cannot show a trend.
    let o = kton(&["experiment", "--preset", "er_gumbel_T", "--ladder", "100", "--trials", "100"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], false);
}

#[test]
fn config_files() {
    let dir = tempfile::tempdir().unwrap();
    let dup = dir.path().join("dup.json");
    std::fs::write(&dup, r#"{"preset": "cor1_exponential", "m": 1, "m": 2}"#).unwrap();
    let o = kton(&["experiment", "--config", dup.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("duplicate"));

    let good = dir.path().join("good.json");
    std::fs::write(&good, r#"{"preset": "cor1_exponential", "ladder": [20, 40, 80], "trials": 200}"#).unwrap();
    let o = kton(&["experiment", "--config", good.to_str().unwrap(), "--trials", "300"]);
    assert!(matches!(o.status.code(), Some(0 | 1)));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["spec"]["trials"], 300);
    assert_eq!(v["spec"]["ladder"], serde_json::json!([20, 40, 80]));
}

fn run_with_output(out: &Path, workers: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kton"))
        .args(["experiment", "--preset", "cor1_exponential", "--ladder", "100,1000", "--trials", "300"])
        .args(["--out", out.to_str().unwrap()])
        .env("KTON_WORKERS", workers)
        .output()
        .unwrap()
}

#[test]
fn artifacts_manifest_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run_with_output(&a, "1").status.code().is_some());
    assert!(run_with_output(&b, "3").status.code().is_some());
    for name in ["report.json", "rungs.csv", "long.csv", "manifest.json", "trials_n100.jsonl"] {
        assert!(a.join(name).exists(), "{name}");
    }
    for name in ["trials_n100.jsonl", "trials_n1000.jsonl", "rungs.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
    }

    let o = kton(&["report", "--dir", a.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("n,"));
    assert_eq!(text.lines().count(), 3);

    let o = kton(&["report", "--dir", a.to_str().unwrap(), "--long"]);
    assert!(stdout(&o).starts_with("rung,metric,value"));

    let again = dir.path().join("again");
    let o = kton(&["report", "--dir", a.to_str().unwrap(), "--verify", again.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("\"reproduced\":true"));

    let trials = a.join("trials_n100.jsonl");
    let o = kton(&["report", "--trials", trials.to_str().unwrap(), "--k", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("statistic,count,mean"));
    assert_eq!(text.lines().count(), 4);
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qsdlab_cli::report::HEADER;
use qsdlab_cli::Manifest;
use serde_json::Value;

fn qsdlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsdlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("QSDLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    fs::write(dir.join(name), body).unwrap();
    name.to_string()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const T2: &str = r#"{"name": "T2", "generator": {"n": 2, "rates": [[0, 1], [2, 0]], "kill": [1, 0]}}"#;
const SPLIT: &str = r#"{"generator": {"n": 2, "rates": [[0, 0], [0, 0]], "kill": [1, 2]}}"#;

#[test]
fn solve_writes_exact_triple_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "t2.json", T2);
    let o = qsdlab(&["solve", "--config", &cfg, "--out", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let triple = json(tmp.path().join("run/triple.json"));
    let l = triple["lambda0"].as_f64().unwrap();
    assert!((l - (2.0 - 2f64.sqrt())).abs() <= 1e-12);

    let text = fs::read_to_string(tmp.path().join("run/manifest.json")).unwrap();
    let m: Manifest = serde_json::from_str(&text).unwrap();
    assert_eq!(m.command, "solve");
    assert_eq!(m.model, "T2");
    assert_eq!(m.summary.lambda0, Some(l));
    assert_eq!(m.verdicts, ["SOLVED"]);
    assert!(m.artifacts.iter().any(|a| a == "triple.json"));
    assert_eq!(m.config_sha256.as_deref().map(str::len), Some(64));
    let again: Manifest = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(serde_json::to_value(&again).unwrap(), serde_json::to_value(&m).unwrap());
}

#[test]
fn bd_table_stays_under_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bd.json",
        r#"{"bd": {"b": "k", "d": "k + 0.1*k^2", "a": 0.05, "N": 30}, "times": {"step": 0.5, "end": 10}}"#,
    );
    let o = qsdlab(&["bd", "--config", &cfg, "--out", "run"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(tmp.path().join("run/tv_vs_bound.csv")).unwrap();
    let mut rows = 0;
    for r in rdr.records() {
        let r = r.unwrap();
        let (tv, bound): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!(tv <= bound + 1e-9, "{r:?}");
        rows += 1;
    }
    assert_eq!(rows, 30 * 21);
    let m = json(tmp.path().join("run/manifest.json"));
    let v: Vec<&str> = m["verdicts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(v[0], "CERTIFIED");
    assert!(v.contains(&"S-CONVERGED"));
    assert!(tmp.path().join("run/series.json").exists());
    assert!(tmp.path().join("run/c2_ratio.csv").exists());
}

#[test]
fn neutron_runs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "n.json",
        r#"{"domain": {"polygon": [[0, 0], [2, 0], [2, 1], [0, 1]]}, "lambda": 1.5, "N": 1000, "seed": 11,
            "times": {"step": 0.1, "end": 2}, "qsd": {"t_star": 0.5, "bins": {"nx": 2, "ny": 2, "arcs": 2}, "N": 10000}}"#,
    );
    for out in ["a", "b"] {
        let o = qsdlab(&["neutron", "--config", &cfg, "--out", out], tmp.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["survival.csv", "qsd_naive.csv", "qsd_fleming_viot.csv", "neutron.json"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let o = qsdlab(&["neutron", "--config", &cfg, "--out", "c", "--seed", "12"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(
        fs::read(tmp.path().join("a/survival.csv")).unwrap(),
        fs::read(tmp.path().join("c/survival.csv")).unwrap()
    );
    assert_eq!(json(tmp.path().join("c/manifest.json"))["seed"], 12);
}

#[test]
fn report_of_empty_directory_is_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qsdlab(&["report", "--out", "."], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    assert_eq!(csv.trim_end(), HEADER.join(","));
}

#[test]
fn report_collects_runs_and_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let runs = tmp.path().join("runs");
    fs::create_dir(&runs).unwrap();
    let t2 = write(tmp.path(), "t2.json", T2);
    let split = write(tmp.path(), "split.json", SPLIT);
    assert_eq!(qsdlab(&["solve", "--config", &t2, "--out", "runs/a"], tmp.path()).status.code(), Some(0));
    assert_eq!(qsdlab(&["certify", "--config", &split, "--out", "runs/b"], tmp.path()).status.code(), Some(2));
    fs::create_dir(runs.join("c")).unwrap();

    let o = qsdlab(&["report", "--out", "runs"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(runs.join("summary.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), HEADER);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);

    let lambda0 = json(runs.join("a/triple.json"))["lambda0"].as_f64().unwrap();
    assert_eq!(&rows[0][0], "a");
    assert_eq!(rows[0][3].parse::<f64>().unwrap(), lambda0);
    assert_eq!(&rows[0][9], "complete");
    assert_eq!(&rows[1][8], "A1-FAIL");
    assert_eq!(&rows[1][9], "complete");
    assert!(rows[2][9].starts_with("incomplete"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("A1-FAIL"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let split = write(tmp.path(), "split.json", SPLIT);
    let o = qsdlab(&["certify", "--config", &split, "--out", "r"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(tmp.path().join("r/failure.json"))["verdict"], "A1-FAIL");
    assert_eq!(json(tmp.path().join("r/manifest.json"))["exit_code"], 2);

    let o = qsdlab(&["solve", "--config", "missing.json", "--out", "r2"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let o = qsdlab(&["solve", "--out", "r3"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let both = write(
        tmp.path(),
        "both.json",
        r#"{"generator": {"n": 1, "rates": [[0]], "kill": [1]}, "bd": {"b": "k", "d": "k", "N": 3}}"#,
    );
    let o = qsdlab(&["solve", "--config", &both, "--out", "r4"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let t2 = write(tmp.path(), "t2.json", T2);
    let o = qsdlab(&["solve", "--config", &t2, "--out", "r5", "--threads", "0"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_config_reports_position() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.json", "{\"bd\": {\"b\": \"k\",\n \"d\": }}");
    let o = qsdlab(&["bd", "--config", &bad, "--out", "r"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("column 7"), "{err}");

    let unknown = write(
        tmp.path(),
        "unknown.json",
        "{\"generator\": {\"n\": 1, \"rates\": [[0]], \"kill\": [1]},\n\"tiems\": 3}",
    );
    let o = qsdlab(&["solve", "--config", &unknown, "--out", "r"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tiems"));
}

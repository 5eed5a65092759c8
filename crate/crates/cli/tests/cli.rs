use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn stir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stir"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> serde_json::Value {
    let out = stir(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json summary")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: PathBuf) -> String {
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn rows(path: PathBuf) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(Result::unwrap).collect()
}

/// Column `name` of a CSV with headers.
fn column(path: PathBuf, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

#[test]
fn gen_writes_sidecar_with_corrupted_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let summary = ok(&["gen", "--seed", "3", "--out", s(&out), "--n", "1000", "--d", "10", "--alpha", "0.15"]);
    assert_eq!(summary["datasets"][0]["corrupted"], 150);
    let truth: toml::Value = toml::from_str(&read(out.join("dataset-3.toml"))).unwrap();
    let support = truth["corruption_support"].as_array().unwrap();
    assert_eq!(support.len(), 150);
    assert_eq!(rows(out.join("dataset-3.csv")).len(), 1000);
}

#[test]
fn gen_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |o: &str| vec!["gen".to_string(), "--seed".into(), "11".into(), "--out".into(), o.into(), "--trials".into(), "2".into()];
    for o in ["a", "b"] {
        let p = dir.path().join(o);
        ok(&args(s(&p)).iter().map(String::as_str).collect::<Vec<_>>());
    }
    for f in ["dataset-11.csv", "dataset-11.toml", "dataset-12.csv", "dataset-12.toml"] {
        assert_eq!(read(dir.path().join("a").join(f)), read(dir.path().join("b").join(f)), "{f}");
    }
}

#[test]
fn fit_recovers_clean_data_and_ols_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g");
    ok(&["gen", "--seed", "5", "--out", s(&g), "--n", "400", "--d", "8", "--alpha", "0"]);
    let f = dir.path().join("f");
    ok(&[
        "fit", "--data", s(&g.join("dataset-5.csv")), "--out", s(&f), "--solver", "stir,ols", "--tol", "1e-8",
    ]);
    let errors: Vec<f64> = column(f.join("summary.csv"), "final_error")
        .iter()
        .map(|e| e.parse().unwrap())
        .collect();
    assert!(errors[0] <= 1e-6, "stir error {}", errors[0]);
    assert!((errors[0] - errors[1]).abs() <= 1e-8, "{errors:?}");
    let trace = read(f.join("traces").join("seed-5-stir.jsonl"));
    for line in trace.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["stage", "iter", "M", "dist_to_gold", "objective", "elapsed_ns"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}

#[test]
fn fit_without_sidecar_leaves_error_blank() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g");
    ok(&["gen", "--seed", "1", "--out", s(&g), "--n", "200", "--d", "4"]);
    let csv = dir.path().join("plain.csv");
    std::fs::copy(g.join("dataset-1.csv"), &csv).unwrap();
    let f = dir.path().join("f");
    ok(&["fit", "--data", s(&csv), "--out", s(&f), "--solver", "ols"]);
    assert_eq!(column(f.join("summary.csv"), "final_error"), vec![String::new()]);
}

#[test]
fn sweep_with_empty_grid_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let summary = ok(&["sweep", "--out", s(&out), "--values", ""]);
    assert_eq!(summary["rows"], 0);
    let text = read(out.join("sweep.csv"));
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("param,value,solver"));
}

#[test]
fn sweep_over_alpha_hurts_ols() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    ok(&[
        "sweep", "--out", s(&out), "--n", "500", "--d", "5", "--param", "alpha", "--values", "0,0.1,0.2,0.3", "--solver",
        "ols", "--trials", "4",
    ]);
    let means: Vec<f64> = column(out.join("sweep.csv"), "mean_error")
        .iter()
        .map(|e| e.parse().unwrap())
        .collect();
    assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
}

#[test]
fn sweep_rejects_fractional_dimension() {
    let out = stir(&["sweep", "--out", "/nonexistent/x", "--param", "d", "--values", "2.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn estimate_constant_with_one_sample_fails_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = stir(&["estimate-constant", "--samples", "1", "--out", s(&dir.path().join("c"))]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "invalid-parameter");
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = stir(&["gen", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");
}

#[test]
fn malformed_csv_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "x0,x1,y\n1,2,3\n1,oops,2\n").unwrap();
    let out = stir(&["fit", "--data", s(&csv), "--out", s(&dir.path().join("f"))]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "parse");
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "seed = 9\ntrials = 2\n[data]\nn = 300\nd = 3\n").unwrap();
    let out = dir.path().join("g");
    ok(&["gen", "--config", s(&cfg), "--out", s(&out), "--trials", "1"]);
    assert!(out.join("dataset-9.csv").exists());
    assert!(!out.join("dataset-10.csv").exists());
    assert_eq!(rows(out.join("dataset-9.csv")).len(), 300);
    let resolved = read(out.join("config.toml"));
    assert!(resolved.contains("trials = 1"));
}

#[test]
fn results_do_not_depend_on_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let table = |jobs: &str, cmd: &str| {
        let out = dir.path().join(format!("{cmd}-{jobs}"));
        let mut args = vec![cmd, "--jobs", jobs, "--out", s(&out)];
        match cmd {
            "sweep" => args.extend(["--n", "300", "--d", "4", "--values", "0.1,0.2", "--solver", "stir,torrent", "--trials", "3"]),
            _ => args.extend(["--d", "4", "--horizon", "150", "--trials", "3", "--no-trajectories"]),
        }
        let owned: Vec<String> = args.iter().map(|a| a.to_string()).collect();
        ok(&owned.iter().map(String::as_str).collect::<Vec<_>>());
        read(out.join(if cmd == "sweep" { "sweep.csv" } else { "regret.csv" }))
    };
    for cmd in ["sweep", "bandit"] {
        assert_eq!(table("1", cmd), table("4", cmd), "{cmd}");
    }
}

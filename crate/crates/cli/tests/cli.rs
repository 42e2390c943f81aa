use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn clearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clearn")).args(args).output().expect("run clearn")
}

fn ok(args: &[&str]) {
    let out = clearn(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn stderr_line(out: &Output) -> String {
    let s = String::from_utf8_lossy(&out.stderr).to_string();
    assert_eq!(s.trim_end().lines().count(), 1, "expected one error line, got {s:?}");
    s.trim_end().to_string()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn json(path: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn column(path: &str, name: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let j = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(j).unwrap().parse().unwrap()).collect()
}

fn simulated(dir: &Path, kind: &str, n: usize, seed: u64) -> String {
    let out = p(dir, &format!("{kind}-{n}-{seed}.csv"));
    ok(&["simulate", "--kind", kind, "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", &out]);
    out
}

#[test]
fn simulate_writes_rows_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulated(dir.path(), "disk", 1000, 3);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 1001);
    assert_eq!(text.lines().next().unwrap(), "f0,f1,y,eta");
    let b = p(dir.path(), "again.csv");
    ok(&["simulate", "--kind", "disk", "--n", "1000", "--seed", "3", "--out", &b]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = p(dir.path(), "other.csv");
    ok(&["simulate", "--kind", "disk", "--n", "1000", "--seed", "4", "--out", &c]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn invalid_kind_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = clearn(&["simulate", "--kind", "spiral", "--out", &p(dir.path(), "x.csv")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).starts_with("error: usage:"));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn train_predict_roundtrip_and_sign_consistency() {
    let dir = tempfile::tempdir().unwrap();
    let train = simulated(dir.path(), "disk", 80, 1);
    let test = simulated(dir.path(), "disk", 50, 2);
    let model = p(dir.path(), "model.json");
    ok(&["train", "--data", &train, "--out", &model, "--gamma", "0.01", "--omega", "0.5"]);
    let m = json(&model);
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["kind"], "kernel");
    assert_eq!(m["coefficients"].as_array().unwrap().len(), 80);
    assert_eq!(m["config"]["rho"], 1.0);
    assert!(m["converged"].is_boolean());

    let pred = p(dir.path(), "pred.csv");
    ok(&["predict", "--model", &model, "--data", &test, "--out", &pred, "--with-probability", "crho"]);
    let scores = column(&pred, "score");
    let labels = column(&pred, "label");
    let probs = column(&pred, "probability");
    assert_eq!(scores.len(), 50);
    for ((s, l), q) in scores.iter().zip(&labels).zip(&probs) {
        assert!(*q > 0.0 && *q < 1.0);
        assert_eq!(*q > 0.5, *l == 1.0);
        assert_eq!(*s > 0.0, *l == 1.0);
    }

    // the saved model reproduces its own predictions exactly
    let again = p(dir.path(), "pred2.csv");
    ok(&["predict", "--model", &model, "--data", &test, "--out", &again, "--with-probability", "crho"]);
    assert_eq!(std::fs::read(&pred).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn huge_gamma_lasso_gives_zero_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let train = simulated(dir.path(), "disk", 40, 5);
    let model = p(dir.path(), "m.json");
    ok(&["train", "--data", &train, "--out", &model, "--gamma", "1e6", "--omega", "1"]);
    let m = json(&model);
    assert!(m["coefficients"].as_array().unwrap().iter().all(|b| b.as_f64() == Some(0.0)));
    let offset = m["offset"].as_f64().unwrap();
    let pred = p(dir.path(), "p.csv");
    ok(&["predict", "--model", &model, "--data", &train, "--out", &pred]);
    assert!(column(&pred, "score").iter().all(|s| *s == offset));
}

#[test]
fn single_value_grid_matches_direct_fit() {
    let dir = tempfile::tempdir().unwrap();
    let train = simulated(dir.path(), "disk", 40, 6);
    let direct = p(dir.path(), "direct.json");
    let cv = p(dir.path(), "cv.json");
    ok(&["train", "--data", &train, "--out", &direct, "--gamma", "0.01", "--expansion", "linear"]);
    ok(&["train", "--data", &train, "--out", &cv, "--gamma-grid", "0.01", "--expansion", "linear", "--cv-folds", "4"]);
    let (a, b) = (json(&direct), json(&cv));
    assert_eq!(a["coefficients"], b["coefficients"]);
    assert_eq!(a["offset"], b["offset"]);
    assert_eq!(b["cv"]["gamma"], 0.01);
}

#[test]
fn cv_grid_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let train = simulated(dir.path(), "sine", 60, 7);
    let args = |out: &str| {
        vec!["train", "--data", &train, "--out", out, "--gamma-grid", "0.001,0.01,0.1", "--omega-grid", "0,1"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>()
    };
    let a = p(dir.path(), "a.json");
    let b = p(dir.path(), "b.json");
    for out in [&a, &b] {
        let v = args(out);
        ok(&v.iter().map(String::as_str).chain(["--seed", "11"]).collect::<Vec<_>>());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(json(&a)["cv"]["cells"].as_array().unwrap().len(), 6);
}

#[test]
fn svm_calibrate_and_all_probability_modes() {
    let dir = tempfile::tempdir().unwrap();
    let train = simulated(dir.path(), "disk", 60, 8);
    let model = p(dir.path(), "svm.json");
    ok(&["train", "--data", &train, "--out", &model, "--method", "svm", "--gamma", "0.01", "--max-outer", "30"]);
    assert_eq!(json(&model)["method"], "svm");
    let cal = p(dir.path(), "cal.json");
    ok(&["calibrate", "--model", &model, "--data", &train, "--out", &cal]);
    let c = json(&cal);
    let rho = c["rho_hat"].as_f64().unwrap();
    assert!((1e-3..=1e2).contains(&rho));
    assert!(c["ekl"].as_f64().unwrap() <= std::f64::consts::LN_2 + 1e-9);

    for mode in ["crho", "platt", "sollich"] {
        let out = p(dir.path(), &format!("{mode}.csv"));
        ok(&["predict", "--model", &model, "--data", &train, "--out", &out, "--with-probability", mode, "--calibration", &cal]);
        let probs = column(&out, "probability");
        assert!(probs.iter().all(|q| (0.0..=1.0).contains(q)));
        if mode != "platt" {
            let labels = column(&out, "label");
            for (q, l) in probs.iter().zip(&labels) {
                assert!(*q == 0.5 || (*q > 0.5) == (*l == 1.0));
            }
        }
    }
    let out = clearn(&["predict", "--model", &model, "--data", &train, "--out", &p(dir.path(), "x.csv"), "--with-probability", "platt"]);
    assert!(!out.status.success());
    assert!(stderr_line(&out).starts_with("error: invalid-argument:"));
}

#[test]
fn calibrate_rejects_single_class_data() {
    let dir = tempfile::tempdir().unwrap();
    let train = simulated(dir.path(), "disk", 40, 9);
    let model = p(dir.path(), "m.json");
    ok(&["train", "--data", &train, "--out", &model, "--gamma", "0.01"]);
    let one = p(dir.path(), "one.csv");
    std::fs::write(&one, "f0,f1,y\n0.1,0.2,1\n-0.3,0.4,1\n").unwrap();
    let out = clearn(&["calibrate", "--model", &model, "--data", &one, "--out", &p(dir.path(), "c.json")]);
    assert!(!out.status.success());
    assert!(stderr_line(&out).starts_with("error: calibration:"));
}

#[test]
fn errors_are_single_line_with_kind() {
    let dir = tempfile::tempdir().unwrap();
    let bad = p(dir.path(), "bad.csv");
    std::fs::write(&bad, "f0,f1,y\n0.1,0.2,3\n").unwrap();
    let out = clearn(&["train", "--data", &bad, "--out", &p(dir.path(), "m.json")]);
    assert_eq!(stderr_line(&out), format!("error: bad-label: {bad}: line 2: invalid label \"3\" (expected -1 or 1)"));

    let one = p(dir.path(), "one.csv");
    std::fs::write(&one, "f0,y\n0.1,1\n0.2,1\n").unwrap();
    let out = clearn(&["train", "--data", &one, "--out", &p(dir.path(), "m.json")]);
    assert!(stderr_line(&out).starts_with("error: single-class:"));

    let out = clearn(&["predict", "--model", &p(dir.path(), "missing.json"), "--data", &bad, "--out", &p(dir.path(), "o.csv")]);
    assert!(stderr_line(&out).starts_with("error: io:"));

    let train = simulated(dir.path(), "disk", 30, 1);
    let model = p(dir.path(), "m.json");
    ok(&["train", "--data", &train, "--out", &model, "--expansion", "linear"]);
    let wide = p(dir.path(), "wide.csv");
    std::fs::write(&wide, "f0,f1,f2,y\n0,0,0,1\n").unwrap();
    let out = clearn(&["predict", "--model", &model, "--data", &wide, "--out", &p(dir.path(), "o.csv")]);
    assert!(stderr_line(&out).starts_with("error: dimension-mismatch:"));

    let mut m = json(&model);
    m["schema_version"] = 99.into();
    std::fs::write(&model, m.to_string()).unwrap();
    let out = clearn(&["predict", "--model", &model, "--data", &train, "--out", &p(dir.path(), "o.csv")]);
    assert!(stderr_line(&out).contains("unsupported schema version 99"));
}

#[test]
fn replicate_smoke_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let protocol = p(dir.path(), "protocol.json");
    std::fs::write(
        &protocol,
        r#"{
  "name": "smoke",
  "generator": {"kind": "disk", "n": 150, "flip_fraction": 0.2},
  "train_fraction": 0.3,
  "methods": ["svm_crho", "svm_platt", "svm_sollich", "c_learning"],
  "svm_gammas": [0.01],
  "c_grid": {"gammas": [0.01], "omegas": [0.0, 1.0]},
  "cv_folds": 3,
  "caps": {"max_outer": 20, "max_inner": 100}
}"#,
    )
    .unwrap();
    let started = std::time::Instant::now();
    let out_dir: PathBuf = dir.path().join("out");
    ok(&["replicate", "--protocol", &protocol, "--n-reps", "2", "--seed", "4", "--out-dir", out_dir.to_str().unwrap()]);
    assert!(started.elapsed().as_secs() < 60);

    let summary = json(out_dir.join("summary.json").to_str().unwrap());
    let per_rep = std::fs::read_to_string(out_dir.join("per_rep.csv")).unwrap();
    assert_eq!(per_rep.lines().count(), 1 + 2 * 4);
    assert!(std::fs::read_to_string(out_dir.join("long.csv")).unwrap().starts_with("seed,method,metric,value\n"));

    // reported mean equals the mean of the per-replication rows
    let rows: Vec<Vec<&str>> = per_rep.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let ce: Vec<f64> = rows.iter().filter(|r| r[1] == "c_learning").map(|r| r[3].parse().unwrap()).collect();
    let report = summary["reports"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["method"] == "c_learning" && r["metric"] == "cross_entropy")
        .unwrap();
    let mean = report["mean"].as_f64().unwrap();
    assert!((mean - ce.iter().sum::<f64>() / ce.len() as f64).abs() < 1e-12);
    assert_eq!(report["seeds"], serde_json::json!([4, 5]));
}

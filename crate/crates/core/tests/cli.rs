use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_threshreg"));
    c.env_remove("THRESHREG_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write_data(dir: &Path) -> String {
    let mut s = String::from("a,b,c,d,y\n");
    let mut state: u64 = 3;
    for _ in 0..40 {
        let mut row = [0.0; 4];
        for v in &mut row {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            *v = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        }
        let y = 2.0 * row[0] - 1.5 * row[2] + 1.0;
        s.push_str(&format!("{},{},{},{},{}\n", row[0], row[1], row[2], row[3], y));
    }
    let path = dir.join("d.csv");
    fs::write(&path, s).unwrap();
    path.to_str().unwrap().to_owned()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn fit_prints_json_with_settings() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let out = run(&["fit", "--data", &data, "--response", "y", "--penalty", "hard", "--lambda", "0.1"]);
    let v = json(&out);
    assert_eq!(v["fit"]["support"], serde_json::json!([0, 2]));
    assert_eq!(v["names"], serde_json::json!(["a", "c"]));
    assert!((v["intercept"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert_eq!(v["settings"]["solver"]["max_iter"], 500);
    assert!(String::from_utf8_lossy(&out.stderr).contains("2 nonzero coefficients"));
}

#[test]
fn path_with_validation_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let out_dir = dir.path().join("out");
    let out = run(&[
        "path", "--data", &data, "--response", "y", "--penalty", "lasso", "--val-data", &data,
        "--lambda-grid", "1,0.5,0.1,0.01", "--out", out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("path.json")).unwrap()).unwrap();
    assert_eq!(v["path"]["entries"].as_array().unwrap().len(), 4);
    assert_eq!(v["selected"]["index"], 3);
    let csv = fs::read_to_string(out_dir.join("path.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(String::from_utf8_lossy(&out.stdout).contains("validation choice"));
}

#[test]
fn refit_risk_curve_and_spark() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let v = json(&run(&["refit", "--data", &data, "--response", "y", "--support", "2,0", "--lambda1", "0"]));
    let c = v["coefficients"].as_array().unwrap();
    assert!((c[0].as_f64().unwrap() - 2.0).abs() < 1e-8 && (c[1].as_f64().unwrap() + 1.5).abs() < 1e-8);

    let spec = dir.path().join("spec.json");
    fs::write(&spec, r#"{"d": [40, 40], "b": [1.0, -1.0], "sigma": 0.5, "n": 40}"#).unwrap();
    let out_dir = dir.path().join("rc");
    let out = run(&["risk-curve", "--spectrum", spec.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("risk_curve.json")).unwrap()).unwrap();
    assert!((v["optimal_l2"].as_f64().unwrap() - 0.25).abs() < 1e-9);
    let csv = fs::read_to_string(out_dir.join("risk_curve.csv")).unwrap();
    assert!(csv.starts_with("lambda1,l2_risk,pred_risk\n"));

    let v = json(&run(&["spark", "--data", &data, "--response", "y", "--c", "0.2", "--tau", "2"]));
    assert_eq!(v["certificate"]["exhaustive"], true);
}

#[test]
fn simulate_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let design = dir.path().join("design.json");
    fs::write(&design, r#"{"p": 60, "n_test": 300, "reps": 3, "seed": 5}"#).unwrap();
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "2", "1"].iter().enumerate() {
        let out_dir = dir.path().join(format!("o{k}"));
        let out = run(&[
            "refit-study", "--design", design.to_str().unwrap(), "--methods", "hard,lasso,oracle",
            "--threads", threads, "--out", out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let files: Vec<Vec<u8>> = ["summary.json", "rows.csv", "curves.csv"]
            .iter()
            .map(|f| fs::read(out_dir.join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let summary: serde_json::Value = serde_json::from_slice(&outputs[0][0]).unwrap();
    assert_eq!(summary["design"]["reps"], 3);
    assert_eq!(summary["refit"]["tuning"], "test_risk_per_replication");
    let methods: Vec<&str> = summary["aggregates"].as_array().unwrap().iter().map(|a| a["method"].as_str().unwrap()).collect();
    assert_eq!(methods, ["Hard", "Hard-L2", "Lasso", "Lasso-L2", "Oracle", "Oracle-L2"]);
}

#[test]
fn threads_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let out = bin()
        .env("THRESHREG_THREADS", "2")
        .args(["split-study", "--data", &data, "--response", "y", "--splits", "3", "--methods", "hard"])
        .output()
        .unwrap();
    let v = json(&out);
    assert_eq!(v["config"]["splits"], 3);
    let bad = bin().env("THRESHREG_THREADS", "zero").args(["audit", "--reps", "1"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn audit_small_run() {
    let v = json(&run(&["audit", "--reps", "5", "--seed", "3"]));
    assert_eq!(v["reps"], 5);
    assert!(v["all_bounds_rate"].as_f64().unwrap() >= 0.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());

    let out = run(&["fit", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&[]).status.code(), Some(1));

    let out = run(&["fit", "--data", "/nonexistent.csv", "--response", "y", "--penalty", "hard", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: fit:"));

    // an unknown response column is a bad flag value
    let out = run(&["fit", "--data", &data, "--response", "nope", "--penalty", "hard", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(1));

    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "a,y\n1,2\n3\n").unwrap();
    let out = run(&["fit", "--data", ragged.to_str().unwrap(), "--response", "y", "--penalty", "hard", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["fit", "--data", &data, "--response", "y", "--penalty", "hard", "--lambda", "-1"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["refit", "--data", &data, "--response", "y", "--support", "9", "--lambda1", "0"]);
    assert_ne!(out.status.code(), Some(0));

    // two identical columns make the unpenalized refit singular
    let dup = dir.path().join("dup.csv");
    fs::write(&dup, "a,b,y\n1,1,1\n2,2,0\n3,3,2\n4,4,1\n").unwrap();
    let out = run(&["refit", "--data", dup.to_str().unwrap(), "--response", "y", "--support", "0,1", "--lambda1", "0"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: refit:"));

    let out = run(&["spark", "--data", &data, "--response", "y", "--c", "0", "--tau", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

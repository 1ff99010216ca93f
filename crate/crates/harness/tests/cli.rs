use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use straggler_harness::data::read_dataset;
use straggler_harness::output::OUTPUT_DIR_ENV;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_straggler"));
    c.env_remove(OUTPUT_DIR_ENV);
    c
}

fn run(c: &mut Command) -> Output {
    c.output().expect("spawn straggler")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn ridge_config(out: &Path, schemes: &str) -> String {
    format!(
        r#"{{
        "problem": {{"kind": "ridge", "n": 64, "p": 8, "sigma": 1.0, "lambda": 0.1}},
        "seeds": {{"data_seed": 1, "frame_seed": 2, "delay_seed": 3, "solver_seed": 4}},
        "frame": {{"kind": "hadamard_randomized", "beta": 2}},
        "cluster": {{"m": 8, "k": 6, "delay": {{"kind": "exponential", "mean": 1.0}}}},
        "solver": {{"algorithm": "gd", "T": 20}},
        "output": {{"dir": "{}", "name": "r"}}{schemes}
    }}"#,
        out.display()
    )
}

#[test]
fn unknown_flag_exits_2() {
    let o = run(bin().args(["run", "--no-such-flag"]));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), r#"{"problem": {"kind": "ridge"}}"#);
    let o = run(bin().arg("run").arg("--config").arg(&path));
    assert_eq!(o.status.code(), Some(2));
    let typo = ridge_config(dir.path(), "").replace("\"T\"", "\"iters\"");
    let path = write_config(dir.path(), &typo);
    let o = run(bin().arg("run").arg("--config").arg(&path));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_writes_a_reproducible_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &ridge_config(dir.path(), ""));
    let o = run(bin().arg("run").arg("--config").arg(&path).arg("--summary"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["iterations"], 20);

    let csv_path = dir.path().join("r.csv");
    let first = std::fs::read(&csv_path).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,sim_time_s,k_t,A_t,f_or_g,test_metric,alpha_t,notes");
    assert_eq!(lines.count(), 21);

    let o = run(bin().arg("run").arg("--config").arg(&path));
    assert!(o.status.success());
    assert_eq!(std::fs::read(&csv_path).unwrap(), first);
}

#[test]
fn output_dir_env_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let other = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &ridge_config(dir.path(), ""));
    let o = run(bin().arg("run").arg("--config").arg(&path).env(OUTPUT_DIR_ENV, other.path()));
    assert!(o.status.success());
    assert!(other.path().join("r.csv").exists());
    assert!(!dir.path().join("r.csv").exists());
}

#[test]
fn compare_writes_paired_schemes() {
    let dir = tempfile::tempdir().unwrap();
    let schemes = r#",
        "schemes": [
            {"name": "uncoded", "frame": {"kind": "identity"}, "k": 8},
            {"name": "coded"}
        ]"#;
    let path = write_config(dir.path(), &ridge_config(dir.path(), schemes));
    let o = run(bin().arg("compare").arg("--config").arg(&path));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("r.uncoded.csv").exists());
    assert!(dir.path().join("r.coded.csv").exists());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    let series = report["schemes"].as_array().unwrap();
    assert_eq!(series.len(), 2);
    assert_eq!(series[0]["config_hash"], series[1]["config_hash"]);
    assert_eq!(series[0]["config_hash"], report["shared_config_hash"]);

    let o = run(bin().arg("compare").arg("--config").arg(&path).args(["--schemes", "nope"]));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn spectrum_counts_steiner_subsets() {
    let o = run(bin().args(["spectrum", "--frame", "steiner", "--v", "4", "--m", "8", "--eta", "0.75"]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(j["subsets"], 28);
    assert!((j["eta"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    let eps = j["epsilon"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&eps));
}

#[test]
fn gen_data_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &ridge_config(dir.path(), ""));
    let o = run(bin().arg("gen-data").arg("--config").arg(&path).arg("--csv"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let data = read_dataset(&dir.path().join("r.bin")).unwrap();
    assert_eq!((data.x.rows(), data.x.cols(), data.y.len()), (64, 8, 64));
    let again = straggler_core::loss::generate_regression::<f64>(64, 8, 1.0, 1).unwrap();
    assert_eq!(data.y, again.problem.y());
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.is_empty()).count(), 65);
    assert!(dir.path().join("r.json").exists());
}

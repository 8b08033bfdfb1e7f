use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sktsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sktsim")).args(args).output().unwrap()
}

fn fixture() -> String {
    format!("{}/tests/fixtures/small.toml", env!("CARGO_MANIFEST_DIR"))
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_json(out: &Output) -> Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).unwrap()
}

fn quick_config(dir: &Path) -> String {
    let text = std::fs::read_to_string(fixture())
        .unwrap()
        .replace(
            r#"systems = ["skt-particles", "gradient-particles", "intermediate", "macroscopic", "pde-local", "pde-nonlocal", "coupled-error"]"#,
            r#"systems = ["skt-particles", "pde-local"]"#,
        );
    let path = dir.join("quick.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn presets_are_listed_and_printed() {
    let out = sktsim(&["presets"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "nsymm\nsymm\n3species\n");
    let out = sktsim(&["presets", "symm", "--desk-scale"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = sktsim::config::ExperimentConfig::from_toml(&text).unwrap();
    assert!(cfg.desk_scale);
    assert_eq!(cfg.runs, 50);
}

#[test]
fn run_then_emit_plots() {
    let dir = tempfile::tempdir().unwrap();
    let config = quick_config(dir.path());
    let out_dir = dir.path().join("result");
    let out = sktsim(&["run", "--config", &config, "--seed", "9", "--workers", "2", "--out", out_dir.to_str().unwrap()]);
    let summary = stdout_json(&out);
    assert!(summary["config_hash"].as_str().unwrap().len() == 64);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 9);
    assert!(out_dir.join("skt-particles/density_t0.2.csv").is_file());

    let plots = stdout_json(&sktsim(&["emit-plots", "--out", out_dir.to_str().unwrap()]));
    assert_eq!(plots["files"].as_array().unwrap().len(), 5);
    assert!(out_dir.join("plots/index.json").is_file());
}

#[test]
fn study_with_explicit_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = quick_config(dir.path());
    let out_dir = dir.path().join("study");
    let out = sktsim(&[
        "study", "--config", &config, "--etas", "2,1.6", "--particles", "60,90", "--out", out_dir.to_str().unwrap(),
    ]);
    stdout_json(&out);
    let table = std::fs::read_to_string(out_dir.join("eta-sweep/study.csv")).unwrap();
    assert!(table.starts_with("eta,particles,strong_error"));
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn failures_print_error_json() {
    let err = error_json(&sktsim(&["run", "--preset", "unknown"]));
    assert_eq!(err["error"]["kind"], "config");
    let err = error_json(&sktsim(&["run", "--config", "/nonexistent/config.toml"]));
    assert_eq!(err["error"]["kind"], "io");
    let err = error_json(&sktsim(&["run"]));
    assert!(err["error"]["message"].as_str().unwrap().contains("--preset"));
    let dir = tempfile::tempdir().unwrap();
    let err = error_json(&sktsim(&["emit-plots", "--out", dir.path().to_str().unwrap()]));
    assert_eq!(err["error"]["kind"], "io");
    // the default scaling relation at eta = 1.3 needs far more particles than any limit
    let config = quick_config(dir.path());
    let err = error_json(&sktsim(&["study", "--config", &config, "--etas", "1.3", "--out", dir.path().to_str().unwrap()]));
    assert_eq!(err["error"]["kind"], "pipeline");
    assert_eq!(err["error"]["pipeline"], "eta-sweep");
    assert_eq!(err["error"]["cause"], "resource-limit");
}

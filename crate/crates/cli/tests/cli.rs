use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(name)
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_billiards"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display())))
        .unwrap()
}

#[test]
fn unfold_reports_the_torus_and_records_a_manifest() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["unfold", spec("square.toml").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("genus 1"));
    let summary = json(dir.path().join("unfold_summary.json"));
    assert_eq!(summary["genus"], 1);
    let manifest = json(dir.path().join("manifest.json"));
    assert_eq!(manifest["config"]["command"], "unfold");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 1);
    assert!(dir.path().join("surface.json").exists());
}

#[test]
fn octagon_triangle_unfolds_to_h2() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["unfold", spec("octagon_triangle.toml").to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("genus 2") && stdout.contains("H(2)"), "{stdout}");
}

#[test]
fn bad_angles_exit_with_input_code() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["unfold", spec("bad_angles.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn reducible_permutation_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["lyapunov", "--perm", "2143", "--steps", "1000"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rotation_exponents() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["lyapunov", "--perm", "21", "--steps", "2000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let est = json(dir.path().join("lyapunov.json"));
    let ex: Vec<f64> = serde_json::from_value(est["exponents"].clone()).unwrap();
    assert_eq!(ex[0], 1.0);
    assert!((ex[1] + 1.0).abs() < 1e-6);
}

#[test]
fn decomposition_of_the_doubling_sequence() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["decompose", "--t", "11", "--seq", "2,4,8,16"]);
    assert!(out.status.success());
    let d = json(dir.path().join("decomposition.json"));
    assert_eq!(d["n"], 3);
    assert_eq!(d["m"], serde_json::json!([1, 0, 1]));
    assert_eq!(d["tau"], 1.0);
}

#[test]
fn constant_observable_gives_degenerate_fits() {
    let dir = TempDir::new().unwrap();
    let surface = spec("square.toml");
    let out = run(
        dir.path(),
        &["deviate", "--surface", surface.to_str().unwrap(), "--theta", "0.6", "--t-max", "1e3", "--observable", "const"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(dir.path().join("summary.json"));
    assert_eq!(summary["degenerate"], 1);
    let csv = std::fs::read_to_string(dir.path().join("series_000.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with("zero")), "{csv}");
}

#[test]
fn replay_reproduces_and_detects_tampering() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["--seed", "3", "lyapunov", "--perm", "4321", "--steps", "2000"]);
    assert!(out.status.success());
    let manifest = dir.path().join("manifest.json");
    let replay = dir.path().join("again");
    let ok = Command::new(env!("CARGO_BIN_EXE_billiards"))
        .args(["replay", manifest.to_str().unwrap(), "--into", replay.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));

    // a recorded output whose hash and content no longer match the rerun
    let path = dir.path().join("lyapunov.json");
    let mut v = json(path.clone());
    v["exponents"][1] = serde_json::json!(0.5);
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    let mut m = json(manifest.clone());
    m["outputs"][0]["sha256"] = serde_json::json!("0".repeat(64));
    std::fs::write(&manifest, serde_json::to_string_pretty(&m).unwrap()).unwrap();
    let bad = Command::new(env!("CARGO_BIN_EXE_billiards"))
        .args(["replay", manifest.to_str().unwrap(), "--into", dir.path().join("third").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn replay_rejects_changed_inputs() {
    let dir = TempDir::new().unwrap();
    let polygon = dir.path().join("square.toml");
    std::fs::copy(spec("square.toml"), &polygon).unwrap();
    let out = run(&dir.path().join("run"), &["unfold", polygon.to_str().unwrap()]);
    assert!(out.status.success());
    std::fs::write(&polygon, "angles = [\"1/4\", \"1/2\", \"1/4\"]\n").unwrap();
    let replay = Command::new(env!("CARGO_BIN_EXE_billiards"))
        .args(["replay", dir.path().join("run/manifest.json").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(replay.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&replay.stderr).contains("changed"));
}

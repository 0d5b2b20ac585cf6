use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_susyflow"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_in(config: &Path, out: &Path) -> Output {
    bin().arg("run").arg(config).env("SUSYFLOW_OUTPUT_DIR", out).output().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("t,norm,"));
    lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

const SHORT: &str = r#"
name = "short"

[model]
n_c = 1
algebra = { kind = "u1" }
killing = { kind = "charges", charges = [[1.0]] }

[grid]
n = 8

[integrator]
dt = 2e-3
t_end = 0.02

[init]
seed = 11
amplitude = 0.1
band = 1

[output]
snapshot_every = 5
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn vacuum_stays_zero() {
    let out = tempfile::tempdir().unwrap();
    let o = run_in(&configs().join("vacuum.toml"), out.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.path().join("diagnostics.csv"));
    assert_eq!(rows.len(), 51);
    for r in &rows {
        // every column but t and the Picard count
        assert!(r[1..r.len() - 1].iter().all(|v| *v == 0.0), "{r:?}");
    }
}

#[test]
fn bundled_abelian_higgs_keeps_the_constraint() {
    let out = tempfile::tempdir().unwrap();
    let o = run_in(&configs().join("abelian_higgs.toml"), out.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.path().join("diagnostics.csv"));
    assert_eq!(rows.len(), 1001);
    assert!((rows.last().unwrap()[0] - 1.0).abs() < 1e-12);
    let norm0 = rows[0][1];
    let worst = rows.iter().map(|r| r[10]).fold(0.0f64, f64::max);
    assert!(worst <= 1e-6 * norm0, "{worst:e} vs {norm0:e}");
    for step in [0, 250, 500, 750, 1000] {
        assert!(out.path().join(format!("snapshot_{step:06}.bin")).exists());
    }
    assert!(out.path().join("snapshot_final.bin").exists());
}

#[test]
fn negative_step_is_rejected_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SHORT.replace("dt = 2e-3", "dt = -2e-3"));
    let out = dir.path().join("out");
    let o = run_in(&cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("dt") && err.contains("line 13"), "{err}");
    assert!(!out.exists());
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SHORT.replace("band = 1", "band = 1\nbandwidth = 2"));
    let out = dir.path().join("out");
    let o = run_in(&cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bandwidth") && err.contains("line"), "{err}");
    assert!(!out.exists());
}

#[test]
fn missing_config_file_exits_one() {
    let o = bin().args(["run", "/nonexistent/run.toml"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn runs_are_bit_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run_in(&cfg, &a).status.code(), Some(0));
    assert_eq!(run_in(&cfg, &b).status.code(), Some(0));
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 1 + 3 + 1, "{names:?}");
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn inspect_prints_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT);
    let out = dir.path().join("out");
    assert_eq!(run_in(&cfg, &out).status.code(), Some(0));
    let o = bin().arg("inspect").arg(out.join("snapshot_final.bin")).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("\"label\": \"short\"") && text.contains("\"step\": 10"), "{text}");
    assert!(text.contains("norm "));
}

#[test]
fn inspect_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("junk.bin");
    fs::write(&p, b"not a snapshot").unwrap();
    assert_eq!(bin().arg("inspect").arg(&p).output().unwrap().status.code(), Some(1));
}

fn verify(suite: &str) -> (i32, Value) {
    let o = bin().args(["verify", suite]).output().unwrap();
    let json: Value = serde_json::from_slice(&o.stdout).unwrap();
    (o.status.code().unwrap(), json)
}

fn all_passed(json: &Value) -> bool {
    json.as_array().unwrap().iter().all(|r| {
        let checks = r["checks"].as_array().unwrap();
        assert!(!checks.is_empty());
        let ok = checks.iter().all(|c| c["passed"].as_bool().unwrap());
        assert_eq!(r["passed"].as_bool().unwrap(), ok);
        ok
    })
}

#[test]
fn verify_constraint_passes_with_json_report() {
    let (code, json) = verify("constraint");
    assert!(all_passed(&json), "{json:#}");
    assert_eq!(code, 0);
}

#[test]
fn verify_exit_code_tracks_the_report() {
    let (code, json) = verify("kahler");
    assert_eq!(code == 0, all_passed(&json));
    if code != 0 {
        assert_eq!(code, 3);
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_carleman"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn sweep() -> Value {
    serde_json::from_str(&fs::read_to_string(configs().join("sweep.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, v: &Value) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).arg("--out").arg(out).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn validate_accepts_shipped_configs() {
    for name in ["sweep.json", "certify.json", "barriers.json"] {
        let o = bin().arg("validate").arg("--config").arg(configs().join(name)).output().unwrap();
        assert!(o.status.success(), "{name}: {}", stderr(&o));
    }
}

#[test]
fn increasing_epsilons_are_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = sweep();
    c["epsilons"] = json!([0.1, 0.2]);
    let o = bin().arg("validate").arg("--config").arg(write_config(tmp.path(), &c)).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("epsilons[1]"), "{}", stderr(&o));
}

#[test]
fn barrier_case_must_fit_the_exponent() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = sweep();
    c["barriers"] = json!({
        "lower": { "case": "fde_super_critical_T_minus", "n": 2, "alpha": 0.5, "R": 1.0, "T": 1.0 }
    });
    let o = bin().arg("validate").arg("--config").arg(write_config(tmp.path(), &c)).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("barriers.lower"), "{}", stderr(&o));

    c["model"] = json!({ "n": 3, "alpha": 1.0 });
    c["grid"] = json!({ "cells": [8, 8, 8], "dx": 0.125, "boundary": "periodic" });
    c["barriers"]["lower"] = json!({ "case": "fde_super_critical_T_minus", "n": 3, "alpha": 1.0, "R": 1.0, "T": 10.0 });
    c["snapshots"] = json!([0.05]);
    c["initial_data"] = json!({ "components": [[{ "kind": "constant", "value": 1.0 }]] });
    c["diagnostics"] = json!({});
    let o = bin().arg("validate").arg("--config").arg(write_config(tmp.path(), &c)).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn missing_schema_version_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = sweep();
    c.as_object_mut().unwrap().remove("schema_version");
    let o = bin().arg("validate").arg("--config").arg(write_config(tmp.path(), &c)).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("schema_version"));
}

#[test]
fn misaligned_snapshot_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = sweep();
    c["snapshots"] = json!([0.0101, 0.05]);
    let o = bin().arg("validate").arg("--config").arg(write_config(tmp.path(), &c)).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("snapshots[0]"), "{}", stderr(&o));
}

#[test]
fn sweep_writes_every_artifact_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let config = configs().join("sweep.json");
    for out in [&a, &b] {
        let o = run(&["run", "--threads", "2"], &config, out);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let m = manifest(&a);
    assert_eq!(m, manifest(&b));

    let files = m["files"].as_object().unwrap();
    let kinetic_sets: std::collections::BTreeSet<&str> = files
        .keys()
        .filter_map(|k| k.strip_prefix("kinetic/"))
        .filter_map(|k| k.split('/').next())
        .collect();
    assert_eq!(kinetic_sets.len(), 3);
    assert!(files.keys().any(|k| k.starts_with("limit/")));
    assert!(files.contains_key("convergence.csv"));
    let csv = fs::read_to_string(a.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);

    // Every file on disk except the manifest itself is listed.
    let mut on_disk = Vec::new();
    let mut stack = vec![a.clone()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                on_disk.push(p.strip_prefix(&a).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    on_disk.retain(|f| f != "manifest.json");
    on_disk.sort();
    let listed: Vec<String> = files.keys().cloned().collect();
    assert_eq!(on_disk, listed);

    let r = bin().arg("report").arg("--out").arg(&a).output().unwrap();
    assert!(r.status.success());
    assert!(String::from_utf8_lossy(&r.stdout).contains("PASS"));

    let p = bin().arg("plot").arg("--out").arg(&a).output().unwrap();
    assert!(p.status.success(), "{}", stderr(&p));
    let svg = fs::read_to_string(a.join("plots/convergence.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<!-- data"));
    assert!(a.join("plots/profile_limit.svg").exists());
    assert!(manifest(&a)["files"].as_object().unwrap().contains_key("plots/convergence.svg"));
}

#[test]
fn certify_only_writes_certificates_and_no_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["certify-barriers"], &configs().join("certify.json"), tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("certificates/lower_limit.json").exists());
    assert!(tmp.path().join("certificates/upper_eps_5e-2.json").exists());
    assert!(!tmp.path().join("kinetic").exists());
    let cert: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("certificates/lower_eps_1e-1.json")).unwrap()).unwrap();
    for key in ["barrier", "constants", "region", "max_residual", "coefficient"] {
        assert!(cert.get(key).is_some(), "certificate lacks {key}");
    }
}

#[test]
fn barrier_run_audits_bounds() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["run"], &configs().join("barriers.json"), tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let p = bin().arg("plot").arg("--out").arg(tmp.path()).output().unwrap();
    assert!(p.status.success());
    assert!(tmp.path().join("plots/barriers.svg").exists());
}

#[test]
fn crossed_initial_data_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c: Value = serde_json::from_str(&fs::read_to_string(configs().join("barriers.json")).unwrap()).unwrap();
    c["barriers"]["upper"]["R"] = json!(4.0);
    let o = run(&["run"], &write_config(tmp.path(), &c), &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn stiff_limit_run_is_a_solver_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = sweep();
    c["model"]["alpha"] = json!(1.0);
    c["initial_data"] = json!({ "components": [[{ "kind": "constant", "value": 1e-12 }]] });
    c["diagnostics"] = json!({});
    let o = run(&["run"], &write_config(tmp.path(), &c), &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("limit run"));
}

#[test]
fn failed_verdict_gives_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let report = json!({
        "series": {},
        "sweeps": {},
        "verdicts": [{ "name": "mass drift", "passed": false, "value": 1.0, "comparison": "<=", "tolerance": 1e-10,
                        "witness": { "cell": null, "component": null, "t": null } }]
    });
    fs::write(tmp.path().join("diagnostics.json"), report.to_string()).unwrap();
    let o = bin().arg("report").arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL  mass drift"));
}

#[test]
fn empty_diagnostics_plot_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("diagnostics.json"), r#"{"series":{},"sweeps":{},"verdicts":[]}"#).unwrap();
    let o = bin().arg("plot").arg("--out").arg(tmp.path()).output().unwrap();
    assert!(o.status.success());
    assert!(stderr(&o).contains("nothing to plot"));
    assert!(!tmp.path().join("plots").exists());
}

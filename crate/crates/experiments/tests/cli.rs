//! End-to-end runs of the `snls-lab` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use snls_experiments::output::{sha256_hex, verify_manifest, MANIFEST_NAME};

fn lab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snls-lab"))
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .env_remove("SEED")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_NAME)).unwrap()).unwrap()
}

fn digests(dir: &Path) -> Vec<(String, String)> {
    manifest(dir)["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| (f["path"].as_str().unwrap().to_string(), f["sha256"].as_str().unwrap().to_string()))
        .collect()
}

const FREE_FIELD: [&str; 8] = [
    "--set",
    "model.coupling=0.0",
    "--set",
    "model.domain=\"whole_space\"",
    "--set",
    "model.friction=0.5",
    "--set",
    "spectrum.level=10",
];

#[test]
fn free_field_spectrum_reports_gap_nu() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("spectrum");
    let mut args = vec!["spectrum"];
    args.extend(FREE_FIELD);
    let o = lab(&args, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s: Value = serde_json::from_str(&fs::read_to_string(out.join("spectrum.json")).unwrap()).unwrap();
    assert_eq!(s["discretisation"], "galerkin");
    let gap = s["spectrum"]["gap"].as_f64().unwrap();
    assert!((gap - 0.5).abs() < 1e-9, "gap {gap}");
    assert!(verify_manifest(&out).unwrap());
    let m = manifest(&out);
    assert_eq!(m["pass"], true);
    assert_eq!(m["kind"], "spectrum");
}

#[test]
fn malformed_config_exits_2_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bad");
    let o = lab(&["spectrum", "--set", "model.exponent=5"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exponent"));
    assert!(!out.exists());

    let cfg = tmp.path().join("cfg.toml");
    fs::write(&cfg, "kind = \"sample\"\noutput_dir = \"x\"\n[model]\ncolour = 3\n").unwrap();
    let o = lab(&["sample", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    let o = lab(&["simulate", "--set", "model.domain=\"whole_space\""], &out);
    assert_eq!(o.status.code(), Some(2), "focusing on the whole space is rejected");
}

#[test]
fn failed_assertion_exits_1_with_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("short");
    let o = lab(&["sample", "--seed", "3", "--set", "sample.n_steps=200", "--set", "sample.burn_in=10"], &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(out.join("moments.csv").exists());
    let m = manifest(&out);
    assert_eq!(m["pass"], false);
    assert!(verify_manifest(&out).unwrap());
}

#[test]
fn runs_reproduce_from_seed_and_config() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["sample", "--set", "sample.n_steps=20000", "--set", "sample.burn_in=2000"];
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    lab(&[&args[..], &["--seed", "11"]].concat(), &a);
    let o = Command::new(env!("CARGO_BIN_EXE_snls-lab"))
        .args(args)
        .arg("--output-dir")
        .arg(&b)
        .env("SEED", "11")
        .output()
        .unwrap();
    assert!(o.status.code().is_some());
    assert_eq!(digests(&a), digests(&b));
    assert_eq!(manifest(&a)["seed_source"], "flag");
    assert_eq!(manifest(&b)["seed_source"], "env");
    // The manifest config replays the run.
    let c = tmp.path().join("c");
    let mut cfg = manifest(&a)["config"].clone();
    cfg["output_dir"] = Value::String(c.display().to_string());
    let toml_text = toml::to_string(&serde_json::from_value::<toml::Value>(cfg).unwrap()).unwrap();
    let path = tmp.path().join("replay.toml");
    fs::write(&path, toml_text).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_snls-lab"))
        .args(["sample", "--config", path.to_str().unwrap()])
        .env_remove("SEED")
        .output()
        .unwrap();
    assert!(o.status.code().is_some(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(digests(&a), digests(&c));
    let inputs = manifest(&c)["inputs"].clone();
    assert_eq!(inputs[0]["sha256"], sha256_hex(&fs::read(&path).unwrap()));
}

#[test]
fn outputs_stay_inside_the_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    let o = lab(
        &["simulate", "--seed", "1", "--set", "simulate.trajectories=2", "--set", "simulate.sde.t_max=20", "--set", "simulate.sde.dt=1e-3"],
        &out,
    );
    assert!(o.status.code().is_some());
    let listed: Vec<String> = digests(&out).into_iter().map(|(p, _)| p).collect();
    let mut on_disk: Vec<String> =
        fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    on_disk.retain(|n| n != MANIFEST_NAME);
    on_disk.sort();
    assert_eq!(listed, on_disk);
    assert!(listed.iter().any(|p| p == "trajectory_000.jsonl"));
    let siblings: Vec<_> = fs::read_dir(tmp.path()).unwrap().collect();
    assert_eq!(siblings.len(), 1);
}

#[test]
fn audit_and_convexity_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("audit");
    assert!(lab(&["audit"], &out).status.success());
    assert!(verify_manifest(&out).unwrap());
    let out = tmp.path().join("cvx");
    let o = lab(&["convexity", "--set", "convexity.samples=20", "--set", "model.cutoff=4"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phonon-laser"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap()
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn steady_writes_versioned_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["steady", "--preset", "lasing", "--fock-cutoff", "30", "--out", "res"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["status"], "ok");
    let doc = read(&dir.path().join("res/steady.json"));
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["kind"], "steady");
    assert_eq!(doc["spec"]["fock_cutoff"], 30);
    let p = doc["distribution"].as_array().unwrap();
    assert_eq!(p.len(), 30);
    assert!(doc["nbar"].as_f64().unwrap() > 1.0);
}

#[test]
fn missing_cutoff_fails_with_config_class() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["steady"], dir.path());
    assert!(!o.status.success());
    let e = stderr_json(&o);
    assert_eq!(e["status"], "error");
    assert_eq!(e["error_class"], "config");
}

#[test]
fn bad_config_fails_with_parse_class() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "task = \"steady\"\nbogus = 1\n[system]\nfock_cutoff = 10\n").unwrap();
    let o = run(&["steady", "--config", "run.toml"], dir.path());
    assert!(!o.status.success());
    let e = stderr_json(&o);
    assert_eq!(e["error_class"], "parse");
    assert!(e["message"].as_str().unwrap().contains("line 2"));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let text = "task = \"evolve\"\n[system]\npreset = \"reference\"\nmodel = \"two-level\"\nfock_cutoff = 12\n[output]\ndir = \"from_config\"\n";
    fs::write(dir.path().join("run.toml"), text).unwrap();
    let o = run(&["steady", "--config", "run.toml", "--fock-cutoff", "16"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read(&dir.path().join("from_config/steady.json"));
    assert_eq!(doc["spec"]["fock_cutoff"], 16);
    assert_eq!(doc["spec"]["be_levels"], 2);
    let o = run(&["steady", "--config", "run.toml", "--out", "flag"], dir.path());
    assert!(o.status.success());
    assert_eq!(read(&dir.path().join("flag/steady.json"))["spec"]["fock_cutoff"], 12);
}

#[test]
fn sweep_writes_csv_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let text = "task = \"sweep\"\n[system]\npreset = \"diagram\"\nmodel = \"two-level\"\nfock_cutoff = 15\n[sweep]\ninv_kappa_c_ms = [0.03, 0.4]\ninv_gamma_c_us = [1.0, 2.3]\n";
    fs::write(dir.path().join("run.toml"), text).unwrap();
    let o = run(&["sweep", "--config", "run.toml", "--out", "a", "--workers", "2"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["result"]["points"], 4);
    let first = fs::read(dir.path().join("a/sweep.csv")).unwrap();
    assert!(String::from_utf8_lossy(&first).starts_with("# schema_version=1\n"));
    assert!(dir.path().join("a/sweep.bitmap").exists());
    let o = run(&["sweep", "--config", "run.toml", "--out", "a", "--resume"], dir.path());
    assert!(o.status.success());
    assert_eq!(fs::read(dir.path().join("a/sweep.csv")).unwrap(), first);
}

#[test]
fn calibrate_and_carrier_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["calibrate-decay", "--fock-cutoff", "10"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read(&dir.path().join("calibrate-decay.json"));
    assert!((doc["saturation"][0].as_f64().unwrap() - 0.575).abs() < 0.005);
    let o = run(&["carrier", "--fock-cutoff", "20", "--model", "two-level"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read(&dir.path().join("carrier.json"));
    assert_eq!(doc["t_us"].as_array().unwrap().len(), doc["excitation"].as_array().unwrap().len());
}

#[test]
fn diffusion_and_charfun_emit_series() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["diffusion", "--fock-cutoff", "30", "--model", "two-level"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read(&dir.path().join("diffusion.json"));
    assert_eq!(doc["t_ms"].as_array().unwrap().len(), doc["theta_sq"].as_array().unwrap().len());
    assert!(doc["rate"].as_f64().unwrap() > 0.0);
    let o = run(&["charfun", "--fock-cutoff", "20", "--model", "two-level"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read(&dir.path().join("charfun.json"));
    assert_eq!(doc["axes"].as_array().unwrap().len(), 2);
    assert_eq!(doc["axes"][0]["beta"].as_array().unwrap().len(), 71);
}

#[test]
fn locking_drive_is_rejected_for_diffusion() {
    let dir = tempfile::tempdir().unwrap();
    let text = "task = \"diffusion\"\n[system]\npreset = \"reference\"\nfock_cutoff = 10\ntickle_khz = 0.1\n";
    fs::write(dir.path().join("run.toml"), text).unwrap();
    let o = run(&["diffusion", "--config", "run.toml"], dir.path());
    assert!(!o.status.success());
    assert_eq!(stderr_json(&o)["error_class"], "config");
}

#[test]
fn unknown_preset_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["evolve", "--preset", "nope", "--fock-cutoff", "10"], dir.path());
    assert!(!o.status.success());
    assert_eq!(stderr_json(&o)["error_class"], "config");
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn aiaas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aiaas")).args(args).env_remove("AIAAS_OUT_DIR").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn cfg(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

#[test]
fn validate_accepts_shipped_configs() {
    for name in ["compress.toml", "adaptive-vnf.toml", "conflict-demo.toml", "conflict-single.toml"] {
        let o = aiaas(&["validate", "--config", &cfg(name)]);
        assert_eq!(code(&o), 0, "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn validate_rejects_broken_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "scenario = \"conflict-demo\"\n").unwrap();
    let o = aiaas(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn scenario_mismatch_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let o = aiaas(&[
        "run", "--scenario", "compress", "--config", &cfg("conflict-demo.toml"),
        "--out", dir.path().to_str().unwrap(), "--seed", "7",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = aiaas(&[
        "run", "--scenario", "conflict-demo", "--config", &cfg("conflict-demo.toml"),
        "--out", dir.path().to_str().unwrap(), "--seed", "7", "--strict",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("summary.txt").exists());
    assert!(dir.path().join("knob_off.csv").exists());
}

#[test]
fn env_var_sets_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_aiaas"))
        .args(["run", "--scenario", "conflict-demo", "--config", &cfg("conflict-single.toml"), "--seed", "3"])
        .env("AIAAS_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("seed = 3"));
}

#[test]
fn strict_threshold_miss_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let base = configs().canonicalize().unwrap();
    let text = fs::read_to_string(base.join("conflict-demo.toml"))
        .unwrap()
        .replace("min_reversals = 10", "min_reversals = 100000")
        .replace("\"chains/", &format!("\"{}/chains/", base.display()))
        .replace("\"catalogs/", &format!("\"{}/catalogs/", base.display()));
    let path = dir.path().join("strict-miss.toml");
    fs::write(&path, text).unwrap();
    let out_dir = dir.path().join("out");
    let out = out_dir.to_str().unwrap();
    let args = ["run", "--scenario", "conflict-demo", "--config", path.to_str().unwrap(), "--out", out, "--seed", "7"];
    let lax = aiaas(&args);
    let strict = aiaas(&[&args[..], &["--strict"]].concat());
    assert_eq!(code(&lax), 0);
    assert_eq!(code(&strict), 4);
}

#[test]
fn oracle_embed_reports_placements() {
    let o = aiaas(&[
        "oracle", "embed", "--topology", &cfg("topologies/lab.toml"), "--chain", &cfg("chains/setpoint-high.toml"),
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.starts_with("feasible"));
    assert_eq!(text.lines().filter(|l| l.contains(" -> ")).count(), 5);
}

#[test]
fn oracle_embed_reports_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let chain = fs::read_to_string(configs().join("chains/setpoint-high.toml")).unwrap().replacen("cpu = 50", "cpu = 9000", 1);
    let path = dir.path().join("huge.toml");
    fs::write(&path, chain).unwrap();
    let o = aiaas(&["oracle", "embed", "--topology", &cfg("topologies/lab.toml"), "--chain", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("infeasible"));
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn piston(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_piston"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_kind(o: &Output) -> String {
    let line = String::from_utf8_lossy(&o.stderr);
    let v: Value = serde_json::from_str(line.lines().last().unwrap()).unwrap();
    v["kind"].as_str().unwrap().to_string()
}

const QUICK: [&str; 2] = ["study.n_phases=3", "study.epsilons=[0.1,0.05]"];

#[test]
fn simulate_hard_writes_trajectory_events_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = piston(
        &["simulate", "--config", &config("hard.json"), "epsilon=0.05"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "trajectory.csv",
        "events.csv",
        "summary.json",
        "manifest.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(traj
        .lines()
        .next()
        .unwrap()
        .contains("effective_hamiltonian"));
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["verb"], "simulate");
    assert_eq!(m["config"]["system"]["epsilon"], 0.05);
    assert!(m["outputs"]["events.csv"].as_str().unwrap().len() == 64);
}

#[test]
fn average_soft_conserves_energy_and_phase_integrals() {
    let dir = tempfile::tempdir().unwrap();
    let o = piston(&["average", "--config", &config("soft.json")], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&dir.path().join("summary.json"));
    assert!(s["averaged_energy_relative_spread"].as_f64().unwrap() < 1e-8);
    for v in s["phase_integral_relative_spread"].as_array().unwrap() {
        assert!(v.as_f64().unwrap() < 1e-8);
    }
    let rows = std::fs::read_to_string(dir.path().join("trajectory.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 1002);
}

#[test]
fn converge_is_reproducible_across_job_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config("hard.json");
    let mut args = vec![
        "converge",
        "--config",
        cfg.as_str(),
        "--plot",
        "--jobs",
        "1",
    ];
    args.extend(QUICK);
    assert!(piston(&args, a.path()).status.success());
    args[5] = "4";
    assert!(piston(&args, b.path()).status.success());
    let read = |d: &Path| std::fs::read(d.join("manifest.json")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert!(a.path().join("plot.gp").exists());
    assert!(a.path().join("timings.csv").exists());
    let fit = json(&a.path().join("fit.json"));
    assert_eq!(fit["per_delta"][0]["worst"].as_array().unwrap().len(), 2);
}

#[test]
fn seed_flag_changes_phases_and_is_recorded() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config("hard.json");
    let mut args = vec!["converge", "--config", cfg.as_str()];
    args.extend(QUICK);
    assert!(piston(&args, a.path()).status.success());
    args.extend(["--seed", "7"]);
    assert!(piston(&args, b.path()).status.success());
    let (ma, mb) = (
        json(&a.path().join("manifest.json")),
        json(&b.path().join("manifest.json")),
    );
    assert_eq!(mb["seed"], 7);
    assert_ne!(ma["outputs"]["errors.csv"], mb["outputs"]["errors.csv"]);
}

#[test]
fn npiston_and_audit_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = piston(
        &["npiston", "--config", &config("npiston.json")],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&dir.path().join("summary.json"));
    assert!(s["hamiltonian_relative_drift"].as_f64().unwrap() < 1e-8);
    let o = piston(
        &["audit", "--config", &config("equilibrium.json")],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("rates.csv").exists());
}

#[test]
fn config_errors_exit_two_with_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    let o = piston(&["simulate", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_kind(&o), "config");

    let cfg = config("hard.json");
    for extra in ["epsilon=0", "n1=2", "system.unknown=1", "delta=-1"] {
        let o = piston(&["simulate", "--config", &cfg, extra], dir.path());
        assert_eq!(o.status.code(), Some(2), "{extra}");
        assert_eq!(stderr_kind(&o), "config");
    }
    let o = piston(&["npiston", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_piston"))
        .args(["average", "--config", &config("hard.json"), "--out"])
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_kind(&o), "runtime");
}

use std::fs;
use std::path::Path;
use std::process::Command;

fn neckflow(args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_neckflow"))
        .args(args)
        .output()
        .expect("binary runs");
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn out_arg(dir: &Path, sub: &str) -> String {
    dir.join(sub).to_string_lossy().into_owned()
}

#[test]
fn simulate_writes_artifacts_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sim.json",
        r#"{
            "command": "simulate",
            "initial": {"family": "mode", "m": 3, "n": 0, "parity": "cos", "amplitude": 1e-4},
            "grid": {"half_length": 8, "n_y": 81, "n_theta": 1},
            "stop": {"tau_max": 2}
        }"#,
    );
    for run in ["a", "b"] {
        assert_eq!(neckflow(&["simulate", "--config", &cfg, "--out", &out_arg(dir.path(), run)]), 0);
    }
    for file in ["trace.csv", "final_profile.csv", "verdict.json"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert!(!a.is_empty(), "{file} is empty");
        assert_eq!(a, b, "{file} differs between reruns");
    }
    let trace = fs::read_to_string(dir.path().join("a/trace.csv")).unwrap();
    assert!(trace.lines().next().unwrap().starts_with("tau,"));
    let log = fs::read_to_string(dir.path().join("a/run.log")).unwrap();
    assert!(log.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
}

#[test]
fn spectrum_and_audit_succeed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(neckflow(&["spectrum", "--out", &out_arg(dir.path(), "s")]), 0);
    assert!(dir.path().join("s/spectrum.csv").exists());
    assert!(dir.path().join("s/coefficients.csv").exists());

    assert_eq!(neckflow(&["audit", "--out", &out_arg(dir.path(), "a")]), 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/audit.json")).unwrap()).unwrap();
    assert!(report.is_array() || report.is_object());
}

#[test]
fn escape_and_sweep_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "esc.json",
        r#"{"initial": {"family": "near_degenerate"}, "grid": {"half_length": 12, "n_y": 241, "n_theta": 1}}"#,
    );
    assert_eq!(neckflow(&["escape", "--config", &cfg, "--a", "1e-3", "--out", &out_arg(dir.path(), "e")]), 0);
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("e/escape_report.json")).unwrap(),
    )
    .unwrap();
    assert!(report["t_eps"].as_f64().unwrap() >= 1.0);

    for run in ["s1", "s2"] {
        let code = neckflow(&[
            "sweep", "--config", &cfg, "--a-grid", "1e-4:1e-3:lin2", "--jobs", "2", "--out",
            &out_arg(dir.path(), run),
        ]);
        assert_eq!(code, 0);
    }
    let a = fs::read(dir.path().join("s1/sweep.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("s2/sweep.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 3);
}

#[test]
fn failed_hypothesis_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // a zero seed cannot satisfy the lower bound on D
    let cfg = write_config(dir.path(), "zero.json", r#"{"initial": {"family": "near_degenerate"}}"#);
    assert_eq!(neckflow(&["escape", "--config", &cfg, "--a", "0", "--out", &out_arg(dir.path(), "z")]), 2);
    let log = fs::read_to_string(dir.path().join("z/run.log")).unwrap();
    assert!(log.contains("hypothesis iii failed"), "{log}");
    assert!(log.contains(r#"{"status":2}"#), "{log}");
}

#[test]
fn bad_configs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "u.json", r#"{"grid": {"n_y": 121, "bogus": 1}}"#);
    let out = out_arg(dir.path(), "u");
    assert_eq!(neckflow(&["simulate", "--config", &unknown, "--out", &out]), 1);
    let log = fs::read_to_string(dir.path().join("u/run.log")).unwrap();
    assert!(log.contains("grid.bogus"), "{log}");

    let broken = write_config(dir.path(), "b.json", "{\"grid\": ");
    assert_eq!(neckflow(&["simulate", "--config", &broken, "--out", &out_arg(dir.path(), "b")]), 1);

    let mismatch = write_config(dir.path(), "m.json", r#"{"command": "audit"}"#);
    assert_eq!(neckflow(&["simulate", "--config", &mismatch, "--out", &out_arg(dir.path(), "m")]), 1);
}

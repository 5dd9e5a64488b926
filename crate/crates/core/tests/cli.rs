use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_curvhom"))
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(config: &PathBuf, extra: &[&str]) -> Output {
    bin().arg("run").arg(config).args(extra).output().unwrap()
}

fn task<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["tasks"].as_array().unwrap().iter().find(|t| t["task"] == name).unwrap()
}

const UNDEFORMED: &str = r#"
[model]
kind = "sl2r"
epsilon = 0.0

[run]
tasks = ["curvature", "nullity_scan"]
points = 6
seed = 3
"#;

#[test]
fn undeformed_sl2_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&write(&dir, "a.toml", UNDEFORMED), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);
    let scalar = task(&report, "curvature")["values"]["scalar"].as_f64().unwrap();
    assert!((scalar + 2.0).abs() < 1e-10);
    let nullity = task(&report, "nullity_scan");
    assert_eq!(nullity["values"]["positive_kappas"], serde_json::json!([-1.0]));
    let check = nullity["checks"].as_array().unwrap().iter().find(|c| c["name"] == "index at κ = -1").unwrap();
    assert_eq!(check["residual"], 0.0);
    assert_eq!(check["pass"], true);
}

#[test]
fn non_cyclic_holonomy_is_reported_not_failed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        &dir,
        "h.toml",
        r#"
[model]
kind = "almost_abelian"
weights = [1, 1]
z = [1.0, 1.0, 1.0, 1.0]

[run]
tasks = ["holonomy"]
max_order = 3
"#,
    );
    let out = run(&cfg, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let values = &task(&report, "holonomy")["values"];
    assert_eq!(values["cyclicity"]["cyclic"], false);
    assert!(values["dim"].as_u64().unwrap() < 10);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let odd = write(
        &dir,
        "odd.toml",
        "[model]\nkind = \"almost_abelian\"\nm = 3\nweights = [1]\nz = [1.0, 0.0, 0.0]\n\n[run]\ntasks = [\"curvature\"]\n",
    );
    let out = run(&odd, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("m must be even"));

    let unknown = write(&dir, "u.toml", "[model]\nkind = \"sl2r\"\n\n[run]\ntasks = [\"sparkle\"]\n");
    assert_eq!(run(&unknown, &[]).status.code(), Some(1));

    let missing = dir.path().join("absent.toml");
    assert_eq!(run(&missing, &[]).status.code(), Some(1));
}

#[test]
fn tightened_tolerance_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        &dir,
        "t.toml",
        "[model]\nkind = \"sl2r\"\nepsilon = 0.3\n\n[run]\ntasks = [\"oracle_compare\"]\npoints = 3\n",
    );
    assert_eq!(run(&cfg, &[]).status.code(), Some(0));
    let out = run(&cfg, &["--tol", "oracle=1e-15"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn list_tasks_names_every_task() {
    let out = bin().arg("--list-tasks").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "curvature",
        "nullity_scan",
        "warp_check",
        "holonomy",
        "homogeneity",
        "eqns_residual",
        "oracle_compare",
        "geodesic_probe",
    ] {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn output_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "d.toml", UNDEFORMED);
    let a = run(&cfg, &[]).stdout;
    let b = run(&cfg, &["--sequential"]).stdout;
    assert_eq!(a, b);
    let out = dir.path().join("report.json");
    let c = run(&cfg, &["--out", out.to_str().unwrap()]);
    assert!(c.stdout.is_empty());
    assert_eq!(std::fs::read(&out).unwrap(), a);
    assert_ne!(run(&cfg, &["--seed", "4"]).stdout, a);
}

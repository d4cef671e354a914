//! End-to-end tests of the `hysys` binary: exit codes, emitted files, and
//! run-to-run determinism of everything it writes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hysys"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

#[test]
fn demos_pass_and_finish_quickly() {
    for name in [
        "thermostat",
        "bouncing-ball",
        "switched-state",
        "switched-time",
        "networked-thermostats",
        "stability-transport",
    ] {
        let start = Instant::now();
        let out = run(&["demo", name]);
        assert!(out.status.success(), "demo {name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(start.elapsed().as_secs_f64() < 10.0, "demo {name} too slow");
    }
}

#[test]
fn simulate_writes_reports_and_trajectories() {
    let dir = std::env::temp_dir().join("hysys-cli-test-sim");
    std::fs::create_dir_all(&dir).unwrap();
    let out = run(&[
        "simulate",
        scenario("bouncing-ball.scn").to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["drop.json", "drop.csv", "drop-jumps.csv"] {
        let path = dir.join(file);
        assert!(path.is_file(), "missing {file}");
        assert!(std::fs::metadata(&path).unwrap().len() > 0, "empty {file}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("drop.json")).unwrap()).unwrap();
    assert_eq!(report["verification"]["pass"], serde_json::Value::Bool(true));
    assert!(report["jump_times"].as_array().unwrap().len() >= 4);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let collect = |dir: &Path| {
        let _ = std::fs::remove_dir_all(dir);
        std::fs::create_dir_all(dir).unwrap();
        for (args, _) in cases(dir) {
            let refs: Vec<&str> = args.iter().map(String::as_str).collect();
            let out = run(&refs);
            assert!(out.status.success(), "{:?}: {}", args, String::from_utf8_lossy(&out.stderr));
        }
        let mut blob = Vec::new();
        let mut names: Vec<_> =
            std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        for p in names {
            blob.extend(std::fs::read(&p).unwrap());
        }
        blob
    };
    let a = std::env::temp_dir().join("hysys-cli-det-a");
    let b = std::env::temp_dir().join("hysys-cli-det-b");
    assert_eq!(collect(&a), collect(&b));
}

fn cases(dir: &Path) -> Vec<(Vec<String>, ())> {
    let d = dir.to_str().unwrap().to_string();
    let scn = |n: &str| scenario(n).to_str().unwrap().to_string();
    vec![
        (vec!["simulate".into(), scn("bouncing-ball.scn"), "--out".into(), d.clone()], ()),
        (vec!["simulate".into(), scn("thermostat.scn"), "--out".into(), d.clone()], ()),
        (
            vec![
                "verify".into(),
                "theorem".into(),
                scn("networked-thermostats.scn"),
                "--samples".into(),
                "120".into(),
                "--out".into(),
                d.clone(),
            ],
            (),
        ),
        (vec!["finite".into(), "--instances".into(), "10".into(), "--out".into(), d], ()),
    ]
}

#[test]
fn verify_targets_pass_on_shipped_scenarios() {
    for (target, file) in [
        ("control", "thermostat.scn"),
        ("morphism", "thermostat.scn"),
        ("theorem", "networked-thermostats.scn"),
        ("network", "networked-thermostats.scn"),
        ("theorem", "random-affine.scn"),
    ] {
        let out = run(&["verify", target, scenario(file).to_str().unwrap()]);
        assert!(
            out.status.success(),
            "verify {target} {file}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn missing_file_is_an_input_error() {
    let out = run(&["simulate", "/nonexistent/path.scn"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_scenario_reports_position_and_exits_2() {
    let dir = std::env::temp_dir().join("hysys-cli-test-bad");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.scn");
    std::fs::write(&path, "space s\n  node a 1\n    coord 0 frobnicate\n").unwrap();
    let out = run(&["simulate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("3"), "diagnostic should carry the line number: {err}");
}

#[test]
fn unknown_demo_is_an_input_error() {
    let out = run(&["demo", "no-such-demo"]);
    assert_eq!(out.status.code(), Some(2));
}

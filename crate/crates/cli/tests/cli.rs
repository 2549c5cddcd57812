//! End-to-end checks of the installed binary: artifact layout, documented
//! example values, exit codes, and byte-stable reruns.

use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reeblab"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env_remove("REEBLAB_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn run_ok(dir: &Path, args: &[&str]) -> serde_json::Value {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stem = args
        .iter()
        .position(|a| *a == "--out")
        .map(|i| args[i + 1])
        .expect("tests name their artifacts");
    let text = std::fs::read_to_string(dir.join(format!("{stem}.json"))).expect("artifact");
    serde_json::from_str(&text).expect("valid JSON artifact")
}

#[test]
fn builds_a_cube_document_and_checks_it() {
    let dir = tempfile::tempdir().unwrap();
    let doc = run_ok(dir.path(), &["body", "build", "--cube-p", "8", "--out", "cube"]);
    assert_eq!(doc["kind"], "pnorm_cube");
    assert_eq!(doc["p"], 8);
    assert_eq!(doc["version"], 1);
    let meta: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("cube.meta.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(meta["artifacts"][0], "cube.json");

    let body_path = dir.path().join("cube.json");
    let report = run_ok(
        dir.path(),
        &["body", "check", "--body", body_path.to_str().unwrap(), "--out", "check"],
    );
    assert_eq!(report["report"]["passed"], true);
    assert_eq!(report["config"]["command"], "body check");
    assert_eq!(report["tool"], "reeblab");
}

#[test]
fn closed_orbits_return_and_zero_horizon_is_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_ok(
        dir.path(),
        &[
            "flow", "integrate", "--body", "cube_p2", "--field", "reeb", "--T",
            "3.14159265358979", "--out", "hopf",
        ],
    );
    let ret = summary["report"]["return_distance"].as_f64().unwrap();
    assert!(ret <= 1e-7, "return distance {ret}");

    run_ok(dir.path(), &["flow", "integrate", "--body", "cube_p2", "--T", "0", "--out", "still"]);
    let csv = std::fs::read_to_string(dir.path().join("still.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "header plus the single t = 0 row");
}

#[test]
fn distance_to_the_cube_limit_matches_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_ok(
        dir.path(),
        &[
            "body", "distance", "--a", "cube_p16", "--b", "cube_limit", "--resolution",
            "20000", "--out", "dist",
        ],
    );
    let value = report["report"]["value"].as_f64().unwrap();
    let expected = 2.0 * (1.0 - 4.0_f64.powf(-1.0 / 16.0));
    assert!((value - expected).abs() <= 1e-3, "value {value} expected {expected}");
}

#[test]
fn reruns_write_byte_identical_reports() {
    let args = [
        "entropy", "estimate", "--body", "ellipsoid", "--N", "3", "--T", "20",
        "--seed", "9", "--out", "est",
    ];
    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    run_ok(dir1.path(), &args);
    run_ok(dir2.path(), &args);
    for file in ["est.json", "est.csv"] {
        let a = std::fs::read(dir1.path().join(file)).unwrap();
        let b = std::fs::read(dir2.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between reruns");
    }
    assert!(dir1.path().join("est.meta.json").is_file());
}

#[test]
fn config_files_supply_parameters_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.json");
    std::fs::write(
        &cfg_path,
        r#"{"version":1,"command":"entropy estimate","body":"ellipsoid","N":3,"T":15.0,"seed":4}"#,
    )
    .unwrap();
    let artifact = run_ok(
        dir.path(),
        &[
            "entropy", "estimate", "--config", cfg_path.to_str().unwrap(), "--N", "5",
            "--out", "est",
        ],
    );
    assert_eq!(artifact["config"]["N"], 5, "flag overrides file");
    assert_eq!(artifact["config"]["T"].as_f64(), Some(15.0), "file supplies the rest");
    assert_eq!(artifact["report"]["ensemble"], 5);
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();

    // 2: unusable input specification
    let out = run(dir.path(), &["body", "distance", "--a", "no_such.json", "--b", "cube_limit"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // 2: config file with an unknown field
    let cfg = dir.path().join("typo.json");
    std::fs::write(&cfg, r#"{"version":1,"bodee":"x"}"#).unwrap();
    let out = run(dir.path(), &["entropy", "estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // 3: operation the object cannot support (derivatives of a rough factor)
    let out = run(dir.path(), &["entropy", "geodesic", "--metric", "rough", "--N", "2", "--T", "1"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    // 4: integrator failure, with the last good state in the diagnostic
    let out = run(
        dir.path(),
        &["flow", "integrate", "--body", "cube_p2", "--T", "1", "--rtol", "1e-300", "--atol", "1e-300"],
    );
    assert_eq!(out.status.code(), Some(4));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("last good state"), "{msg}");
}

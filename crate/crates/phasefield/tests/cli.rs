//! Integration tests for the `phasefield` binary: argument handling,
//! exit codes, and the run / postprocess round trip through the output
//! directory.

use std::path::Path;
use std::process::{Command, Output};

use phasefield::scenario::BUILTIN_NAMES;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phasefield"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn binary")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn list_names_every_builtin() {
    let out = run(&["list"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    for name in BUILTIN_NAMES {
        assert!(text.contains(name), "listing misses {name}:\n{text}");
    }
}

#[test]
fn list_json_matches_builtin_names() {
    let out = run(&["list", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("valid JSON");
    let names: Vec<&str> = parsed
        .as_array()
        .expect("array of scenarios")
        .iter()
        .map(|e| e["name"].as_str().expect("name field"))
        .collect();
    assert_eq!(names, BUILTIN_NAMES.to_vec());
}

#[test]
fn validate_builtin_emits_resolved_config() {
    let out = run(&["validate", "--scenario", "sen-tension", "--json"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let cfg: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("valid JSON");
    assert_eq!(cfg["material"]["youngs_modulus"].as_f64(), Some(210.0e9));
    assert_eq!(cfg["spec_version"].as_u64(), Some(1));
}

#[test]
fn validate_rejects_bad_field_with_exit_2() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("bad.json");
    let mut cfg: serde_json::Value =
        serde_json::from_str(&stdout(&run(&["validate", "--scenario", "sen-tension", "--json"])))
            .expect("valid JSON");
    cfg["material"]["poisson_ratio"] = serde_json::json!(0.7);
    std::fs::write(&path, cfg.to_string()).expect("write config");
    let out = run(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(
        err.contains("material.poisson_ratio"),
        "error does not name the offending field:\n{err}"
    );
}

#[test]
fn unknown_scenario_exits_2() {
    let out = run(&["validate", "--scenario", "no-such-benchmark"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no-such-benchmark"));
}

#[test]
fn overrides_reject_bad_syntax() {
    let out = run(&["validate", "--scenario", "sen-tension", "--set", "no-equals"]);
    assert_eq!(out.status.code(), Some(2));
}

fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let cfg = serde_json::json!({
        "spec_version": 1,
        "name": "tiny",
        "geometry": {
            "extents": [1.0e-3, 1.0e-3],
            "divisions": [8, 8],
            "slit": { "segments": [ { "a": [0.0, 0.5e-3], "b": [0.5e-3, 0.5e-3] } ] }
        },
        "material": { "youngs_modulus": 210.0e9, "poisson_ratio": 0.3 },
        "fracture": { "G_c": 2700.0, "l0": 1.0e-4 },
        "schedule": {
            "phases": [ {
                "steps": 3,
                "dt": 1.0,
                "loads": [
                    { "type": "fix", "set": "bottom", "components": [0, 1] },
                    { "type": "fix", "set": "top", "components": [0] },
                    { "type": "displacement", "set": "top", "component": 1, "increment": 1.0e-7 }
                ]
            } ]
        },
        "outputs": { "snapshot_every": 1, "reaction_set": "top", "reaction_component": 1 }
    });
    let path = dir.join("tiny.json");
    std::fs::write(&path, cfg.to_string()).expect("write config");
    path
}

#[test]
fn run_and_postprocess_round_trip() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = tiny_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
        "--threads",
        "1",
        "--quiet",
        "--set",
        "fracture.G_c=2000",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .expect("valid manifest");
    assert_eq!(manifest["steps_completed"].as_u64(), Some(3));
    assert_eq!(
        manifest["overrides"],
        serde_json::json!(["fracture.G_c=2000"])
    );
    assert!(out_dir.join("load_displacement.csv").is_file());
    assert!(out_dir.join("energies.csv").is_file());

    // Snapshots are legacy-format VTK files listed in the manifest.
    let files = manifest["files"].as_array().expect("files array");
    let vtk = files
        .iter()
        .map(|f| f["path"].as_str().unwrap())
        .find(|p| p.ends_with(".vtk"))
        .expect("at least one snapshot");
    let snapshot = std::fs::read_to_string(out_dir.join(vtk)).expect("snapshot readable");
    assert!(snapshot.starts_with("# vtk DataFile Version 3.0"));
    assert!(snapshot.contains("phi"));

    let post = run(&["postprocess", out_dir.to_str().unwrap(), "--json"]);
    assert_eq!(post.status.code(), Some(0), "stderr: {}", stderr(&post));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&post)).expect("valid JSON");
    assert_eq!(summary["steps_completed"].as_u64(), Some(3));
    assert_eq!(summary["snapshots"].as_u64(), Some(3));
    assert!(summary["peak_reaction"].as_f64().unwrap() > 0.0);
}

#[test]
fn postprocess_missing_directory_fails() {
    let out = run(&["postprocess", "/nonexistent/run-dir"]);
    assert_ne!(out.status.code(), Some(0));
}

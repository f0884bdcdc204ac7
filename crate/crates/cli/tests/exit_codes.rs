//! The binary's exit codes: 0 pass, 1 failed check, 2 bad input, 3 internal error.

use std::path::Path;
use std::process::Command;

fn conflab(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_conflab")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const FLAT_GBC: &str = "name = \"flat\"\ndimension = 4\nfactor = \"1\"\nsuites = [\"gbc\"]\n\
    [annulus]\ninner_radius_chart = 0.25\nouter_radius_chart = 1.0\n[resolution]\nradial_count = 9\nsphere_degree = 4\n";

#[test]
fn passing_scenario_exits_zero_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "s.toml", &format!("{FLAT_GBC}[topology]\nchi = 0.0\nm = 0.0\n"));
    let out = dir.path().join("out");
    let (code, stdout, _) = conflab(&["verify", &file, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
    assert!(out.join("report.json").is_file());
    assert!(out.join("gbc.csv").is_file());
}

#[test]
fn failing_check_exits_one() {
    // flat space has no curvature to account for chi = 2
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "s.toml", &format!("{FLAT_GBC}[topology]\nchi = 2.0\nm = 0.0\n"));
    let out = dir.path().join("out");
    let (code, stdout, _) = conflab(&["verify", &file, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1, "{stdout}");
    assert!(stdout.contains("FAIL gbc"));
}

#[test]
fn bad_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let file = write(dir.path(), "s.toml", FLAT_GBC);
    let (code, _, stderr) = conflab(&["verify", &file, "--out", out]);
    assert_eq!(code, 2);
    assert!(stderr.contains("topology"), "{stderr}");
    let broken = write(dir.path(), "b.toml", "name = \"x\"\ndimension = [\n");
    let (code, _, stderr) = conflab(&["verify", &broken, "--out", out]);
    assert_eq!(code, 2);
    assert!(stderr.contains("line"), "{stderr}");
    assert_eq!(conflab(&["verify", "/nonexistent/s.toml"]).0, 2);
    assert_eq!(conflab(&["list-fixtures", "--show", "nope"]).0, 2);
}

#[test]
fn unwritable_output_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "s.toml", &format!("{FLAT_GBC}[topology]\nchi = 0.0\nm = 0.0\n"));
    let blocker = write(dir.path(), "blocker", "");
    let out = format!("{blocker}/out");
    assert_eq!(conflab(&["verify", &file, "--out", &out]).0, 3);
}

#[test]
fn overrides_replace_suites_seed_and_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let (code, stdout, _) = conflab(&[
        "verify",
        "fixture:perturbed-inversion",
        "--out",
        out.to_str().unwrap(),
        "--suite",
        "curvature",
        "--seed",
        "11",
        "--resolution",
        "21",
    ]);
    assert_eq!(code, 0, "{stdout}");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["suites"].as_array().unwrap().len(), 1);
    assert_eq!(json["provenance"]["seed"], 11);
    assert_eq!(json["provenance"]["resolution"]["radial_count"], 21);
    assert_eq!(json["schema"], 1);
    // overrides are validated like the file itself
    assert_eq!(conflab(&["verify", "fixture:perturbed-inversion", "--resolution", "2"]).0, 2);
}

#[test]
fn fixtures_list_and_show() {
    let (code, stdout, _) = conflab(&["list-fixtures"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("round-s4-gbc") && stdout.contains("g-inf"));
    let (code, stdout, _) = conflab(&["list-fixtures", "--show", "g-inf"]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("name = \"g-inf\""));
}

//! The `biharm` binary.

use std::process::Command;

fn biharm() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_biharm"));
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("BIHARM_")) {
        c.env_remove(k);
    }
    c
}

#[test]
fn quick_verify_passes_and_emits_json_lines() {
    let out = biharm().args(["verify", "--quick"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() > 10);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["pass"], true, "{line}");
        assert!(v["statement"].is_string() && v["measured"].is_number());
    }
}

#[test]
fn tightened_verify_fails() {
    let out = biharm().args(["verify", "--quick", "--tighten", "0.5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.contains("\"pass\":false")));
}

#[test]
fn verify_output_is_reproducible() {
    let run = || biharm().args(["verify", "--quick", "--seed", "3"]).output().unwrap().stdout;
    assert_eq!(run(), run());
}

#[test]
fn markdown_table_is_reproducible() {
    let run = || {
        let out = biharm()
            .args(["table", "--d", "2", "--p-min", "3", "--p-max", "4", "--level-min", "3", "--level-max", "4", "--format", "md"])
            .output()
            .unwrap();
        assert!(out.status.success());
        out.stdout
    };
    let first = run();
    assert_eq!(first, run());
    let text = String::from_utf8(first).unwrap();
    assert!(text.lines().filter(|l| l.starts_with('|')).count() >= 4, "{text}");
}

#[test]
fn csv_table_has_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let status = biharm()
        .args(["table", "--geometry", "quarter-annulus-2d", "--smoother", "hybrid", "--p-min", "3", "--p-max", "4"])
        .args(["--level-min", "3", "--level-max", "4", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "d,geometry,smoother,p,level,dofs,nnz,iterations,seconds,converged,status");
    assert_eq!(lines.count(), 4);
}

#[test]
fn environment_supplies_unset_flags() {
    let out = biharm()
        .args(["table", "--p-min", "3", "--p-max", "3", "--level-min", "3", "--level-max", "3"])
        .env("BIHARM_SMOOTHER", "mass")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains(",mass,"));
}

#[test]
fn solve_writes_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = biharm()
        .args(["solve", "--p", "3", "--level", "3", "--samples", "5", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let samples = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 26);
    assert!(dir.path().join("coefficients.csv").exists());
}

#[test]
fn invalid_arguments_are_rejected() {
    let out = biharm().args(["table", "--p-min", "5", "--p-max", "3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = biharm().args(["table", "--geometry", "no-such-file.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

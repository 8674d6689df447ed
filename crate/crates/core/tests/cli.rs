//! End-to-end runs of the `cyw` binary.

use std::path::Path;
use std::process::{Command, Output};

fn cyw(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cyw"))
        .args(args)
        .current_dir(dir)
        .env_remove("CYW_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn constant_target_on_round_sphere_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.ini", "preset = round-s3\nrefinement = 1\nseed = 3\n[target]\nvalue = 6\n");
    let out = tmp.path().join("out");
    let o = cyw(&["prescribe", "--config", &cfg, "--output-dir", out.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.starts_with("CYWREPORT 1\ntimestamp "));
    assert!(out.join("solution.csv").exists());
    assert!(out.join("obstructions.csv").exists());
}

#[test]
fn odd_sphere_target_is_refused_with_witnesses() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "tau.ini",
        "preset = round-s3\nrefinement = 1\n[target]\nkind = sphere\nexpression = tau\n",
    );
    let out = tmp.path().join("out");
    let o = cyw(&["prescribe", "--config", &cfg, "--output-dir", out.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    let witnesses = std::fs::read_to_string(out.join("witness.csv")).unwrap();
    assert!(witnesses.lines().count() > 1);
}

#[test]
fn malformed_config_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.ini", "preset = round-s3\nrefinement = two\n");
    let o = cyw(&["prescribe", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(cyw(&["eigen", "--nope"], tmp.path()).status.code(), Some(2));
}

#[test]
fn default_output_dir_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "run.ini", "preset = round-s3\nrefinement = 0\n[target]\nvalue = 6\n");
    let o = Command::new(env!("CARGO_BIN_EXE_cyw"))
        .args(["prescribe", "--config", &cfg])
        .current_dir(tmp.path())
        .env("CYW_OUTPUT_DIR", tmp.path().join("env-out"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(tmp.path().join("env-out/report.txt").exists());
}

#[test]
fn bench_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.csv");
    assert_eq!(cyw(&["bench", "--out", empty.to_str().unwrap()], tmp.path()).status.code(), Some(0));
    let text = std::fs::read_to_string(&empty).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("name,preset,refinement,vertices,exit_code,route,mesh_s,"));

    let three = tmp.path().join("three.csv");
    let o = cyw(
        &["bench", "--preset", "round-s3", "--refinements", "0,1,2", "--out", three.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&three).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    let vertices: Vec<usize> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(vertices.windows(2).all(|w| w[0] < w[1]));
    assert!(rows.iter().all(|r| r[4] == "0"));
}

#[test]
fn condition_check_reports_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cyw(&["check", "condition-a", "--function", "tau^2", "-r", "0"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("pass-i"));
    let o = cyw(&["check", "condition-a", "--function", "tau", "-r", "0", "--output-dir", "w"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn mesh_generation_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cyw(&["mesh", "gen", "--preset", "ball-negR", "-r", "0", "--out", "ball.mesh"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let file = tmp.path().join("ball.mesh");
    let mesh = cyw_core::geometry::io::read_mesh(&std::fs::read_to_string(file).unwrap()).unwrap();
    assert_eq!(mesh.vertex_count(), 125);
}

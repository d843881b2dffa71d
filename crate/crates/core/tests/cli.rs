use std::process::Command;

use mlbddc::harness::{exit_code, CSV_HEADER};
use mlbddc::Error;

fn mlbddc(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_mlbddc"))
        .args(args)
        .env_remove("MLBDDC_WORKERS")
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn solve_prints_one_row() {
    let (code, out, _) = mlbddc(&["solve", "--n", "16", "--subdomains", "4/1"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("poisson,2,256,2,4/1,"));
}

#[test]
fn exit_codes() {
    assert_eq!(mlbddc(&["solve", "--subdomains", "4/8/1"]).0, 2);
    assert_eq!(mlbddc(&["solve", "--policy", "everything"]).0, 2);
    assert_eq!(mlbddc(&["solve", "--n", "32", "--subdomains", "16/1", "--max-it", "1"]).0, 1);
    assert_eq!(exit_code(&Error::Numerical("x".into())), 3);
    assert_eq!(exit_code(&Error::Config("x".into())), 2);
}

#[test]
fn worker_override_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_mlbddc"))
        .args(["solve", "--n", "8"])
        .env("MLBDDC_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_mlbddc"))
        .args(["solve", "--n", "8"])
        .env("MLBDDC_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn sweep_config_file_and_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("base.cfg");
    std::fs::write(&cfg, "# shared settings\ndim=2\nn=8\n").unwrap();
    let list = dir.path().join("runs.txt");
    std::fs::write(&list, "subdomains=4/1\nsubdomains=16/4/1 krylov=bicgstab\nsubdomains=4/1\n").unwrap();
    let csv = dir.path().join("out.csv");
    let (code, _, _) = mlbddc(&[
        "sweep",
        list.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].contains(",16/4/1,") && rows[1].contains(",bicgstab,"));
}

#[test]
fn analyze_globs_and_vtk() {
    let (code, out, _) = mlbddc(&["analyze-globs", "--dim", "3", "--n", "6", "--subdomains", "8/1"]);
    assert_eq!(code, 0);
    assert!(out.contains("12 faces, 6 edges, 1 vertices"));

    let dir = tempfile::tempdir().unwrap();
    let vtk = dir.path().join("u.vtk");
    let (code, _, _) = mlbddc(&["export-vtk", "--n", "8", "--output", vtk.to_str().unwrap()]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(vtk).unwrap();
    assert!(text.contains("POINT_DATA 81") && text.contains("CELL_DATA 64"));
    assert_eq!(mlbddc(&["export-vtk", "--n", "8"]).0, 2);
}

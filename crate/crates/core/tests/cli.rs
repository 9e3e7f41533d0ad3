use std::path::Path;
use std::process::Command;

use gelfand::cli::{run, EXIT_CONFIG, EXIT_OK, EXIT_USAGE};
use gelfand::io::read_artifact;

fn gelfand(dir: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["gelfand", "--out", dir.to_str().unwrap()];
    argv.extend_from_slice(args);
    run(argv)
}

#[test]
fn integrals_table_is_written_with_header() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gelfand(dir.path(), &["--seed", "7", "integrals"]), EXIT_OK);
    let (header, body) = read_artifact(dir.path().join("integrals.csv")).unwrap();
    assert_eq!(header["tool"], "gelfand");
    assert_eq!(header["seed"], 7);
    assert_eq!(header["config_hash"].as_str().unwrap().len(), 64);
    assert!(header.get("timestamp").is_none());
    assert!(body.lines().any(|l| l == "e^U,25.13274123,8π,<1e-8"));
}

#[test]
fn bodies_are_deterministic_and_timestamps_optional() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["--seed", "3", "green-eval", "--samples", "5"];
    assert_eq!(gelfand(a.path(), &args), EXIT_OK);
    let mut with_time = vec!["--timestamps"];
    with_time.extend_from_slice(&args);
    assert_eq!(gelfand(b.path(), &with_time), EXIT_OK);
    let (ha, ba) = read_artifact(a.path().join("green.csv")).unwrap();
    let (hb, bb) = read_artifact(b.path().join("green.csv")).unwrap();
    assert_eq!(ba, bb);
    assert_eq!(ha["config_hash"], hb["config_hash"]);
    assert!(hb["timestamp"].is_u64());
    assert_eq!(ba.lines().count(), 6);
}

#[test]
fn seed_changes_the_config_hash() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(gelfand(a.path(), &["--seed", "1", "green-eval", "--samples", "2"]), EXIT_OK);
    assert_eq!(gelfand(b.path(), &["--seed", "2", "green-eval", "--samples", "2"]), EXIT_OK);
    let (ha, ba) = read_artifact(a.path().join("green.csv")).unwrap();
    let (hb, bb) = read_artifact(b.path().join("green.csv")).unwrap();
    assert_ne!(ha["config_hash"], hb["config_hash"]);
    assert_ne!(ba, bb);
}

#[test]
fn usage_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gelfand(dir.path(), &["integrals", "--no-such-flag"]), EXIT_USAGE);
    assert_eq!(gelfand(dir.path(), &["frobnicate"]), EXIT_USAGE);
    assert_eq!(gelfand(dir.path(), &["green-eval", "--domain", "/nonexistent/d.json"]), EXIT_CONFIG);
    assert_eq!(gelfand(dir.path(), &["critical-points", "--m", "0"]), EXIT_CONFIG);
    assert_eq!(gelfand(dir.path(), &["vortex", "--points", "2.0,0"]), EXIT_CONFIG);
    assert_eq!(gelfand(dir.path(), &["limit-spectrum", "--r-t", "10"]), EXIT_CONFIG);
    assert_eq!(run(["gelfand", "--help"]), EXIT_OK);
}

#[test]
fn meshed_domain_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = gelfand::mesh::Mesh::disk_uniform(48).unwrap();
    let path = dir.path().join("disk.mesh");
    mesh.write(&path).unwrap();
    std::fs::write(dir.path().join("domain.json"), r#"{"kind":"mesh","file":"disk.mesh"}"#).unwrap();
    let spec = dir.path().join("domain.json");
    assert_eq!(gelfand(dir.path(), &["green-eval", "--domain", spec.to_str().unwrap(), "--samples", "3"]), EXIT_OK);
    assert_eq!(gelfand(dir.path(), &["critical-points", "--domain", path.to_str().unwrap(), "--seeds", "4"]), EXIT_OK);
    let (_, body) = read_artifact(dir.path().join("critical_points.csv")).unwrap();
    assert!(body.lines().count() >= 2);
}

#[test]
fn binary_reports_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_gelfand");
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(exe).args(["--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let status = Command::new(exe)
        .args(["--out", dir.path().to_str().unwrap(), "integrals"])
        .env("GELFAND_THREADS", "zero")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_CONFIG));
    let status = Command::new(exe)
        .args(["--out", dir.path().to_str().unwrap(), "vortex", "--t-end", "0.5"])
        .env("GELFAND_THREADS", "1")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
    let (_, body) = read_artifact(dir.path().join("trajectory.csv")).unwrap();
    assert!(body.starts_with("t,x1,y1,energy\n"));
}

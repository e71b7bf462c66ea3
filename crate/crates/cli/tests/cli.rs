use std::process::{Command, Output};

use lattice_ym::config::parse_config;
use lattice_ym::record::read_records;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lattice-ym")).args(args).output().unwrap()
}

fn write_config(dir: &tempfile::TempDir, text: &str) -> String {
    let path = dir.path().join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn verify_prints_pass_lines_and_exits_zero() {
    let out = bin(&["verify"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 10);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn print_config_shows_the_effective_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "[model]\nbeta = 0.002\n");
    let out = bin(&["couple", "--config", &cfg, "--seed", "17", "--print-config"]);
    assert_eq!(out.status.code(), Some(0));
    let parsed = parse_config(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(parsed.seed, 17);
    assert_eq!(parsed.model.beta, 0.002);
    assert_eq!(parsed.experiment.name(), "couple");
    assert_eq!(parsed.coupling.n_pairs, 64);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "[model]\nn = 0\n");
    let out = bin(&["langevin", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("error"));
    assert_eq!(bin(&["langevin", "--config", "/nonexistent/run.toml"]).status.code(), Some(2));
    assert_eq!(bin(&["sideways"]).status.code(), Some(2));
    assert_eq!(bin(&["gibbs", "--threads", "0"]).status.code(), Some(2));
}

#[test]
fn inadmissible_couple_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "[model]\nbeta = 0.05\n");
    let out = bin(&["couple", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("0.0104"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn records_are_appended_to_the_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "[metropolis]\nsweeps = 400\nburn_in = 100\n");
    let records = dir.path().join("out.jsonl");
    let records_arg = records.to_str().unwrap();
    for _ in 0..2 {
        let out = bin(&["gibbs", "--config", &cfg, "--output", records_arg]);
        assert_eq!(out.status.code(), Some(0));
        assert!(out.stdout.is_empty());
    }
    let recs = read_records(std::fs::File::open(&records).map(std::io::BufReader::new).unwrap()).unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0], recs[1]);
    // the acceptance rate at the default coupling is far above the target band
    let out = bin(&["gibbs", "--config", &cfg]);
    assert!(String::from_utf8(out.stderr).unwrap().contains("outside [0.2, 0.6]"));
    assert_eq!(read_records(out.stdout.as_slice()).unwrap().len(), 1);
}

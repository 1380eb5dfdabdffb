//! Integration tests of the `kzp` binary: exit codes, output files and determinism.

use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn kzp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kzp")).args(args).output().expect("binary runs")
}

fn lines(output: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&output.stdout).lines().map(|l| serde_json::from_str(l).expect("json line")).collect()
}

#[test]
fn gen_writes_both_families() {
    let out = kzp(&["gen", "--n", "2", "--p", "5", "--h", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["plus"]["vectors"].as_array().unwrap().len(), 1);
    assert_eq!(v["minus"]["vectors"].as_array().unwrap().len(), 0);
}

#[test]
fn gen_notes_the_zero_level() {
    let out = kzp(&["gen", "--n", "3", "--p", "7", "--h", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["note"].is_string());
}

#[test]
fn composite_characteristic_is_a_configuration_error() {
    let out = kzp(&["gen", "--n", "2", "--p", "6", "--h", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("prime"));
}

#[test]
fn unknown_check_and_missing_flags_are_errors() {
    assert_eq!(kzp(&["check", "--n", "2", "--p", "5", "--check", "nope"]).status.code(), Some(2));
    assert_eq!(kzp(&["suite", "--p", "5"]).status.code(), Some(2));
    assert_eq!(kzp(&["suite", "--n", "2", "--p", "5", "--suite", "nope"]).status.code(), Some(2));
}

#[test]
fn passing_suite_exits_zero() {
    let out = kzp(&["suite", "--n", "2", "--p", "7", "--h", "4", "--trials", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let certs = lines(&out);
    assert_eq!(certs[0]["check"], "counting");
    assert!(certs.iter().all(|c| c["status"] == "pass"));
}

#[test]
fn single_check_emits_its_certificates() {
    let out = kzp(&["check", "--n", "3", "--p", "5", "--h", "3", "--check", "flatness"]);
    assert_eq!(out.status.code(), Some(0));
    let certs = lines(&out);
    assert_eq!(certs.len(), 2);
    assert!(certs.iter().all(|c| c["check"] == "flatness" && c["status"] == "pass"));
}

#[test]
fn mutation_makes_flatness_fail_with_a_witness() {
    let out = kzp(&["check", "--n", "3", "--p", "5", "--h", "3", "--check", "flatness", "--mutate"]);
    assert_eq!(out.status.code(), Some(1));
    let certs = lines(&out);
    assert!(certs.iter().any(|c| c["status"] == "fail" && !c["witness"].is_null()));
}

#[test]
fn irrational_level_reports_no_flat_sections() {
    let out = kzp(&["formal", "--n", "3", "--p", "5", "--ext-degree", "2", "--h", "1,1", "--trials", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let certs = lines(&out);
    assert!(!certs.is_empty());
    assert!(certs.iter().all(|c| c["check"] == "no-flat-sections" && c["status"] == "pass"));
}

#[test]
fn spectrum_subcommand_runs_for_irrational_level() {
    let out = kzp(&["spectrum", "--n", "3", "--p", "7", "--ext-degree", "2", "--h", "0,1", "--trials", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(lines(&out)[0]["check"], "spectrum");
}

#[test]
fn katz_subcommand_searches_the_linkage() {
    let out = kzp(&["katz", "--n", "3", "--p", "7", "--h", "1", "--trials", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let certs = lines(&out);
    assert_eq!(certs[0]["check"], "genus");
    assert_eq!(certs[1]["check"], "katz-composition");
    assert_eq!(certs[1]["params"]["linkage"]["q"], 13);
}

#[test]
fn config_file_with_flag_overrides_and_byte_identical_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    fs::write(&config, r#"{"n": 4, "p": 5, "h": 2, "seed": 9, "trials": 2}"#).unwrap();
    let first = dir.path().join("first.ndjson");
    let second = dir.path().join("second.ndjson");
    for out in [&first, &second] {
        let status = kzp(&[
            "pcurv",
            "--config",
            config.to_str().unwrap(),
            "--h",
            "3",
            "--out",
            out.to_str().unwrap(),
        ])
        .status;
        assert!(status.code() == Some(0) || status.code() == Some(1));
    }
    let a = fs::read(&first).unwrap();
    assert_eq!(a, fs::read(&second).unwrap());
    let text = String::from_utf8(a).unwrap();
    let first_line: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first_line["params"]["h"], "3");
    assert_eq!(first_line["seed"], 9);
}

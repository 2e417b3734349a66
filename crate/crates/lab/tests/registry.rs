use std::process::Command;

use phasor_lab::config::Profile;
use phasor_lab::{registry, LabError};
use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phasor-lab"))
}

#[test]
fn registry_lists_unique_ids() {
    let ids: Vec<_> = registry::all().iter().map(|e| e.id()).collect();
    assert!(ids.len() >= 14, "{ids:?}");
    let mut sorted = ids.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(sorted.len(), ids.len());
    for e in registry::all() {
        assert!(!e.claim().is_empty() && !e.modules().is_empty(), "{}", e.id());
        e.resolve(Profile::Fast, &[]).unwrap();
        e.resolve(Profile::Paper, &[]).unwrap();
    }
}

#[test]
fn unknown_id_is_a_config_error() {
    let err = registry::get("s9-99").err().unwrap();
    assert!(matches!(err, LabError::UnknownId(_)));
    assert_eq!(err.exit_code(), 1);

    let out = bin().args(["run", "s9-99"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("s9-99"));
}

#[test]
fn validate_resolves_budget_config() {
    let resolved = registry::get("s3-07").unwrap().resolve(Profile::Fast, &[]).unwrap();
    assert_eq!(resolved["budget"], json!(2.0));

    let out = bin().args(["validate", "s3-07"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"budget\": 2.0"));
}

#[test]
fn overrides_apply_and_bad_fields_fail() {
    let entry = registry::get("s3-07").unwrap();
    let resolved = entry.resolve(Profile::Fast, &[("budget".into(), json!(3.5))]).unwrap();
    assert_eq!(resolved["budget"], json!(3.5));

    let err = entry.resolve(Profile::Fast, &[("no_such_field".into(), json!(1))]).err().unwrap();
    assert_eq!(err.exit_code(), 1);
    let err = entry.resolve(Profile::Fast, &[("seeds".into(), json!([1, 1]))]).err().unwrap();
    assert_eq!(err.exit_code(), 1);
    let err = entry.resolve(Profile::Fast, &[("seeds".into(), json!([]))]).err().unwrap();
    assert_eq!(err.exit_code(), 1);

    let out = bin().args(["validate", "s3-07", "--set", "budget=-1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

fn run_progress_once(seed: u64) -> (Value, String) {
    let dir = tempfile::tempdir().unwrap();
    let entry = registry::get("s2-02").unwrap();
    let resolved = entry.resolve(Profile::Fast, &[("seeds".into(), json!([seed]))]).unwrap();
    entry.run(&resolved, 1, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    (serde_json::from_str(&text).unwrap(), text)
}

#[test]
fn single_seed_run_is_byte_identical() {
    let (doc, first) = run_progress_once(7);
    let (_, second) = run_progress_once(7);
    assert_eq!(first, second);

    let summary = &doc["summary"];
    assert!(summary["shuffle_ratio"].is_number());
    assert!(summary["shuffle_control_fails"].is_boolean());
    let conditions = summary["conditions"].as_array().unwrap();
    assert!(!conditions.is_empty());
    for c in conditions {
        for field in ["reliability", "causality_lag", "final_r", "reduction"] {
            assert!(c.get(field).is_some(), "missing {field} in {c}");
        }
    }
}

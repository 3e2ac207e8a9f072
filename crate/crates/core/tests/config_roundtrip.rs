use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use lgmem::config::ExperimentConfig;
use lgmem::Error;

fn shipped() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    v.sort();
    v
}

fn base() -> Value {
    let path = shipped().into_iter().find(|p| p.ends_with("fig2_lgplus.json")).unwrap();
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn config_error(doc: &Value) -> String {
    match ExperimentConfig::from_json(&doc.to_string()) {
        Err(Error::Config { path, .. }) => path,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn shipped_configs_round_trip() {
    let files = shipped();
    assert!(files.len() >= 4);
    for path in files {
        let a = ExperimentConfig::load(&path).unwrap();
        let b = ExperimentConfig::from_json(&a.to_json()).unwrap();
        assert_eq!(a, b, "{}", path.display());
        assert_eq!(a.hash(), b.hash());
    }
}

#[test]
fn hash_tracks_content_but_not_output_dir() {
    let a = ExperimentConfig::from_json(&base().to_string()).unwrap();
    let mut b = a.clone();
    b.output_dir = Some("elsewhere".into());
    assert_eq!(a.hash(), b.hash());
    b.master_seed += 1;
    assert_ne!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
}

#[test]
fn unknown_keys_are_rejected_with_their_path() {
    let mut doc = base();
    doc["schedule"]["hold_time"] = json!(1.0);
    assert!(config_error(&doc).starts_with("schedule"));
    let mut doc = base();
    doc["extra"] = json!(true);
    config_error(&doc);
}

#[test]
fn invalid_values_name_the_field() {
    let cases: Vec<(&str, Value)> = vec![
        ("trials", json!(0)),
        ("ensemble.optical_depth", json!(-3.0)),
        ("detectors.quantum_efficiency", json!(1.5)),
        ("schedule.switch_us", json!(0.0)),
    ];
    for (path, value) in cases {
        let mut doc = base();
        lgmem::config::set_path(&mut doc, path, value).unwrap();
        assert_eq!(config_error(&doc), path);
    }
}

#[test]
fn wrong_types_name_the_field() {
    let mut doc = base();
    doc["source"]["mean_photons"] = json!("lots");
    assert_eq!(config_error(&doc), "source.mean_photons");
}

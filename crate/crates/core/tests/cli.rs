use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use esmlr::hsi_data::{write_cube, write_ground_truth, GroundTruth, HsiCube};
use serde_json::json;

fn esmlr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_esmlr"))
        .args(args)
        .env("ESMLR_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, value: serde_json::Value) -> String {
    let p = dir.join("config.json");
    fs::write(&p, value.to_string()).unwrap();
    p.to_str().unwrap().to_owned()
}

fn synthetic(dir: &Path) -> serde_json::Value {
    json!({
        "synthetic": {"height": 20, "width": 20, "bands": 10, "classes": 3, "noise": 0.04, "seed": 1},
        "trials": 2,
        "l": 60,
        "q": 5,
        "out_dir": dir.join("out"),
    })
}

#[test]
fn experiment_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), synthetic(dir.path()));
    let csv = dir.path().join("out/trials.csv");
    let first = esmlr(&["experiment", "--config", &cfg]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let a = fs::read(&csv).unwrap();
    assert!(esmlr(&["experiment", "--config", &cfg]).status.success());
    assert_eq!(a, fs::read(&csv).unwrap());
    assert!(String::from_utf8_lossy(&first.stdout).contains("OA"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["l"], 60);
    assert_eq!(manifest["trial_seeds"], json!([0, 1]));
}

#[test]
fn overrides_reach_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), synthetic(dir.path()));
    let out = esmlr(&["experiment", "--config", &cfg, "--trials", "1", "--variant", "k-smlr", "--sigma=0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("0,k-smlr,spectral,"));
}

#[test]
fn sweep_writes_long_form_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = synthetic(dir.path());
    v["sweep"] = json!({"axis": "b", "values": [-12, -8]});
    let cfg = write_config(dir.path(), v);
    let out = esmlr(&["sweep", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
    assert!(csv.starts_with("axis,value,trial,"));
    assert!(csv.lines().nth(3).unwrap().starts_with("b,-8,0,"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    assert_eq!(esmlr(&["experiment", "--config", missing.to_str().unwrap()]).status.code(), Some(1));

    let cfg = write_config(dir.path(), synthetic(dir.path()));
    assert_eq!(esmlr(&["experiment", "--config", &cfg, "--trials", "0"]).status.code(), Some(1));
    assert_eq!(esmlr(&["experiment", "--config", &cfg, "--no_such_field", "1"]).status.code(), Some(1));
    assert_eq!(esmlr(&["sweep", "--config", &cfg]).status.code(), Some(1), "no sweep section");

    let cfg = write_config(
        dir.path(),
        json!({"cube": dir.path().join("x.raw"), "ground_truth": dir.path().join("x.labels"), "out_dir": dir.path()}),
    );
    let out = esmlr(&["emaps", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("esmlr: i/o error"));
}

#[test]
fn constant_cube_gives_all_zero_emaps() {
    let dir = tempfile::tempdir().unwrap();
    let (h, w, b) = (12, 10, 4);
    let cube = HsiCube::new(h, w, b, vec![0.3; h * w * b]).unwrap();
    write_cube(&cube, &dir.path().join("flat.raw")).unwrap();
    let labels: Vec<u16> = (0..h * w).map(|p| (p % 2) as u16 + 1).collect();
    write_ground_truth(&GroundTruth::new(h, w, labels).unwrap(), &dir.path().join("flat_gt.labels")).unwrap();
    let cfg = write_config(
        dir.path(),
        json!({
            "cube": dir.path().join("flat.raw"),
            "ground_truth": dir.path().join("flat_gt.labels"),
            "out_dir": dir.path().join("out"),
        }),
    );
    let out = esmlr(&["emaps", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bytes = fs::read(dir.path().join("out/emaps.f32")).unwrap();
    assert_eq!(bytes.len(), 9 * h * w * 4);
    assert!(bytes.iter().all(|&x| x == 0));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/emaps.json")).unwrap()).unwrap();
    assert_eq!(manifest["bands"], 9);
    assert_eq!(manifest["layers"][4]["kind"], "original");
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_npmon");

const SMALL: &str = r#"
model = "ip"
n_train = 600
n_calib = 250
n_test = 200
n_val = 0
epoch_scale = 0.2
eps = [0.05, 0.2]
"#;

fn npmon(args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn ok(args: &[&str]) {
    let (code, err) = npmon(args);
    assert_eq!(code, 0, "npmon {args:?} failed: {err}");
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A generated dataset and a trained bundle in a fresh directory.
fn small_bundle() -> (TempDir, PathBuf) {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let data = tmp.path().join("data");
    let bundle = tmp.path().join("bundle");
    ok(&["gen", "--model", "ip", "--n", "1050", "--seed", "4", "--out", s(&data)]);
    ok(&[
        "train",
        "--data",
        s(&data),
        "--out",
        s(&bundle),
        "--config",
        s(&cfg),
        "--seed",
        "2",
    ]);
    (tmp, bundle)
}

#[test]
fn reports_are_reproducible_and_anomaly_at_unit_scale_is_clean() {
    let (_tmp, bundle) = small_bundle();
    let report = bundle.join("reports/eval.csv");
    ok(&["eval", "--bundle", s(&bundle)]);
    let first = fs::read(&report).unwrap();
    ok(&["eval", "--bundle", s(&bundle)]);
    assert_eq!(first, fs::read(&report).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert_eq!(text.lines().count(), 3, "{text}");

    ok(&["anomaly", "--bundle", s(&bundle), "--noise-scale", "1.0"]);
    let json: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(bundle.join("reports/anomaly.json")).unwrap()).unwrap();
    assert_eq!(json.len(), 4);
    let (clean, noisy) = json.split_at(2);
    for (c, n) in clean.iter().zip(noisy) {
        let mut n = n.clone();
        n["stage"] = c["stage"].clone();
        assert_eq!(c, &n);
    }

    ok(&["compare-se", "--bundle", s(&bundle)]);
    assert!(bundle.join("reports/estimation.csv").is_file());
    ok(&["active", "--bundle", s(&bundle), "--pool", "300"]);
    assert!(bundle.join("active/monitor").is_dir());
    assert!(bundle.join("reports/active.json").is_file());
}

#[test]
fn failures_map_to_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("absent");
    assert_eq!(npmon(&["eval", "--bundle", s(&missing)]).0, 3);
    assert_eq!(
        npmon(&["gen", "--model", "nope", "--n", "10", "--out", s(&missing)]).0,
        2
    );

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "n_calib = 3\n").unwrap();
    let data = tmp.path().join("data");
    ok(&["gen", "--model", "ip", "--n", "100", "--out", s(&data)]);
    let out = tmp.path().join("b");
    assert_eq!(
        npmon(&["train", "--data", s(&data), "--out", s(&out), "--config", s(&bad)]).0,
        2
    );
    assert_eq!(npmon(&["train", "--data", s(&missing), "--out", s(&out)]).0, 3);
    // The default sizes need far more samples than the dataset holds.
    assert_eq!(npmon(&["train", "--data", s(&data), "--out", s(&out)]).0, 2);
}

#[test]
fn corrupted_bundles_are_refused() {
    let (_tmp, bundle) = small_bundle();
    let weights = fs::read_dir(bundle.join("monitor"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|x| x == "bin"))
        .unwrap();
    let mut bytes = fs::read(&weights).unwrap();
    bytes[0] ^= 0xff;
    fs::write(&weights, bytes).unwrap();
    let (code, err) = npmon(&["eval", "--bundle", s(&bundle)]);
    assert_eq!(code, 5, "{err}");
    assert_eq!(npmon(&["eval", "--bundle", s(&bundle), "--eps", "1.5"]).0, 5);
}

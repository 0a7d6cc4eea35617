mod common;

use std::path::Path;
use std::process::{Command, Output};

fn catfilter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catfilter")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn write_config(dir: &Path, events: usize) -> String {
    let path = dir.join("small.toml");
    std::fs::write(&path, common::small_config(events, 17).to_toml_string()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn simulate_is_deterministic_and_analyze_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 400);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = catfilter(&["simulate", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv_a = std::fs::read(a.join("xi025.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.join("xi025.csv")).unwrap());
    assert_eq!(String::from_utf8_lossy(&csv_a).lines().count(), 1 + 4 * 400);

    let o = catfilter(&["analyze", a.join("xi025.csv").to_str().unwrap(), "--channel", "post", "--out-dir", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("xi025_post_metrics.json")).unwrap()).unwrap();
    for key in ["W00", "even_sum", "best_cat_F", "best_alpha_sq", "photon_probs"] {
        assert!(metrics.get(key).is_some(), "{key}");
    }
    assert!(!a.join("xi025_realtime_metrics.json").exists());

    let frag = a.join("xi025_report.json");
    let o = catfilter(&["report", frag.to_str().unwrap(), "--out-dir", a.to_str().unwrap()]);
    assert!(o.status.success());
    let table = std::fs::read_to_string(a.join("summary.md")).unwrap();
    assert_eq!(table.lines().count(), 3);

    // same scenario under a different config must be refused
    let mut other: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&frag).unwrap()).unwrap();
    other["config_hash"] = "0".repeat(64).into();
    let frag2 = dir.path().join("other.json");
    std::fs::write(&frag2, other.to_string()).unwrap();
    let o = catfilter(&["report", frag.to_str().unwrap(), frag2.to_str().unwrap(), "--out-dir", a.to_str().unwrap()]);
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "config");
}

#[test]
fn errors_are_json_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 0);
    let o = catfilter(&["simulate", "--config", &cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("events_per_phase"));
}

#[test]
fn modes_and_spectra_dump_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::config_path("paper_xi039.toml");
    let out = dir.path().to_str().unwrap();
    assert!(catfilter(&["modes", "--config", cfg.to_str().unwrap(), "--out-dir", out]).status.success());
    assert!(catfilter(&["spectra", "--config", cfg.to_str().unwrap(), "--out-dir", out]).status.success());
    let modes = std::fs::read_to_string(dir.path().join("xi039_modes.csv")).unwrap();
    assert!(modes.starts_with("t_ns,opo,filter1,filter2,filter3,composite"));
    let spectra = std::fs::read_to_string(dir.path().join("xi039_spectra.csv")).unwrap();
    assert_eq!(spectra.lines().count(), 402);
}

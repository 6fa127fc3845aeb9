use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_xrslot");

const TINY: &str = r#"
seeds = [1]
policies = ["oracle", "oracle-never"]
workers = 1

[train]
episodes = 3
episode_frames = 20
hidden_dim = 8
batch_size = 8
epsilon_decay_steps = 40

[eval]
frames = 30

[sweep]
distances = [150.0, 450.0]
"#;

fn xrslot(args: &[&str]) -> Output {
    let out = Command::new(BIN).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "xrslot {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn setup() -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let cfg = cfg.to_str().unwrap().to_owned();
    (dir, cfg)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn default_config_parses_back() {
    let out = xrslot(&["default-config"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = xrslot::harness::ExperimentConfig::from_toml_str(&text).unwrap();
    assert_eq!(cfg, xrslot::harness::ExperimentConfig::default());
}

#[test]
fn sweep_then_regions() {
    let (dir, cfg) = setup();
    let out = dir.path().join("run");
    xrslot(&["sweep", "--config", &cfg, "--out", s(&out)]);
    for f in ["results.csv", "summary.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let rows = xrslot::harness::read_results_csv(&out.join("results.csv")).unwrap();
    assert_eq!(rows.len(), 4);

    let printed = xrslot(&["regions", "--results", s(&out.join("results.csv")), "--policy", "oracle-never"]);
    let text = String::from_utf8(printed.stdout).unwrap();
    assert!(text.contains("never    150 - 450 m"), "{text}");
}

#[test]
fn train_then_evaluate_checkpoint() {
    let (dir, cfg) = setup();
    let out = dir.path().join("train");
    xrslot(&["train", "--config", &cfg, "--out", s(&out), "--policy", "never", "--distance", "200"]);
    let ck = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.to_string_lossy().ends_with(".checkpoint.json"))
        .unwrap();
    let curve = std::fs::read_to_string(ck.to_string_lossy().replace(".checkpoint.json", ".curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 4);

    let eval_out = dir.path().join("eval");
    xrslot(&["evaluate", "--config", &cfg, "--out", s(&eval_out), "--checkpoint", s(&ck), "--distance", "200"]);
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["frames"], 30);
    assert_eq!(metrics["mean_offload_ratio"], 0.0);
    assert!(eval_out.join("eval_seed1_ep0.csv").exists());
}

#[test]
fn replay_imported_trace_with_oracle() {
    let (dir, cfg) = setup();
    let radio = xrslot::channel::RadioParams::default();
    let slots = xrslot::framemodel::SlotConfig::default();
    let n = 10;
    let trace =
        xrslot::channel::generate_trace(300.0, n * slots.slots_per_frame as usize, &radio, slots.slot_time, 9).unwrap();
    let frames = xrslot::traffic::generate_frames(&xrslot::traffic::TrafficParams::default(), n, 9).unwrap();
    let trace_path = dir.path().join("trace.csv");
    let traffic_path = dir.path().join("traffic.csv");
    trace.write_csv(&trace_path).unwrap();
    xrslot::traffic::write_frames_csv(&frames, &traffic_path).unwrap();

    let out = dir.path().join("replay");
    xrslot(&[
        "replay",
        "--config",
        &cfg,
        "--out",
        s(&out),
        "--trace",
        s(&trace_path),
        "--traffic",
        s(&traffic_path),
        "--distance",
        "300",
        "--policy",
        "oracle",
    ]);
    let log = xrslot::env::read_episode_log(&out.join("replay.csv")).unwrap();
    assert_eq!(log.len(), n);
}

#[test]
fn bad_input_fails_cleanly() {
    let out = Command::new(BIN).args(["evaluate", "--policy", "partial"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--checkpoint"));

    let out = Command::new(BIN).args(["sweep", "--config", "/nonexistent/cfg.toml"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

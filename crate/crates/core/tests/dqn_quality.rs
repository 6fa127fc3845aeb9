//! Statistical quality check of the trained agents. Slow (minutes), so it is
//! ignored by default: `cargo test --release --test dqn_quality -- --ignored`.

use xrslot::dqn::TrainConfig;
use xrslot::harness::{run_sweep, ExperimentConfig, PolicyKind};

#[test]
#[ignore]
fn partial_agent_reward_at_least_clamped_baselines() {
    let mut cfg = ExperimentConfig {
        train: TrainConfig {
            hidden_dim: 32,
            gamma: 0.0,
            episodes: 100,
            batch_size: 32,
            episode_frames: 100,
            epsilon_decay_steps: 4_000,
            ..Default::default()
        },
        seeds: (0..20).collect(),
        policies: vec![PolicyKind::Partial, PolicyKind::Always, PolicyKind::Never],
        ..Default::default()
    };
    cfg.sweep.distances = vec![400.0];
    cfg.eval.frames = 100;
    cfg.eval.episodes = 4;
    let rows = run_sweep(&cfg, None).unwrap();
    let mean = |kind: PolicyKind| {
        let r: Vec<f64> = rows.iter().filter(|r| r.policy == kind).filter_map(|r| r.mean_reward).collect();
        r.iter().sum::<f64>() / r.len() as f64
    };
    let (p, a, n) = (mean(PolicyKind::Partial), mean(PolicyKind::Always), mean(PolicyKind::Never));
    println!("mean reward over 20 seeds at 400 m: partial {p:.4}, always {a:.4}, never {n:.4}");
    assert!(p >= a && p >= n, "partial {p:.4} below a clamped baseline (always {a:.4}, never {n:.4})");
}

//! Experiment sweeps: configuration, training and evaluation of every
//! policy at every sweep point, aggregate metrics and result files.

mod config;
mod metrics;
mod output;
pub mod stats;
mod summary;
mod sweep;

pub use config::{EvalConfig, ExperimentConfig, PolicyKind, RegionThresholds, RewardConfig, SweepAxes};
pub use metrics::{coverage_distance, decision_regions, Coverage, EpisodeMetrics, Region, RegionKind, RegionTable};
pub use output::{
    manifest, read_results_csv, sha256_hex, write_outputs, write_results_csv, Manifest, MANIFEST_FILE,
    RESULTS_FILE, SUMMARY_FILE,
};
pub use summary::{coverage_comparison, energy_saving, summarize, Comparison, GroupSummary, PointSummary, Summary};
pub use sweep::{
    cells, check_seed_streams, eval_channel_seed, eval_traffic_seed, evaluate, frame_log_dir, oracle_policy,
    run_sweep, seed_sets, train_channel_seed, train_policy, train_traffic_seed, Cell, Setting, SweepRow, TraceCache,
};

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use xrslot::channel::ChannelTrace;
use xrslot::dqn::Checkpoint;
use xrslot::env::{run_episode, write_episode_log, FrameRecord, XrEnv};
use xrslot::error::{Error, Result};
use xrslot::harness::{
    decision_regions, evaluate, oracle_policy, read_results_csv, run_sweep, train_policy, write_outputs, Cell,
    EpisodeMetrics, ExperimentConfig, PolicyKind, Setting,
};
use xrslot::policies::Policy;
use xrslot::traffic::read_frames_csv;

#[derive(Parser)]
#[command(name = "xrslot", version, about = "XR slot allocation and partial offloading experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML); built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Clone)]
struct Point {
    /// Distance in m; defaults to the first swept distance.
    #[arg(long)]
    distance: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent at one sweep point and save a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        point: Point,
        #[arg(long, default_value = "partial")]
        policy: PolicyKind,
    },
    /// Evaluate a checkpoint or a non-learning policy on held-out episodes.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        point: Point,
        #[arg(long, conflicts_with = "policy")]
        checkpoint: Option<PathBuf>,
        /// Non-learning policy (oracle, oracle-always, oracle-never).
        #[arg(long)]
        policy: Option<PolicyKind>,
    },
    /// Run the configured sweep and write results.csv, summary.json and manifest.json.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Classify distances into offloading decision regions from a results.csv.
    Regions {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value = "partial")]
        policy: PolicyKind,
        #[arg(long, default_value_t = 0.9)]
        always: f64,
        #[arg(long, default_value_t = 0.1)]
        never: f64,
    },
    /// Run a policy over an imported channel trace and traffic sequence.
    Replay {
        #[command(flatten)]
        common: Common,
        /// Per-slot gains (slot_index, gain_linear).
        #[arg(long)]
        trace: PathBuf,
        /// Frame sizes (frame_index, d_ul_bits, d_dl_bits).
        #[arg(long)]
        traffic: PathBuf,
        /// Distance the trace was recorded at, m.
        #[arg(long)]
        distance: f64,
        #[arg(long, conflicts_with = "policy")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        policy: Option<PolicyKind>,
    },
    /// Print the default configuration as TOML.
    DefaultConfig,
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// The first point of every sweep axis, at `distance` if given.
fn first_cell(cfg: &ExperimentConfig, distance: Option<f64>, policy: PolicyKind) -> Cell {
    Cell {
        distance: distance.unwrap_or(cfg.sweep.distances[0]),
        bandwidth: cfg.sweep.bandwidths[0],
        loc_capability_scale: cfg.sweep.loc_capability_scales[0],
        sigma: cfg.sweep.sigmas[0],
        window: cfg.sweep.windows[0],
        policy,
        seed: cfg.seeds[0],
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn print_metrics(label: &str, m: &EpisodeMetrics) {
    println!(
        "{label}: flr_total {:.4} (ul {:.4}, dl {:.4}), energy {:.4} mJ/frame, alpha {:.3}, reward {:.4} over {} frames",
        m.flr_total,
        m.flr_ul,
        m.flr_dl,
        m.mean_energy * 1e3,
        m.mean_offload_ratio,
        m.mean_reward,
        m.frames
    );
}

fn load_policy(
    cfg: &ExperimentConfig,
    checkpoint: Option<&Path>,
    policy: Option<PolicyKind>,
) -> Result<(Box<dyn Policy>, usize)> {
    match (checkpoint, policy) {
        (Some(path), _) => {
            let ck = Checkpoint::load(path)?;
            let window = ck.window;
            Ok((Box::new(ck.into_policy("checkpoint")?), window))
        }
        (None, Some(kind)) if !kind.is_learned() => {
            Ok((Box::new(oracle_policy(cfg, kind, cfg.slots.slots_per_frame)?), cfg.sweep.windows[0]))
        }
        (None, Some(kind)) => Err(Error::Config(format!("policy {kind} needs --checkpoint from `xrslot train`"))),
        (None, None) => Err(Error::Config("give --checkpoint or --policy".into())),
    }
}

fn train_cmd(common: Common, point: Point, policy: PolicyKind) -> Result<()> {
    let cfg = load_config(&common)?;
    let cell = first_cell(&cfg, point.distance, policy);
    let setting = Setting::for_cell(&cfg, &cell);
    let (trained, outcome, train_cfg) = train_policy(&cfg, &setting, policy, cell.seed)?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let ck_path = dir.join(format!("{}.checkpoint.json", cell.slug()));
    Checkpoint::new(&trained, cell.window, train_cfg).save(&ck_path)?;
    let curve_path = dir.join(format!("{}.curve.csv", cell.slug()));
    let mut w = csv::Writer::from_path(&curve_path)?;
    w.write_record(["episode", "mean_reward"])?;
    for (i, r) in outcome.curve.iter().enumerate() {
        w.write_record([i.to_string(), r.to_string()])?;
    }
    w.flush().map_err(|source| Error::Io { path: curve_path.clone(), source })?;
    println!("trained {policy} at {} m over {} steps", cell.distance, outcome.steps);
    println!("checkpoint: {}", ck_path.display());
    println!("curve: {}", curve_path.display());
    Ok(())
}

fn evaluate_cmd(common: Common, point: Point, checkpoint: Option<PathBuf>, policy: Option<PolicyKind>) -> Result<()> {
    let cfg = load_config(&common)?;
    let (mut pol, window) = load_policy(&cfg, checkpoint.as_deref(), policy)?;
    let mut cell = first_cell(&cfg, point.distance, policy.unwrap_or(PolicyKind::Partial));
    cell.window = window;
    let setting = Setting::for_cell(&cfg, &cell);
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let mut all = Vec::new();
    for seed in &cfg.seeds {
        let episodes = evaluate(&cfg, &setting, pol.as_mut(), *seed)?;
        for (k, log) in episodes.iter().enumerate() {
            write_episode_log(log, &dir.join(format!("eval_seed{seed}_ep{k}.csv")))?;
        }
        let frames: Vec<FrameRecord> = episodes.into_iter().flatten().collect();
        print_metrics(&format!("seed {seed}"), &EpisodeMetrics::from_records(&frames)?);
        all.extend(frames);
    }
    let metrics = EpisodeMetrics::from_records(&all)?;
    print_metrics("all seeds", &metrics);
    write_json(&metrics, &dir.join("metrics.json"))
}

fn sweep_cmd(common: Common) -> Result<()> {
    let cfg = load_config(&common)?;
    let out = cfg.output_dir.clone();
    let rows = run_sweep(&cfg, Some(&out))?;
    let summary = write_outputs(&cfg, &rows, &out)?;
    for g in &summary.groups {
        println!(
            "{:<13} B {:>4} MHz  scale {}  sigma {}  W {}: coverage {}",
            g.policy.as_str(),
            g.bandwidth / 1e6,
            g.loc_capability_scale,
            g.sigma,
            g.window,
            g.coverage_distance
        );
    }
    let diverged = rows.iter().filter(|r| !r.is_ok()).count();
    println!("{} cells ({diverged} diverged) written to {}", rows.len(), out.display());
    Ok(())
}

fn regions_cmd(results: PathBuf, policy: PolicyKind, always: f64, never: f64) -> Result<()> {
    let rows = read_results_csv(&results)?;
    let mut settings: Vec<(f64, f64, f64, usize)> = Vec::new();
    for r in rows.iter().filter(|r| r.policy == policy) {
        let key = (r.bandwidth, r.loc_capability_scale, r.sigma, r.window);
        if !settings.contains(&key) {
            settings.push(key);
        }
    }
    if settings.is_empty() {
        return Err(Error::Config(format!("no rows for policy {policy} in {}", results.display())));
    }
    for (b, l, s, w) in settings {
        let mut distances: Vec<f64> = Vec::new();
        let mut points = Vec::new();
        for r in rows.iter().filter(|r| {
            r.policy == policy && (r.bandwidth, r.loc_capability_scale, r.sigma, r.window) == (b, l, s, w)
        }) {
            if !distances.contains(&r.distance) {
                distances.push(r.distance);
            }
        }
        distances.sort_by(f64::total_cmp);
        for d in distances {
            let alphas: Vec<f64> = rows
                .iter()
                .filter(|r| {
                    r.policy == policy
                        && r.distance == d
                        && (r.bandwidth, r.loc_capability_scale, r.sigma, r.window) == (b, l, s, w)
                })
                .filter_map(|r| r.mean_offload_ratio)
                .collect();
            if !alphas.is_empty() {
                points.push((d, alphas.iter().sum::<f64>() / alphas.len() as f64));
            }
        }
        let table = decision_regions(&points, always, never)?;
        println!("{policy}  B {} MHz  scale {l}  sigma {s}  W {w}", b / 1e6);
        for region in &table.regions {
            println!("  {:<8} {} - {} m", format!("{:?}", region.kind).to_lowercase(), region.start, region.end);
        }
        println!("  boundaries: {:?}", table.boundaries);
    }
    Ok(())
}

fn replay_cmd(
    common: Common,
    trace: PathBuf,
    traffic: PathBuf,
    distance: f64,
    checkpoint: Option<PathBuf>,
    policy: Option<PolicyKind>,
) -> Result<()> {
    let cfg = load_config(&common)?;
    let (mut pol, window) = load_policy(&cfg, checkpoint.as_deref(), policy)?;
    let mut cell = first_cell(&cfg, Some(distance), policy.unwrap_or(PolicyKind::Partial));
    cell.window = window;
    let setting = Setting::for_cell(&cfg, &cell);
    let frames = read_frames_csv(&traffic)?;
    let trace = ChannelTrace::read_csv(&trace, distance)?;
    let mut env = XrEnv::new(setting.system, setting.reward, frames, trace)?;
    let log = run_episode(&mut env, pol.as_mut())?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let path = dir.join("replay.csv");
    write_episode_log(&log, &path)?;
    print_metrics("replay", &EpisodeMetrics::from_records(&log)?);
    println!("per-frame log: {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { common, point, policy } => train_cmd(common, point, policy),
        Command::Evaluate { common, point, checkpoint, policy } => evaluate_cmd(common, point, checkpoint, policy),
        Command::Sweep { common } => sweep_cmd(common),
        Command::Regions { results, policy, always, never } => regions_cmd(results, policy, always, never),
        Command::Replay { common, trace, traffic, distance, checkpoint, policy } => {
            replay_cmd(common, trace, traffic, distance, checkpoint, policy)
        }
        Command::DefaultConfig => ExperimentConfig::default().to_toml_string().map(|s| print!("{s}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

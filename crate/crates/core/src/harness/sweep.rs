use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, PolicyKind};
use super::metrics::EpisodeMetrics;
use crate::channel::{RadioParams, SmallScaleTrace};
use crate::dqn::{train, DqnPolicy, NormalizedEnv, StateNormalizer, TrainConfig, TrainOutcome};
use crate::env::{run_episode, write_episode_log, FrameRecord, RewardParams, XrEnv};
use crate::error::{io_err, Error, Result};
use crate::params::SystemParams;
use crate::policies::{OraclePolicy, Policy};
use crate::seed::{derive, Stream};
use crate::traffic::generate_frames;

/// One job of a sweep: a sweep point, a policy and a seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub distance: f64,
    pub bandwidth: f64,
    pub loc_capability_scale: f64,
    pub sigma: f64,
    pub window: usize,
    pub policy: PolicyKind,
    pub seed: u64,
}

impl Cell {
    /// File-name friendly identifier.
    pub fn slug(&self) -> String {
        format!(
            "d{}_b{}_l{}_s{}_w{}_{}_seed{}",
            self.distance,
            self.bandwidth / 1e6,
            self.loc_capability_scale,
            self.sigma,
            self.window,
            self.policy,
            self.seed
        )
    }
}

/// One line of `results.csv`. Metrics are empty when training diverged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub distance: f64,
    pub bandwidth: f64,
    pub loc_capability_scale: f64,
    pub sigma: f64,
    pub window: usize,
    pub policy: PolicyKind,
    pub seed: u64,
    pub flr_ul: Option<f64>,
    pub flr_dl: Option<f64>,
    pub flr_total: Option<f64>,
    pub mean_energy: Option<f64>,
    pub mean_offload_ratio: Option<f64>,
    pub mean_reward: Option<f64>,
    pub covered: Option<bool>,
    pub status: String,
}

impl SweepRow {
    pub fn cell(&self) -> Cell {
        Cell {
            distance: self.distance,
            bandwidth: self.bandwidth,
            loc_capability_scale: self.loc_capability_scale,
            sigma: self.sigma,
            window: self.window,
            policy: self.policy,
            seed: self.seed,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn new(cell: &Cell, metrics: Option<&EpisodeMetrics>, flr_limit: f64, status: String) -> Self {
        Self {
            distance: cell.distance,
            bandwidth: cell.bandwidth,
            loc_capability_scale: cell.loc_capability_scale,
            sigma: cell.sigma,
            window: cell.window,
            policy: cell.policy,
            seed: cell.seed,
            flr_ul: metrics.map(|m| m.flr_ul),
            flr_dl: metrics.map(|m| m.flr_dl),
            flr_total: metrics.map(|m| m.flr_total),
            mean_energy: metrics.map(|m| m.mean_energy),
            mean_offload_ratio: metrics.map(|m| m.mean_offload_ratio),
            mean_reward: metrics.map(|m| m.mean_reward),
            covered: metrics.map(|m| m.flr_total <= flr_limit),
            status,
        }
    }
}

/// The sweep cells in deterministic order: grouped by bandwidth, capability
/// scale, sigma, window and policy, then by distance and seed.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let axes = &cfg.sweep;
    let mut out = Vec::new();
    for &bandwidth in &axes.bandwidths {
        for &loc_capability_scale in &axes.loc_capability_scales {
            for &sigma in &axes.sigmas {
                for &window in &axes.windows {
                    for &policy in &cfg.policies {
                        for &distance in &axes.distances {
                            for &seed in &cfg.seeds {
                                out.push(Cell { distance, bandwidth, loc_capability_scale, sigma, window, policy, seed });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn train_traffic_seed(seed: u64, episode: usize) -> u64 {
    derive(seed, Stream::TrainTraffic, episode as u64)
}

pub fn train_channel_seed(seed: u64, episode: usize) -> u64 {
    derive(seed, Stream::TrainChannel, episode as u64)
}

pub fn eval_traffic_seed(seed: u64, episode: usize) -> u64 {
    derive(seed, Stream::EvalTraffic, episode as u64)
}

pub fn eval_channel_seed(seed: u64, episode: usize) -> u64 {
    derive(seed, Stream::EvalChannel, episode as u64)
}

/// Memoized distance-free channel traces, shared by every cell of a sweep.
///
/// Shadowing and fading do not depend on distance or bandwidth, so all
/// cells with the same seed reuse one generated trace per episode.
#[derive(Debug, Default)]
pub struct TraceCache {
    traces: Mutex<HashMap<(Stream, u64, usize), Arc<SmallScaleTrace>>>,
}

impl TraceCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn get(
        &self,
        stream: Stream,
        seed: u64,
        episode: usize,
        n_slots: usize,
        radio: &RadioParams,
        slot_time: f64,
    ) -> Result<Arc<SmallScaleTrace>> {
        let key = (stream, seed, episode);
        if let Some(t) = self.traces.lock().expect("trace cache lock").get(&key) {
            if t.fading.len() == n_slots {
                return Ok(Arc::clone(t));
            }
        }
        let channel_seed = derive(seed, stream, episode as u64);
        let trace = Arc::new(SmallScaleTrace::generate(n_slots, radio, slot_time, channel_seed)?);
        self.traces.lock().expect("trace cache lock").insert(key, Arc::clone(&trace));
        Ok(trace)
    }
}

/// Everything needed to build environments at one sweep point.
#[derive(Debug, Clone)]
pub struct Setting {
    pub system: SystemParams,
    pub reward: RewardParams,
    pub distance: f64,
    cache: Arc<TraceCache>,
}

impl Setting {
    pub fn for_cell(cfg: &ExperimentConfig, cell: &Cell) -> Self {
        Self::with_cache(cfg, cell, Arc::new(TraceCache::new()))
    }

    /// Like [`Setting::for_cell`], reusing traces from `cache`. The cache must
    /// only be shared between cells whose radio parameters differ at most in
    /// bandwidth.
    pub fn with_cache(cfg: &ExperimentConfig, cell: &Cell, cache: Arc<TraceCache>) -> Self {
        let system = cfg.system_at(cell.bandwidth, cell.loc_capability_scale);
        let reward = cfg.reward_params(&system, cell.sigma, cell.window);
        Self { system, reward, distance: cell.distance, cache }
    }

    /// Normalizer anchored at the distance-dependent mean gain.
    pub fn normalizer(&self) -> Result<StateNormalizer> {
        StateNormalizer::new(&self.system.traffic, self.system.radio.mean_gain(self.distance)?)
    }

    fn env(&self, frames: usize, traffic_seed: u64, stream: Stream, seed: u64, episode: usize) -> Result<XrEnv> {
        let p = &self.system;
        let n_slots = frames * p.slots.slots_per_frame as usize;
        let small = self.cache.get(stream, seed, episode, n_slots, &p.radio, p.slots.slot_time)?;
        let trace = small.at_distance(self.distance, &p.radio)?;
        let frames = generate_frames(&p.traffic, frames, traffic_seed)?;
        XrEnv::new(p.clone(), self.reward.clone(), frames, trace)
    }

    /// Training episode `episode` of `seed`.
    pub fn train_env(&self, frames: usize, seed: u64, episode: usize) -> Result<XrEnv> {
        self.env(frames, train_traffic_seed(seed, episode), Stream::TrainChannel, seed, episode)
    }

    /// Held-out evaluation episode `episode` of `seed`.
    pub fn eval_env(&self, frames: usize, seed: u64, episode: usize) -> Result<XrEnv> {
        self.env(frames, eval_traffic_seed(seed, episode), Stream::EvalChannel, seed, episode)
    }
}

/// Trains a DQN agent for a learned policy kind on training-stream episodes.
pub fn train_policy(
    cfg: &ExperimentConfig,
    setting: &Setting,
    kind: PolicyKind,
    seed: u64,
) -> Result<(DqnPolicy, TrainOutcome, TrainConfig)> {
    if !kind.is_learned() {
        return Err(Error::InvalidParam(format!("policy {kind} is not trained")));
    }
    let grid = kind.grid(&cfg.alpha_values, setting.system.slots.slots_per_frame)?;
    let normalizer = setting.normalizer()?;
    let train_cfg = TrainConfig { seed: derive(seed, Stream::Agent, cfg.train.seed), ..cfg.train.clone() };
    let outcome = train(
        |episode| {
            Ok(NormalizedEnv {
                env: setting.train_env(train_cfg.episode_frames, seed, episode)?,
                grid: grid.clone(),
                normalizer,
            })
        },
        &train_cfg,
    )?;
    let policy = DqnPolicy::new(kind.as_str(), outcome.net.clone(), grid, normalizer)?;
    Ok((policy, outcome, train_cfg))
}

/// Non-learning policies.
pub fn oracle_policy(cfg: &ExperimentConfig, kind: PolicyKind, slots_per_frame: u32) -> Result<OraclePolicy> {
    if kind.is_learned() {
        return Err(Error::InvalidParam(format!("policy {kind} needs training")));
    }
    Ok(OraclePolicy::new(kind.as_str(), kind.grid(&cfg.alpha_values, slots_per_frame)?))
}

/// Runs `policy` on the held-out evaluation episodes of `seed`.
pub fn evaluate(
    cfg: &ExperimentConfig,
    setting: &Setting,
    policy: &mut dyn Policy,
    seed: u64,
) -> Result<Vec<Vec<FrameRecord>>> {
    (0..cfg.eval.episodes)
        .map(|k| {
            let mut env = setting.eval_env(cfg.eval.frames, seed, k)?;
            run_episode(&mut env, policy)
        })
        .collect()
}

fn run_cell(cfg: &ExperimentConfig, cell: &Cell, cache: &Arc<TraceCache>, log_dir: Option<&Path>) -> Result<SweepRow> {
    let setting = Setting::with_cache(cfg, cell, Arc::clone(cache));
    let mut policy: Box<dyn Policy> = if cell.policy.is_learned() {
        match train_policy(cfg, &setting, cell.policy, cell.seed) {
            Ok((p, _, _)) => Box::new(p),
            Err(Error::Divergence(msg)) => {
                return Ok(SweepRow::new(cell, None, cfg.reward.flr_limit, format!("diverged: {msg}")));
            }
            Err(e) => return Err(e),
        }
    } else {
        Box::new(oracle_policy(cfg, cell.policy, setting.system.slots.slots_per_frame)?)
    };
    let episodes = evaluate(cfg, &setting, policy.as_mut(), cell.seed)?;
    if let Some(dir) = log_dir {
        for (k, log) in episodes.iter().enumerate() {
            write_episode_log(log, &dir.join(format!("{}_ep{k}.csv", cell.slug())))?;
        }
    }
    let all: Vec<FrameRecord> = episodes.into_iter().flatten().collect();
    let metrics = EpisodeMetrics::from_records(&all)?;
    Ok(SweepRow::new(cell, Some(&metrics), cfg.reward.flr_limit, "ok".into()))
}

/// Directory for per-frame logs under `out`.
pub fn frame_log_dir(out: &Path) -> PathBuf {
    out.join("frames")
}

/// Runs every cell on a pool of `cfg.workers` threads.
///
/// Divergent training is recorded in the row status; other failures abort.
/// Per-frame logs go to `out/frames` when enabled.
pub fn run_sweep(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    check_seed_streams(cfg)?;
    let log_dir = match (cfg.eval.frame_logs, out) {
        (true, Some(out)) => {
            let dir = frame_log_dir(out);
            std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            Some(dir)
        }
        (true, None) => return Err(Error::Config("frame logs need an output directory".into())),
        (false, _) => None,
    };
    let jobs = cells(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let cache = Arc::new(TraceCache::new());
    pool.install(|| jobs.par_iter().map(|c| run_cell(cfg, c, &cache, log_dir.as_deref())).collect())
}

/// Seeds of all training and evaluation episodes the sweep will generate.
pub fn seed_sets(cfg: &ExperimentConfig) -> (HashSet<u64>, HashSet<u64>) {
    let mut train_set = HashSet::new();
    let mut eval_set = HashSet::new();
    for &s in &cfg.seeds {
        for e in 0..cfg.train.episodes {
            train_set.insert(train_traffic_seed(s, e));
            train_set.insert(train_channel_seed(s, e));
        }
        for e in 0..cfg.eval.episodes {
            eval_set.insert(eval_traffic_seed(s, e));
            eval_set.insert(eval_channel_seed(s, e));
        }
    }
    (train_set, eval_set)
}

/// Fails if any evaluation episode would reuse a training seed.
pub fn check_seed_streams(cfg: &ExperimentConfig) -> Result<()> {
    let (train_set, eval_set) = seed_sets(cfg);
    match train_set.intersection(&eval_set).next() {
        Some(s) => Err(Error::Config(format!("evaluation seed {s} collides with a training seed"))),
        None => Ok(()),
    }
}

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::RadioParams;
use crate::dqn::TrainConfig;
use crate::env::{e_max_default, RewardParams};
use crate::error::{io_err, Error, Result};
use crate::framemodel::{DlSuccess, HeadsetParams, SlotConfig};
use crate::params::SystemParams;
use crate::policies::{ActionGrid, DEFAULT_ALPHAS};
use crate::traffic::TrafficParams;

/// Policies the harness knows how to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// DQN over slot splits and offload ratios.
    Partial,
    /// DQN over slot splits with everything offloaded.
    Always,
    /// DQN over slot splits with everything rendered locally.
    Never,
    /// Full-knowledge greedy search over the partial-offloading grid.
    Oracle,
    OracleAlways,
    OracleNever,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Partial,
        PolicyKind::Always,
        PolicyKind::Never,
        PolicyKind::Oracle,
        PolicyKind::OracleAlways,
        PolicyKind::OracleNever,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Partial => "partial",
            PolicyKind::Always => "always",
            PolicyKind::Never => "never",
            PolicyKind::Oracle => "oracle",
            PolicyKind::OracleAlways => "oracle-always",
            PolicyKind::OracleNever => "oracle-never",
        }
    }

    pub fn is_learned(self) -> bool {
        matches!(self, PolicyKind::Partial | PolicyKind::Always | PolicyKind::Never)
    }

    /// Action grid of this policy.
    pub fn grid(self, alpha_values: &[f64], slots_per_frame: u32) -> Result<ActionGrid> {
        match self {
            PolicyKind::Partial | PolicyKind::Oracle => ActionGrid::partial(alpha_values.to_vec(), slots_per_frame),
            PolicyKind::Always | PolicyKind::OracleAlways => ActionGrid::fixed(1.0, slots_per_frame),
            PolicyKind::Never | PolicyKind::OracleNever => ActionGrid::fixed(0.0, slots_per_frame),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub sigma: f64,
    pub window: usize,
    /// Energy normalizer in J; derived from the other parameters when absent.
    pub e_max: Option<f64>,
    /// FLR limit used for coverage.
    pub flr_limit: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { sigma: 0.7, window: 1, e_max: None, flr_limit: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    /// m
    pub distances: Vec<f64>,
    /// Hz
    pub bandwidths: Vec<f64>,
    pub loc_capability_scales: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Decision windows; one agent is trained per window.
    pub windows: Vec<usize>,
}

impl Default for SweepAxes {
    fn default() -> Self {
        Self {
            distances: (0..13).map(|i| 100.0 + 50.0 * i as f64).collect(),
            bandwidths: vec![RadioParams::default().bandwidth],
            loc_capability_scales: vec![1.0],
            sigmas: vec![RewardConfig::default().sigma],
            windows: vec![1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Frames per evaluation episode.
    pub frames: usize,
    /// Evaluation episodes per seed, each with its own shadowing draw.
    pub episodes: usize,
    /// Write one per-frame CSV per evaluation episode.
    pub frame_logs: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { frames: 500, episodes: 1, frame_logs: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionThresholds {
    /// Mean offload ratio at or above which a distance counts as always-offload.
    pub always: f64,
    /// Mean offload ratio at or below which a distance counts as never-offload.
    pub never: f64,
}

impl Default for RegionThresholds {
    fn default() -> Self {
        Self { always: 0.9, never: 0.1 }
    }
}

/// A whole experiment, as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub radio: RadioParams,
    pub traffic: TrafficParams,
    pub headset: HeadsetParams,
    pub slots: SlotConfig,
    pub beta_grid: Vec<f64>,
    pub dl_success: DlSuccess,
    /// Offload ratios of the partial-offloading grid.
    pub alpha_values: Vec<f64>,
    pub reward: RewardConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub sweep: SweepAxes,
    pub seeds: Vec<u64>,
    pub policies: Vec<PolicyKind>,
    pub regions: RegionThresholds,
    pub output_dir: PathBuf,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let system = SystemParams::default();
        Self {
            radio: system.radio,
            traffic: system.traffic,
            headset: system.headset,
            slots: system.slots,
            beta_grid: system.beta_grid,
            dl_success: system.dl_success,
            alpha_values: DEFAULT_ALPHAS.to_vec(),
            reward: RewardConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            sweep: SweepAxes::default(),
            seeds: (0..10).collect(),
            policies: vec![PolicyKind::Partial, PolicyKind::Always, PolicyKind::Never],
            regions: RegionThresholds::default(),
            output_dir: PathBuf::from("results"),
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// System parameters at the base point (before sweep overrides).
    pub fn system(&self) -> SystemParams {
        SystemParams {
            radio: self.radio.clone(),
            traffic: self.traffic.clone(),
            headset: self.headset.clone(),
            slots: self.slots.clone(),
            beta_grid: self.beta_grid.clone(),
            dl_success: self.dl_success,
        }
    }

    /// System parameters with the swept quantities applied.
    pub fn system_at(&self, bandwidth: f64, loc_capability_scale: f64) -> SystemParams {
        let mut p = self.system();
        p.radio.bandwidth = bandwidth;
        p.headset.loc_capability_scale = loc_capability_scale;
        p
    }

    pub fn reward_params(&self, system: &SystemParams, sigma: f64, window: usize) -> RewardParams {
        RewardParams {
            sigma,
            e_max: self
                .reward
                .e_max
                .unwrap_or_else(|| e_max_default(&system.slots, &system.headset, &system.traffic)),
            window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system().validate()?;
        self.train.validate()?;
        let axes = &self.sweep;
        if axes.distances.is_empty()
            || axes.bandwidths.is_empty()
            || axes.loc_capability_scales.is_empty()
            || axes.sigmas.is_empty()
            || axes.windows.is_empty()
        {
            return Err(Error::Config("sweep axes must not be empty".into()));
        }
        if axes.distances.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sweep distances must be strictly increasing".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("at least one policy is required".into()));
        }
        if self.eval.frames == 0 || self.eval.episodes == 0 {
            return Err(Error::Config("eval frames and episodes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.reward.flr_limit) {
            return Err(Error::Config("flr_limit must lie in [0, 1]".into()));
        }
        if !(self.regions.never < self.regions.always) {
            return Err(Error::Config("region thresholds need never < always".into()));
        }
        ActionGrid::partial(self.alpha_values.clone(), self.slots.slots_per_frame)?;
        for &b in &axes.bandwidths {
            for &l in &axes.loc_capability_scales {
                let system = self.system_at(b, l);
                system.validate()?;
                for &s in &axes.sigmas {
                    for &w in &axes.windows {
                        self.reward_params(&system, s, w).validate()?;
                    }
                }
            }
        }
        for &d in &axes.distances {
            self.radio.mean_gain(d)?;
        }
        Ok(())
    }
}

//! Episode engine: observation, reward and multi-frame decision windows.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{generate_trace, ChannelTrace};
use crate::error::{io_err, Error, Result};
use crate::framemodel::{simulate_frame, Action, FrameOutcome, HeadsetParams, SlotConfig};
use crate::params::SystemParams;
use crate::policies::{FrameView, Policy};
use crate::traffic::{generate_frames, FramePair, TrafficParams};

/// What the agent observes at the start of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub d_ul: f64,
    pub d_dl: f64,
    /// Channel gain in the first slot of the frame.
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    /// Weight of frame loss against normalized energy, in (0, 1].
    pub sigma: f64,
    /// J
    pub e_max: f64,
    /// Frames an action is held for.
    pub window: usize,
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "sigma must lie in (0, 1], got {} (sigma = 0 never allocates anything)",
                self.sigma
            )));
        }
        if !(self.e_max > 0.0 && self.e_max.is_finite()) {
            return Err(Error::InvalidParam("e_max must be positive".into()));
        }
        if self.window == 0 {
            return Err(Error::InvalidParam("window must be at least one frame".into()));
        }
        Ok(())
    }
}

/// Per-frame reward: `-sigma * (fli_ul + fli_dl) - (1 - sigma) * e_total / e_max`.
pub fn reward(outcome: &FrameOutcome, rp: &RewardParams) -> f64 {
    let losses = f64::from(u8::from(outcome.fli_ul) + u8::from(outcome.fli_dl));
    -rp.sigma * losses - (1.0 - rp.sigma) * (outcome.energy.e_total / rp.e_max)
}

/// Energy of a frame that transmits at full UL power in every slot and both
/// decodes and locally renders a largest-size DL frame.
pub fn e_max_default(cfg: &SlotConfig, hp: &HeadsetParams, traffic: &TrafficParams) -> f64 {
    let d_max = traffic.max_dl();
    f64::from(cfg.slots_per_frame) * cfg.slot_time * hp.p_ul_max
        + d_max / hp.f_dec * hp.p_dec
        + d_max / hp.local_speed() * hp.p_loc
}

#[derive(Debug, Clone)]
pub struct Step {
    /// `None` once the episode is over.
    pub next_state: Option<EnvState>,
    /// Sum of per-frame rewards over the frames the action was held for.
    pub reward: f64,
    pub outcomes: Vec<FrameOutcome>,
    pub frame_rewards: Vec<f64>,
    pub done: bool,
}

/// One episode over a fixed traffic sequence and channel trace.
#[derive(Debug, Clone)]
pub struct XrEnv {
    params: SystemParams,
    reward_params: RewardParams,
    frames: Vec<FramePair>,
    trace: ChannelTrace,
    cursor: usize,
}

impl XrEnv {
    pub fn new(
        params: SystemParams,
        reward_params: RewardParams,
        frames: Vec<FramePair>,
        trace: ChannelTrace,
    ) -> Result<Self> {
        params.validate()?;
        reward_params.validate()?;
        if frames.is_empty() {
            return Err(Error::InvalidParam("episode needs at least one frame".into()));
        }
        let needed = frames.len() * params.slots.slots_per_frame as usize;
        if trace.len() < needed {
            return Err(Error::TraceUnderrun { needed, available: trace.len() });
        }
        Ok(Self { params, reward_params, frames, trace, cursor: 0 })
    }

    /// Builds an episode from seeds, generating both traffic and channel.
    pub fn generate(
        params: SystemParams,
        reward_params: RewardParams,
        distance: f64,
        n_frames: usize,
        traffic_seed: u64,
        channel_seed: u64,
    ) -> Result<Self> {
        let frames = generate_frames(&params.traffic, n_frames, traffic_seed)?;
        let n_slots = n_frames * params.slots.slots_per_frame as usize;
        let trace = generate_trace(distance, n_slots, &params.radio, params.slots.slot_time, channel_seed)?;
        Self::new(params, reward_params, frames, trace)
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn reward_params(&self) -> &RewardParams {
        &self.reward_params
    }

    pub fn frames(&self) -> &[FramePair] {
        &self.frames
    }

    pub fn trace(&self) -> &ChannelTrace {
        &self.trace
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn frame_index(&self) -> usize {
        self.cursor
    }

    pub fn is_done(&self) -> bool {
        self.cursor >= self.frames.len()
    }

    pub fn reset(&mut self) {
        self.cursor = 0;
    }

    fn slice(&self, frame: usize) -> Result<&[f64]> {
        self.trace.frame_slice(frame, self.params.slots.slots_per_frame as usize)
    }

    /// Observation for the current frame, `None` at the end of the episode.
    pub fn observe(&self) -> Option<EnvState> {
        let frame = self.frames.get(self.cursor)?;
        let h = self.slice(self.cursor).ok()?[0];
        Some(EnvState { d_ul: frame.d_ul, d_dl: frame.d_dl, h })
    }

    /// Full view of the current frame for policies.
    pub fn view(&self) -> Option<FrameView<'_>> {
        let state = self.observe()?;
        Some(FrameView {
            state,
            frame: &self.frames[self.cursor],
            slice: self.slice(self.cursor).ok()?,
            params: &self.params,
            reward: &self.reward_params,
        })
    }

    /// Applies `action` for the next `window` frames (fewer at the episode end).
    pub fn step(&mut self, action: &Action) -> Result<Step> {
        if self.is_done() {
            return Err(Error::EpisodeExhausted);
        }
        let end = (self.cursor + self.reward_params.window).min(self.frames.len());
        let mut outcomes = Vec::with_capacity(end - self.cursor);
        let mut frame_rewards = Vec::with_capacity(end - self.cursor);
        for f in self.cursor..end {
            let outcome = simulate_frame(&self.frames[f], action, self.slice(f)?, &self.params)?;
            frame_rewards.push(reward(&outcome, &self.reward_params));
            outcomes.push(outcome);
        }
        self.cursor = end;
        Ok(Step {
            next_state: self.observe(),
            reward: frame_rewards.iter().sum(),
            outcomes,
            frame_rewards,
            done: self.is_done(),
        })
    }
}

/// One row of an episode log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_index: usize,
    pub n_ul: u32,
    pub n_dl: u32,
    pub alpha: f64,
    pub fli_ul: u8,
    pub fli_dl: u8,
    pub e_total: f64,
    pub reward: f64,
}

/// Runs `policy` through the remaining frames of `env`.
pub fn run_episode(env: &mut XrEnv, policy: &mut dyn Policy) -> Result<Vec<FrameRecord>> {
    let mut log = Vec::with_capacity(env.n_frames());
    while let Some(view) = env.view() {
        let action = policy.decide(&view)?;
        let first = env.frame_index();
        let step = env.step(&action)?;
        for (k, (o, r)) in step.outcomes.iter().zip(&step.frame_rewards).enumerate() {
            log.push(FrameRecord {
                frame_index: first + k,
                n_ul: action.n_ul,
                n_dl: action.n_dl,
                alpha: action.alpha,
                fli_ul: o.fli_ul.into(),
                fli_dl: o.fli_dl.into(),
                e_total: o.energy.e_total,
                reward: *r,
            });
        }
    }
    Ok(log)
}

pub fn write_episode_log(log: &[FrameRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for rec in log {
        w.serialize(rec)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_episode_log(path: &Path) -> Result<Vec<FrameRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

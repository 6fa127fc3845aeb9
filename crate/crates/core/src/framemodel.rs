//! Latency, energy and frame-loss accounting for one frame interval.
//!
//! Within a frame interval the UL slots come first and the DL slots follow.
//! The edge renders and encodes its share of the DL frame while the UL is in
//! flight; if that takes longer than the UL, the leading DL slots are lost to
//! waiting and the headset idles through them.

use serde::{Deserialize, Serialize};

use crate::channel::{snr, RadioParams};
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::traffic::FramePair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadsetParams {
    /// W, local rendering
    pub p_loc: f64,
    /// W, decoding
    pub p_dec: f64,
    /// W
    pub p_ul_max: f64,
    /// W, DL reception
    pub p_dl: f64,
    /// W
    pub p_idle: f64,
    /// bit/s
    pub f_loc: f64,
    /// bit/s
    pub f_dec: f64,
    /// bit/s
    pub f_edge: f64,
    /// bit/s
    pub f_enc: f64,
    /// Multiplier on `f_loc` only; local power draw is unchanged.
    pub loc_capability_scale: f64,
}

impl Default for HeadsetParams {
    fn default() -> Self {
        Self {
            p_loc: 0.5,
            p_dec: 0.1,
            p_ul_max: 0.2,
            p_dl: 0.3,
            p_idle: 0.001,
            f_loc: 200e6,
            f_dec: 3e9,
            f_edge: 600e9,
            f_enc: 3e9,
            loc_capability_scale: 1.0,
        }
    }
}

impl HeadsetParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("p_loc", self.p_loc),
            ("p_dec", self.p_dec),
            ("p_ul_max", self.p_ul_max),
            ("p_dl", self.p_dl),
            ("p_idle", self.p_idle),
            ("f_loc", self.f_loc),
            ("f_dec", self.f_dec),
            ("f_edge", self.f_edge),
            ("f_enc", self.f_enc),
            ("loc_capability_scale", self.loc_capability_scale),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParam(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Effective local rendering speed in bit/s.
    pub fn local_speed(&self) -> f64 {
        self.f_loc * self.loc_capability_scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlotConfig {
    /// s
    pub slot_time: f64,
    pub slots_per_frame: u32,
    /// s
    pub latency_threshold: f64,
}

impl Default for SlotConfig {
    fn default() -> Self {
        Self { slot_time: 1e-3, slots_per_frame: 16, latency_threshold: 20e-3 }
    }
}

impl SlotConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.slot_time > 0.0) {
            return Err(Error::InvalidParam("slot_time must be positive".into()));
        }
        if self.slots_per_frame < 2 {
            return Err(Error::InvalidParam("slots_per_frame must be at least 2".into()));
        }
        if !(self.latency_threshold >= self.slot_time) {
            return Err(Error::InvalidParam("latency_threshold must be at least one slot".into()));
        }
        Ok(())
    }
}

/// What the DL transfer must carry for the DL frame to count as delivered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DlSuccess {
    /// Only the edge-rendered share `alpha * d_dl`.
    #[default]
    EdgePortion,
    /// The full DL frame, regardless of the split.
    FullFrame,
}

/// A point of the action lattice. `alpha` is the grid value at `alpha_index`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub n_ul: u32,
    pub n_dl: u32,
    pub alpha_index: usize,
    pub alpha: f64,
}

impl Action {
    pub fn validate(&self, cfg: &SlotConfig) -> Result<()> {
        if self.n_ul < 1 {
            return Err(Error::InvalidAction("at least one UL slot is required".into()));
        }
        if self.n_ul + self.n_dl > cfg.slots_per_frame {
            return Err(Error::InvalidAction(format!(
                "{} UL + {} DL slots exceed the {} available",
                self.n_ul, self.n_dl, cfg.slots_per_frame
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidAction(format!("offload ratio {} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub l_ul: f64,
    pub l_dl_comm: f64,
    pub l_edge: f64,
    pub l_dec: f64,
    pub l_loc: f64,
    pub l_total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// UL transmission only.
    pub e_ul: f64,
    /// UL plus idling through displaced DL slots.
    pub e_ul_edge: f64,
    pub e_dl: f64,
    pub e_dec: f64,
    pub e_loc: f64,
    pub e_total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameOutcome {
    pub latency: LatencyBreakdown,
    pub energy: EnergyBreakdown,
    pub fli_ul: bool,
    pub fli_dl: bool,
    pub d_ul_sent: f64,
    pub d_dl_sent: f64,
    pub ul_power_used: f64,
    pub displaced_dl_slots: u32,
}

/// Shannon rate in bit/s. Zero transmit power gives zero rate.
pub fn shannon_rate(gain: f64, tx_power: f64, radio: &RadioParams) -> f64 {
    if tx_power <= 0.0 {
        return 0.0;
    }
    radio.bandwidth * (1.0 + snr(gain, tx_power, radio)).log2()
}

/// `(d_edge, d_loc)`; the two always add back up to `d_dl`.
pub fn split_frame(d_dl: f64, alpha: f64) -> (f64, f64) {
    let d_edge = alpha * d_dl;
    (d_edge, d_dl - d_edge)
}

pub fn compute_latencies(
    frame: &FramePair,
    action: &Action,
    cfg: &SlotConfig,
    hp: &HeadsetParams,
) -> LatencyBreakdown {
    let (d_edge, d_loc) = split_frame(frame.d_dl, action.alpha);
    let l_ul = f64::from(action.n_ul) * cfg.slot_time;
    let l_dl_comm = f64::from(action.n_dl) * cfg.slot_time;
    let l_edge = d_edge / hp.f_edge + d_edge / hp.f_enc;
    let l_dec = d_edge / hp.f_dec;
    let l_loc = d_loc / hp.local_speed();
    LatencyBreakdown { l_ul, l_dl_comm, l_edge, l_dec, l_loc, l_total: l_ul + l_dl_comm + l_dec + l_loc }
}

/// DL slots that pass while the edge is still rendering after the UL ended.
pub fn displaced_dl_slots(l_ul: f64, l_edge: f64, slot_time: f64) -> u32 {
    if l_ul >= l_edge {
        0
    } else {
        ((l_edge - l_ul) / slot_time).ceil() as u32
    }
}

pub fn compute_energy(
    frame: &FramePair,
    action: &Action,
    lat: &LatencyBreakdown,
    cfg: &SlotConfig,
    hp: &HeadsetParams,
    ul_power: f64,
) -> EnergyBreakdown {
    let (d_edge, _) = split_frame(frame.d_dl, action.alpha);
    let displaced = displaced_dl_slots(lat.l_ul, lat.l_edge, cfg.slot_time);
    let e_ul = lat.l_ul * ul_power;
    let e_ul_edge = e_ul + f64::from(displaced) * cfg.slot_time * hp.p_idle;
    let e_dl = f64::from(action.n_dl.saturating_sub(displaced)) * cfg.slot_time * hp.p_dl;
    let e_dec = d_edge / hp.f_dec * hp.p_dec;
    let e_loc = lat.l_loc * hp.p_loc;
    EnergyBreakdown { e_ul, e_ul_edge, e_dl, e_dec, e_loc, e_total: e_ul_edge + e_dl + e_dec + e_loc }
}

/// Bits carried in the UL slots and in the usable DL slots of one frame.
pub fn data_sent(
    slice: &[f64],
    action: &Action,
    ul_power: f64,
    p_bs: f64,
    displaced: u32,
    radio: &RadioParams,
    slot_time: f64,
) -> Result<(f64, f64)> {
    let n_ul = action.n_ul as usize;
    let n_dl = action.n_dl as usize;
    if slice.len() < n_ul + n_dl {
        return Err(Error::TraceUnderrun { needed: n_ul + n_dl, available: slice.len() });
    }
    let ul: f64 = slice[..n_ul]
        .iter()
        .map(|&g| shannon_rate(g, ul_power, radio) * slot_time)
        .sum();
    let first_usable = n_ul + (displaced as usize).min(n_dl);
    let dl: f64 = slice[first_usable..n_ul + n_dl]
        .iter()
        .map(|&g| shannon_rate(g, p_bs, radio) * slot_time)
        .sum();
    Ok((ul, dl))
}

/// `(fli_ul, fli_dl)`. A lost UL frame also loses the DL frame.
pub fn frame_loss(
    frame: &FramePair,
    sent: (f64, f64),
    lat: &LatencyBreakdown,
    cfg: &SlotConfig,
    alpha: f64,
    mode: DlSuccess,
) -> (bool, bool) {
    let (d_ul_sent, d_dl_sent) = sent;
    let fli_ul = d_ul_sent < frame.d_ul;
    let dl_needed = match mode {
        DlSuccess::EdgePortion => alpha * frame.d_dl,
        DlSuccess::FullFrame => frame.d_dl,
    };
    let fli_dl = fli_ul || d_dl_sent < dl_needed || lat.l_total > cfg.latency_threshold;
    (fli_ul, fli_dl)
}

/// Smallest grid power that carries the UL frame at `predicted_gain`,
/// falling back to full power when none does.
pub fn adjust_ul_power(
    frame: &FramePair,
    action: &Action,
    predicted_gain: f64,
    radio: &RadioParams,
    p_ul_max: f64,
    beta_grid: &[f64],
    slot_time: f64,
) -> f64 {
    let airtime = f64::from(action.n_ul) * slot_time;
    let mut betas: Vec<f64> = beta_grid.to_vec();
    betas.sort_by(f64::total_cmp);
    betas
        .into_iter()
        .map(|beta| beta * p_ul_max)
        .find(|&p| airtime * shannon_rate(predicted_gain, p, radio) >= frame.d_ul)
        .unwrap_or(p_ul_max)
}

/// Runs one frame interval end to end.
pub fn simulate_frame(
    frame: &FramePair,
    action: &Action,
    slice: &[f64],
    params: &SystemParams,
) -> Result<FrameOutcome> {
    let cfg = &params.slots;
    let hp = &params.headset;
    let radio = &params.radio;
    action.validate(cfg)?;
    let needed = (action.n_ul + action.n_dl) as usize;
    if slice.len() < needed {
        return Err(Error::TraceUnderrun { needed, available: slice.len() });
    }

    let ul_power = adjust_ul_power(
        frame,
        action,
        slice[0],
        radio,
        hp.p_ul_max,
        &params.beta_grid,
        cfg.slot_time,
    );
    let latency = compute_latencies(frame, action, cfg, hp);
    let displaced = displaced_dl_slots(latency.l_ul, latency.l_edge, cfg.slot_time);
    let sent = data_sent(slice, action, ul_power, radio.bs_tx_power(), displaced, radio, cfg.slot_time)?;
    let energy = compute_energy(frame, action, &latency, cfg, hp, ul_power);
    let (fli_ul, fli_dl) = frame_loss(frame, sent, &latency, cfg, action.alpha, params.dl_success);
    Ok(FrameOutcome {
        latency,
        energy,
        fli_ul,
        fli_dl,
        d_ul_sent: sent.0,
        d_dl_sent: sent.1,
        ul_power_used: ul_power,
        displaced_dl_slots: displaced,
    })
}

use serde::{Deserialize, Serialize};

use crate::channel::RadioParams;
use crate::error::{Error, Result};
use crate::framemodel::{DlSuccess, HeadsetParams, SlotConfig};
use crate::traffic::TrafficParams;

/// Everything the frame model needs, with the evaluation-table defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    pub radio: RadioParams,
    pub traffic: TrafficParams,
    pub headset: HeadsetParams,
    pub slots: SlotConfig,
    /// Discrete UL power levels as fractions of `p_ul_max`.
    pub beta_grid: Vec<f64>,
    pub dl_success: DlSuccess,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            radio: RadioParams::default(),
            traffic: TrafficParams::default(),
            headset: HeadsetParams::default(),
            slots: SlotConfig::default(),
            beta_grid: vec![0.25, 0.5, 0.75, 1.0],
            dl_success: DlSuccess::default(),
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        self.traffic.validate()?;
        self.headset.validate()?;
        self.slots.validate()?;
        if self.beta_grid.is_empty() || self.beta_grid.iter().any(|b| !(*b > 0.0 && *b <= 1.0)) {
            return Err(Error::InvalidParam("beta_grid values must lie in (0, 1]".into()));
        }
        if !self.beta_grid.contains(&1.0) {
            return Err(Error::InvalidParam("beta_grid must contain 1.0".into()));
        }
        Ok(())
    }
}

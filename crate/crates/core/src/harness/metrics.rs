use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::env::FrameRecord;
use crate::error::{Error, Result};

/// Aggregates over the frames of one or more evaluation episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub flr_ul: f64,
    pub flr_dl: f64,
    /// Fraction of frames lost in either direction.
    pub flr_total: f64,
    /// J per frame.
    pub mean_energy: f64,
    pub mean_offload_ratio: f64,
    /// Per frame.
    pub mean_reward: f64,
    pub frames: usize,
}

impl EpisodeMetrics {
    pub fn from_records(records: &[FrameRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidParam("no frames to aggregate".into()));
        }
        let n = records.len() as f64;
        let mean = |f: &dyn Fn(&FrameRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            flr_ul: mean(&|r| r.fli_ul as f64),
            flr_dl: mean(&|r| r.fli_dl as f64),
            flr_total: mean(&|r| r.fli_ul.max(r.fli_dl) as f64),
            mean_energy: mean(&|r| r.e_total),
            mean_offload_ratio: mean(&|r| r.alpha),
            mean_reward: mean(&|r| r.reward),
            frames: records.len(),
        })
    }
}

/// Largest qualifying distance on the grid, or none at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coverage {
    Distance(f64),
    BelowMinimum,
}

impl Coverage {
    pub fn distance(self) -> Option<f64> {
        match self {
            Coverage::Distance(d) => Some(d),
            Coverage::BelowMinimum => None,
        }
    }
}

impl fmt::Display for Coverage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coverage::Distance(d) => write!(f, "{d} m"),
            Coverage::BelowMinimum => f.write_str("below minimum grid point"),
        }
    }
}

impl Serialize for Coverage {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Coverage::Distance(d) => s.serialize_f64(*d),
            Coverage::BelowMinimum => s.serialize_str("below minimum grid point"),
        }
    }
}

/// `points` are `(distance, mean total FLR)` over an increasing distance grid.
///
/// Returns the largest distance whose FLR is within `flr_limit`. No
/// interpolation, so the grid step bounds the precision.
pub fn coverage_distance(points: &[(f64, f64)], flr_limit: f64) -> Result<Coverage> {
    if points.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::InvalidParam("coverage needs a strictly increasing distance grid".into()));
    }
    Ok(points
        .iter()
        .rev()
        .find(|(_, flr)| *flr <= flr_limit)
        .map_or(Coverage::BelowMinimum, |(d, _)| Coverage::Distance(*d)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionKind {
    Always,
    Partial,
    Never,
}

impl RegionKind {
    pub fn classify(alpha: f64, always: f64, never: f64) -> Self {
        if alpha >= always {
            RegionKind::Always
        } else if alpha <= never {
            RegionKind::Never
        } else {
            RegionKind::Partial
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub kind: RegionKind,
    /// First and last grid distance of the run, m.
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionTable {
    /// Classification of every grid distance.
    pub points: Vec<(f64, RegionKind)>,
    /// Maximal runs of equally classified distances, in grid order.
    pub regions: Vec<Region>,
    /// Grid distances where a new region starts.
    pub boundaries: Vec<f64>,
}

/// Classifies `(distance, mean offload ratio)` points into decision regions.
pub fn decision_regions(points: &[(f64, f64)], always: f64, never: f64) -> Result<RegionTable> {
    if points.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::InvalidParam("regions need a strictly increasing distance grid".into()));
    }
    let classified: Vec<(f64, RegionKind)> =
        points.iter().map(|&(d, a)| (d, RegionKind::classify(a, always, never))).collect();
    let mut regions: Vec<Region> = Vec::new();
    for &(d, kind) in &classified {
        match regions.last_mut() {
            Some(r) if r.kind == kind => r.end = d,
            _ => regions.push(Region { kind, start: d, end: d }),
        }
    }
    let boundaries = regions.iter().skip(1).map(|r| r.start).collect();
    Ok(RegionTable { points: classified, regions, boundaries })
}

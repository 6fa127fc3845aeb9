//! XR frame sizes drawn from truncated Gaussians.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficParams {
    /// bit/s
    pub dl_rate: f64,
    /// bit/s
    pub ul_rate: f64,
    pub fps: f64,
    /// Standard deviation as a fraction of the mean frame size.
    pub std_fraction: f64,
    /// `[low, high]` truncation bounds as fractions of the mean.
    pub truncation: [f64; 2],
}

impl Default for TrafficParams {
    fn default() -> Self {
        Self {
            dl_rate: 28e6,
            ul_rate: 8.5e6,
            fps: 60.0,
            std_fraction: 0.105,
            truncation: [0.5, 1.5],
        }
    }
}

impl TrafficParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dl_rate > 0.0 && self.ul_rate > 0.0 && self.fps > 0.0) {
            return Err(Error::InvalidParam("traffic rates and fps must be positive".into()));
        }
        if !(self.std_fraction >= 0.0 && self.std_fraction.is_finite()) {
            return Err(Error::InvalidParam("std_fraction must be non-negative".into()));
        }
        let [lo, hi] = self.truncation;
        if !(0.0 < lo && lo < 1.0 && 1.0 < hi && hi.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "truncation must satisfy 0 < low < 1 < high, got [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    pub fn mean_ul(&self) -> f64 {
        self.ul_rate / self.fps
    }

    pub fn mean_dl(&self) -> f64 {
        self.dl_rate / self.fps
    }

    pub fn max_ul(&self) -> f64 {
        self.mean_ul() * self.truncation[1]
    }

    pub fn max_dl(&self) -> f64 {
        self.mean_dl() * self.truncation[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePair {
    pub frame_index: usize,
    /// bits
    pub d_ul: f64,
    /// bits
    pub d_dl: f64,
}

struct TruncatedNormal {
    normal: Option<Normal<f64>>,
    mean: f64,
    low: f64,
    high: f64,
}

impl TruncatedNormal {
    fn new(mean: f64, std_fraction: f64, [lo, hi]: [f64; 2]) -> Self {
        let normal = (std_fraction > 0.0)
            .then(|| Normal::new(mean, std_fraction * mean).expect("finite std"));
        Self { normal, mean, low: lo * mean, high: hi * mean }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let Some(normal) = &self.normal else {
            return self.mean;
        };
        loop {
            let x = normal.sample(rng);
            if (self.low..=self.high).contains(&x) {
                return x;
            }
        }
    }
}

/// Draws `n_frames` independent UL/DL frame-size pairs.
pub fn generate_frames(params: &TrafficParams, n_frames: usize, seed: u64) -> Result<Vec<FramePair>> {
    if n_frames == 0 {
        return Err(Error::InvalidParam("n_frames must be at least 1".into()));
    }
    params.validate()?;
    let ul = TruncatedNormal::new(params.mean_ul(), params.std_fraction, params.truncation);
    let dl = TruncatedNormal::new(params.mean_dl(), params.std_fraction, params.truncation);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_frames)
        .map(|frame_index| {
            let d_ul = ul.sample(&mut rng);
            let d_dl = dl.sample(&mut rng);
            FramePair { frame_index, d_ul, d_dl }
        })
        .collect())
}

pub fn write_frames_csv(frames: &[FramePair], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["frame_index", "d_ul_bits", "d_dl_bits"])?;
    for f in frames {
        w.serialize((f.frame_index, f.d_ul, f.d_dl))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_frames_csv(path: &Path) -> Result<Vec<FramePair>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut frames = Vec::new();
    for row in r.deserialize::<(usize, f64, f64)>() {
        let (frame_index, d_ul, d_dl) = row?;
        if !(d_ul >= 0.0 && d_dl >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "{}: negative frame size at frame {frame_index}",
                path.display()
            )));
        }
        frames.push(FramePair { frame_index, d_ul, d_dl });
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_mean_matches_rate() {
        let p = TrafficParams::default();
        let frames = generate_frames(&p, 100_000, 1).unwrap();
        let n = frames.len() as f64;
        let dl = frames.iter().map(|f| f.d_dl).sum::<f64>() / n;
        let ul = frames.iter().map(|f| f.d_ul).sum::<f64>() / n;
        assert!((dl / (28e6 / 60.0) - 1.0).abs() < 0.01, "dl mean {dl}");
        assert!((ul / (8.5e6 / 60.0) - 1.0).abs() < 0.01, "ul mean {ul}");
    }

    #[test]
    fn zero_std_is_exact_mean() {
        let p = TrafficParams { std_fraction: 0.0, ..Default::default() };
        for f in generate_frames(&p, 50, 2).unwrap() {
            assert_eq!(f.d_dl, p.mean_dl());
            assert_eq!(f.d_ul, p.mean_ul());
        }
    }

    #[test]
    fn truncation_bounds_hold() {
        let p = TrafficParams { std_fraction: 0.6, ..Default::default() };
        for f in generate_frames(&p, 20_000, 3).unwrap() {
            assert!(f.d_dl >= 0.5 * p.mean_dl() && f.d_dl <= 1.5 * p.mean_dl());
            assert!(f.d_ul >= 0.5 * p.mean_ul() && f.d_ul <= 1.5 * p.mean_ul());
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let p = TrafficParams::default();
        assert_eq!(generate_frames(&p, 30, 9).unwrap(), generate_frames(&p, 30, 9).unwrap());
    }

    #[test]
    fn rejects_bad_truncation() {
        let p = TrafficParams { truncation: [1.2, 1.5], ..Default::default() };
        assert!(generate_frames(&p, 1, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frames.csv");
        let frames = generate_frames(&TrafficParams::default(), 25, 4).unwrap();
        write_frames_csv(&frames, &path).unwrap();
        assert_eq!(read_frames_csv(&path).unwrap(), frames);
    }
}

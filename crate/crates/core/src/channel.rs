//! Per-slot channel gains for a single headset and base station.
//!
//! The large-scale part follows the urban-macro NLOS path-loss model of
//! 3GPP TR 38.901 (Table 7.4.1-1) plus one log-normal shadowing draw per
//! episode. Small-scale fading is a sum of independent Rayleigh taps, each
//! generated with a Zheng-Xiao sum-of-sinusoids so that its autocorrelation
//! follows the Clarke/Jakes Doppler spectrum. The per-slot gain used by the
//! rate formula is the matched-filter bound, i.e. the total received power
//! over all taps.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Lower edge of the UMa validity range (2D distance).
pub const MIN_DISTANCE: f64 = 10.0;
/// Upper edge of the UMa validity range (2D distance).
pub const MAX_DISTANCE: f64 = 5_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioParams {
    /// Hz
    pub carrier_frequency: f64,
    /// Hz
    pub bandwidth: f64,
    /// m
    pub bs_height: f64,
    /// m
    pub ue_height: f64,
    /// dBm/MHz, scaled by the bandwidth to get the total BS power.
    pub bs_tx_power_density: f64,
    /// dB
    pub noise_figure: f64,
    /// dBm/Hz
    pub thermal_noise_density: f64,
    pub bs_array_elements: u32,
    pub ue_array_elements: u32,
    /// m/s
    pub ue_speed: f64,
    /// dB
    pub shadowing_sigma: f64,
    /// Number of independent Rayleigh taps summed into the MFB gain.
    pub multipath_taps: usize,
    /// Sinusoids per quadrature branch of each tap.
    pub sinusoids_per_tap: usize,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            carrier_frequency: 7e9,
            bandwidth: 20e6,
            bs_height: 25.0,
            ue_height: 1.8,
            bs_tx_power_density: 23.0,
            noise_figure: 7.0,
            thermal_noise_density: -174.0,
            bs_array_elements: 64,
            ue_array_elements: 4,
            ue_speed: 5.0 / 3.6,
            shadowing_sigma: 6.0,
            multipath_taps: 4,
            sinusoids_per_tap: 16,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_frequency", self.carrier_frequency),
            ("bandwidth", self.bandwidth),
            ("bs_height", self.bs_height),
            ("ue_height", self.ue_height),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParam(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.ue_speed >= 0.0 && self.shadowing_sigma >= 0.0) {
            return Err(Error::InvalidParam(
                "ue_speed and shadowing_sigma must be non-negative".into(),
            ));
        }
        if self.bs_array_elements == 0 || self.ue_array_elements == 0 {
            return Err(Error::InvalidParam("antenna arrays need at least one element".into()));
        }
        if self.multipath_taps == 0 || self.sinusoids_per_tap == 0 {
            return Err(Error::InvalidParam("fading needs at least one tap and sinusoid".into()));
        }
        if !(self.noise_figure.is_finite()
            && self.thermal_noise_density.is_finite()
            && self.bs_tx_power_density.is_finite())
        {
            return Err(Error::InvalidParam("noise and power densities must be finite".into()));
        }
        Ok(())
    }

    /// Boresight array gain, linear (product of element counts).
    pub fn antenna_gain(&self) -> f64 {
        f64::from(self.bs_array_elements) * f64::from(self.ue_array_elements)
    }

    /// Total noise power over the band in W, noise figure included.
    pub fn noise_power(&self) -> f64 {
        let dbm = self.thermal_noise_density + self.noise_figure + 10.0 * self.bandwidth.log10();
        dbm_to_watt(dbm)
    }

    /// Total BS transmit power in W.
    pub fn bs_tx_power(&self) -> f64 {
        dbm_to_watt(self.bs_tx_power_density + 10.0 * (self.bandwidth / 1e6).log10())
    }

    pub fn doppler(&self) -> f64 {
        self.ue_speed * self.carrier_frequency / SPEED_OF_LIGHT
    }

    /// Mean large-scale gain at `distance` (no shadowing, unit fading).
    pub fn mean_gain(&self, distance: f64) -> Result<f64> {
        Ok(self.antenna_gain() * db_to_linear(-path_loss_db(distance, self)?))
    }
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// UMa NLOS path loss in dB at 2D distance `d`.
pub fn path_loss_db(d: f64, params: &RadioParams) -> Result<f64> {
    if !(MIN_DISTANCE..=MAX_DISTANCE).contains(&d) {
        return Err(Error::DistanceOutOfRange(d));
    }
    let h_bs = params.bs_height;
    let h_ut = params.ue_height;
    let fc_ghz = params.carrier_frequency / 1e9;
    let dh = h_bs - h_ut;
    let d3 = (d * d + dh * dh).sqrt();

    // Effective environment height is 1 m for h_UT < 13 m.
    let d_bp = 4.0 * (h_bs - 1.0) * (h_ut - 1.0) * params.carrier_frequency / SPEED_OF_LIGHT;
    let los = if d <= d_bp {
        28.0 + 22.0 * d3.log10() + 20.0 * fc_ghz.log10()
    } else {
        28.0 + 40.0 * d3.log10() + 20.0 * fc_ghz.log10() - 9.0 * (d_bp * d_bp + dh * dh).log10()
    };
    let nlos = 13.54 + 39.08 * d3.log10() + 20.0 * fc_ghz.log10() - 0.6 * (h_ut - 1.5);
    Ok(los.max(nlos))
}

/// Received SNR for a linear channel gain and transmit power.
pub fn snr(gain: f64, tx_power: f64, params: &RadioParams) -> f64 {
    gain * tx_power / params.noise_power()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTrace {
    pub distance: f64,
    /// Linear MFB power gain per slot.
    pub gains: Vec<f64>,
    /// `None` for traces imported from CSV.
    pub seed: Option<u64>,
}

impl ChannelTrace {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// The `slots_per_frame` gains of frame `frame`.
    pub fn frame_slice(&self, frame: usize, slots_per_frame: usize) -> Result<&[f64]> {
        let start = frame * slots_per_frame;
        let end = start + slots_per_frame;
        self.gains.get(start..end).ok_or(Error::TraceUnderrun {
            needed: end,
            available: self.gains.len(),
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["slot_index", "gain_linear"])?;
        for (i, g) in self.gains.iter().enumerate() {
            w.serialize((i, g))?;
        }
        w.flush().map_err(io_err(path))?;
        Ok(())
    }

    pub fn read_csv(path: &Path, distance: f64) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut gains = Vec::new();
        for (expected, row) in r.deserialize::<(usize, f64)>().enumerate() {
            let (index, gain) = row?;
            if index != expected {
                return Err(Error::InvalidParam(format!(
                    "{}: slot_index {index} out of order (expected {expected})",
                    path.display()
                )));
            }
            if !(gain > 0.0 && gain.is_finite()) {
                return Err(Error::InvalidParam(format!(
                    "{}: gain at slot {index} must be positive and finite",
                    path.display()
                )));
            }
            gains.push(gain);
        }
        Ok(Self { distance, gains, seed: None })
    }
}

/// One Rayleigh tap as a Zheng-Xiao sum of sinusoids.
struct SosTap {
    freq_i: Vec<f64>,
    phase_i: Vec<f64>,
    freq_q: Vec<f64>,
    phase_q: Vec<f64>,
}

impl SosTap {
    fn new(doppler: f64, sinusoids: usize, rng: &mut ChaCha8Rng) -> Self {
        let m = sinusoids as f64;
        let theta: f64 = rng.random_range(-PI..PI);
        let mut tap = Self {
            freq_i: Vec::with_capacity(sinusoids),
            phase_i: Vec::with_capacity(sinusoids),
            freq_q: Vec::with_capacity(sinusoids),
            phase_q: Vec::with_capacity(sinusoids),
        };
        for n in 1..=sinusoids {
            let aoa = (2.0 * PI * n as f64 - PI + theta) / (4.0 * m);
            tap.freq_i.push(doppler * aoa.cos());
            tap.freq_q.push(doppler * aoa.sin());
            tap.phase_i.push(rng.random_range(-PI..PI));
            tap.phase_q.push(rng.random_range(-PI..PI));
        }
        tap
    }

    /// |h(t)|², unit mean.
    fn power(&self, t: f64) -> f64 {
        let branch = |freq: &[f64], phase: &[f64]| -> f64 {
            freq.iter()
                .zip(phase)
                .map(|(f, p)| (2.0 * PI * f * t + p).cos())
                .sum::<f64>()
        };
        let scale = 2.0 / self.freq_i.len() as f64;
        let i = branch(&self.freq_i, &self.phase_i);
        let q = branch(&self.freq_q, &self.phase_q);
        0.5 * scale * (i * i + q * q)
    }
}

/// Unit-mean, temporally correlated small-scale fading power, one value per slot.
pub fn fading_sequence(
    n_slots: usize,
    params: &RadioParams,
    slot_time: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let doppler = params.doppler();
    let taps: Vec<SosTap> = (0..params.multipath_taps)
        .map(|_| SosTap::new(doppler, params.sinusoids_per_tap, rng))
        .collect();
    let tap_weight = 1.0 / taps.len() as f64;
    (0..n_slots)
        .map(|k| {
            let t = k as f64 * slot_time;
            let g: f64 = taps.iter().map(|tap| tap.power(t)).sum::<f64>() * tap_weight;
            // a sum of sinusoids can touch zero exactly; keep gains strictly positive
            g.max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// The distance-free part of a trace: one shadowing draw and the fading sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallScaleTrace {
    pub shadow_db: f64,
    pub fading: Vec<f64>,
    pub seed: u64,
}

impl SmallScaleTrace {
    pub fn generate(n_slots: usize, params: &RadioParams, slot_time: f64, seed: u64) -> Result<Self> {
        if n_slots == 0 {
            return Err(Error::InvalidParam("n_slots must be at least 1".into()));
        }
        if !(slot_time > 0.0) {
            return Err(Error::InvalidParam("slot_time must be positive".into()));
        }
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shadow_db = if params.shadowing_sigma > 0.0 {
            Normal::new(0.0, params.shadowing_sigma)
                .expect("sigma checked")
                .sample(&mut rng)
        } else {
            0.0
        };
        let fading = fading_sequence(n_slots, params, slot_time, &mut rng);
        Ok(Self { shadow_db, fading, seed })
    }

    /// Applies path loss and antenna gain at `distance`.
    pub fn at_distance(&self, distance: f64, params: &RadioParams) -> Result<ChannelTrace> {
        let pl = path_loss_db(distance, params)?;
        let large_scale = params.antenna_gain() * db_to_linear(-(pl + self.shadow_db));
        let gains = self.fading.iter().map(|g| large_scale * g).collect();
        Ok(ChannelTrace { distance, gains, seed: Some(self.seed) })
    }
}

/// Generates the per-slot MFB gains of one episode.
pub fn generate_trace(
    distance: f64,
    n_slots: usize,
    params: &RadioParams,
    slot_time: f64,
    seed: u64,
) -> Result<ChannelTrace> {
    path_loss_db(distance, params)?;
    SmallScaleTrace::generate(n_slots, params, slot_time, seed)?.at_distance(distance, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_loss_golden_at_500m() {
        // hand-evaluated from the UMa NLOS formula: NLOS branch dominates,
        // d3D = sqrt(500^2 + 23.2^2)
        let pl = path_loss_db(500.0, &RadioParams::default()).unwrap();
        assert!((pl - 135.755_959_194_723_23).abs() < 1e-9, "{pl}");
    }

    #[test]
    fn path_loss_monotone() {
        let p = RadioParams::default();
        assert!(path_loss_db(100.0, &p).unwrap() < path_loss_db(500.0, &p).unwrap());
        let hi = RadioParams { carrier_frequency: 14e9, ..p.clone() };
        assert!(path_loss_db(300.0, &hi).unwrap() > path_loss_db(300.0, &p).unwrap());
    }

    #[test]
    fn path_loss_rejects_short_distance() {
        let err = path_loss_db(5.0, &RadioParams::default()).unwrap_err();
        assert!(err.to_string().contains("distance out of model range"));
        assert!(path_loss_db(10.0, &RadioParams::default()).is_ok());
    }

    #[test]
    fn noise_power_golden() {
        // -174 + 10 log10(20e6) + 7 = -93.9897 dBm
        let n = RadioParams::default().noise_power();
        assert!((n / 3.990_524_629_937_766e-13 - 1.0).abs() < 1e-12, "{n}");
    }

    #[test]
    fn bs_power_from_density() {
        // 23 dBm/MHz over 20 MHz = 36.01 dBm
        let p = RadioParams::default().bs_tx_power();
        assert!((p - 3.990_524_629_937_758).abs() < 1e-12);
    }

    #[test]
    fn snr_unit_and_linear() {
        let p = RadioParams::default();
        let gain = p.noise_power() / 0.2;
        assert!((snr(gain, 0.2, &p) - 1.0).abs() < 1e-12);
        assert!((snr(gain, 0.4, &p) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn trace_is_deterministic() {
        let p = RadioParams::default();
        let a = generate_trace(300.0, 500, &p, 1e-3, 7).unwrap();
        let b = generate_trace(300.0, 500, &p, 1e-3, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_trace(300.0, 500, &p, 1e-3, 8).unwrap();
        assert_ne!(a.gains, c.gains);
    }

    #[test]
    fn zero_speed_gives_constant_fading() {
        let p = RadioParams { ue_speed: 0.0, ..Default::default() };
        let t = generate_trace(200.0, 300, &p, 1e-3, 3).unwrap();
        assert!(t.gains.iter().all(|g| *g == t.gains[0]));
    }

    #[test]
    fn fading_has_unit_mean() {
        let p = RadioParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = fading_sequence(100_000, &p, 1e-3, &mut rng);
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn mean_gain_decreases_with_distance() {
        let p = RadioParams::default();
        let avg = |d: f64| {
            (0..100u64)
                .map(|s| {
                    let t = generate_trace(d, 64, &p, 1e-3, s).unwrap();
                    t.gains.iter().sum::<f64>() / t.len() as f64
                })
                .sum::<f64>()
                / 100.0
        };
        assert!(avg(400.0) < avg(200.0));
    }

    #[test]
    fn rejects_empty_trace() {
        assert!(generate_trace(100.0, 0, &RadioParams::default(), 1e-3, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let t = generate_trace(250.0, 40, &RadioParams::default(), 1e-3, 5).unwrap();
        t.write_csv(&path).unwrap();
        let back = ChannelTrace::read_csv(&path, 250.0).unwrap();
        assert_eq!(back.gains, t.gains);
        assert_eq!(back.seed, None);
    }
}

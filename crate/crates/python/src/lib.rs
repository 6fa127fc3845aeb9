//! Python bindings. Configs are passed as TOML text in the format printed by
//! `default_config()`; omitted keys keep their defaults.

use std::path::Path;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use xrslot::channel::{self, ChannelTrace};
use xrslot::env::{RewardParams, XrEnv};
use xrslot::framemodel;
use xrslot::harness::{self, ExperimentConfig};
use xrslot::policies::{self, ActionGrid};
use xrslot::traffic::{self, FramePair};
use xrslot::SystemParams;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn config(text: Option<&str>) -> PyResult<ExperimentConfig> {
    let cfg = match text {
        Some(t) => ExperimentConfig::from_toml_str(t).map_err(err)?,
        None => ExperimentConfig::default(),
    };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

/// System and reward parameters at the first point of every sweep axis.
fn setting(cfg: &ExperimentConfig) -> (SystemParams, RewardParams) {
    let system = cfg.system_at(cfg.sweep.bandwidths[0], cfg.sweep.loc_capability_scales[0]);
    let reward = cfg.reward_params(&system, cfg.sweep.sigmas[0], cfg.sweep.windows[0]);
    (system, reward)
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn grid_action(grid: &ActionGrid, index: usize) -> PyResult<framemodel::Action> {
    grid.get(index).copied().ok_or_else(|| err(format!("action index {index} outside 0..{}", grid.len())))
}

/// The default experiment configuration as TOML.
#[pyfunction]
fn default_config() -> PyResult<String> {
    ExperimentConfig::default().to_toml_string().map_err(err)
}

/// Path loss in dB at `distance` metres.
#[pyfunction]
#[pyo3(signature = (distance, config=None))]
fn path_loss_db(distance: f64, config: Option<&str>) -> PyResult<f64> {
    let cfg = self::config(config)?;
    channel::path_loss_db(distance, &cfg.radio).map_err(err)
}

/// Per-slot linear channel gains.
#[pyfunction]
#[pyo3(signature = (distance, n_slots, seed, config=None))]
fn generate_trace(distance: f64, n_slots: usize, seed: u64, config: Option<&str>) -> PyResult<Vec<f64>> {
    let cfg = self::config(config)?;
    let trace = channel::generate_trace(distance, n_slots, &cfg.radio, cfg.slots.slot_time, seed).map_err(err)?;
    Ok(trace.gains)
}

/// `(d_ul, d_dl)` frame sizes in bits.
#[pyfunction]
#[pyo3(signature = (n_frames, seed, config=None))]
fn generate_frames(n_frames: usize, seed: u64, config: Option<&str>) -> PyResult<Vec<(f64, f64)>> {
    let cfg = self::config(config)?;
    let frames = traffic::generate_frames(&cfg.traffic, n_frames, seed).map_err(err)?;
    Ok(frames.iter().map(|f| (f.d_ul, f.d_dl)).collect())
}

/// Latency, energy and loss of one frame; `gains` covers the frame's slots.
#[pyfunction]
#[pyo3(signature = (d_ul, d_dl, n_ul, n_dl, alpha, gains, config=None))]
#[allow(clippy::too_many_arguments)]
fn simulate_frame<'py>(
    py: Python<'py>,
    d_ul: f64,
    d_dl: f64,
    n_ul: u32,
    n_dl: u32,
    alpha: f64,
    gains: Vec<f64>,
    config: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = self::config(config)?;
    let (system, _) = setting(&cfg);
    let frame = FramePair { frame_index: 0, d_ul, d_dl };
    let action = framemodel::Action { n_ul, n_dl, alpha_index: 0, alpha };
    let outcome = framemodel::simulate_frame(&frame, &action, &gains, &system).map_err(err)?;
    to_py(py, &outcome)
}

/// Best `(n_ul, n_dl, alpha, reward)` for one frame with known gains.
#[pyfunction]
#[pyo3(signature = (d_ul, d_dl, gains, config=None))]
fn greedy_oracle(d_ul: f64, d_dl: f64, gains: Vec<f64>, config: Option<&str>) -> PyResult<(u32, u32, f64, f64)> {
    let cfg = self::config(config)?;
    let (system, reward) = setting(&cfg);
    let grid = ActionGrid::partial(cfg.alpha_values.clone(), system.slots.slots_per_frame).map_err(err)?;
    let frame = FramePair { frame_index: 0, d_ul, d_dl };
    let (a, r) = policies::greedy_oracle(&frame, &gains, &system, &grid, &reward).map_err(err)?;
    Ok((a.n_ul, a.n_dl, a.alpha, r))
}

/// Runs a sweep and returns one dict per result row. With `out_dir`, also
/// writes results.csv, summary.json and manifest.json there.
#[pyfunction]
#[pyo3(signature = (config=None, out_dir=None))]
fn run_sweep<'py>(py: Python<'py>, config: Option<&str>, out_dir: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = self::config(config)?;
    let rows = py
        .detach(|| {
            let rows = harness::run_sweep(&cfg, out_dir.map(Path::new))?;
            if let Some(dir) = out_dir {
                harness::write_outputs(&cfg, &rows, Path::new(dir))?;
            }
            Ok::<_, xrslot::Error>(rows)
        })
        .map_err(err)?;
    to_py(py, &rows)
}

/// One episode over generated traffic and channel. Actions are indices into
/// the partial-offloading grid, see `actions()`.
#[pyclass(module = "pyxrslot")]
struct Env {
    env: XrEnv,
    grid: ActionGrid,
}

#[pymethods]
impl Env {
    #[new]
    #[pyo3(signature = (distance, n_frames=100, traffic_seed=0, channel_seed=1, config=None))]
    fn new(distance: f64, n_frames: usize, traffic_seed: u64, channel_seed: u64, config: Option<&str>) -> PyResult<Self> {
        let cfg = self::config(config)?;
        let (system, reward) = setting(&cfg);
        let grid = ActionGrid::partial(cfg.alpha_values.clone(), system.slots.slots_per_frame).map_err(err)?;
        let env = XrEnv::generate(system, reward, distance, n_frames, traffic_seed, channel_seed).map_err(err)?;
        Ok(Self { env, grid })
    }

    /// Rebuilds the episode from an explicit trace and frame list.
    #[staticmethod]
    #[pyo3(signature = (distance, gains, frames, config=None))]
    fn from_data(distance: f64, gains: Vec<f64>, frames: Vec<(f64, f64)>, config: Option<&str>) -> PyResult<Self> {
        let cfg = self::config(config)?;
        let (system, reward) = setting(&cfg);
        let grid = ActionGrid::partial(cfg.alpha_values.clone(), system.slots.slots_per_frame).map_err(err)?;
        let frames =
            frames.into_iter().enumerate().map(|(i, (d_ul, d_dl))| FramePair { frame_index: i, d_ul, d_dl }).collect();
        let trace = ChannelTrace { distance, gains, seed: None };
        let env = XrEnv::new(system, reward, frames, trace).map_err(err)?;
        Ok(Self { env, grid })
    }

    /// `(n_ul, n_dl, alpha)` for every action index.
    fn actions(&self) -> Vec<(u32, u32, f64)> {
        self.grid.actions().iter().map(|a| (a.n_ul, a.n_dl, a.alpha)).collect()
    }

    #[getter]
    fn n_frames(&self) -> usize {
        self.env.n_frames()
    }

    #[getter]
    fn frame_index(&self) -> usize {
        self.env.frame_index()
    }

    #[getter]
    fn done(&self) -> bool {
        self.env.is_done()
    }

    fn reset(&mut self) {
        self.env.reset();
    }

    /// `(d_ul, d_dl, h)` of the current frame, or `None` when done.
    fn observe(&self) -> Option<(f64, f64, f64)> {
        self.env.observe().map(|s| (s.d_ul, s.d_dl, s.h))
    }

    /// Index of the full-knowledge best action for the current frame.
    fn oracle_action(&self) -> PyResult<usize> {
        let view = self.env.view().ok_or_else(|| err("episode is over"))?;
        let (a, _) = policies::greedy_oracle(view.frame, view.slice, view.params, &self.grid, view.reward).map_err(err)?;
        self.grid.index_of(&a).ok_or_else(|| err("oracle action outside the grid"))
    }

    /// Applies an action; returns `(reward, done, outcomes)` where `outcomes`
    /// holds one dict per frame the action was held for.
    fn step<'py>(&mut self, py: Python<'py>, action: usize) -> PyResult<(f64, bool, Bound<'py, PyAny>)> {
        let a = grid_action(&self.grid, action)?;
        let step = self.env.step(&a).map_err(err)?;
        Ok((step.reward, step.done, to_py(py, &step.outcomes)?))
    }
}

#[pymodule]
fn pyxrslot(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(path_loss_db, m)?)?;
    m.add_function(wrap_pyfunction!(generate_trace, m)?)?;
    m.add_function(wrap_pyfunction!(generate_frames, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_frame, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_class::<Env>()?;
    Ok(())
}

//! Deep Q-learning over the action lattice.
//!
//! Everything is in-repo: a one-hidden-layer network with hand-written
//! backpropagation, Adam, uniform experience replay, a periodically synced
//! target network and epsilon-greedy exploration.

mod network;
mod replay;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use network::{argmax, Adam, Gradient, QNetwork};
pub use replay::{ReplayBuffer, Transition};

use crate::env::{EnvState, XrEnv};
use crate::error::{io_err, Error, Result};
use crate::framemodel::Action;
use crate::policies::{ActionGrid, FrameView, Policy};
use crate::traffic::TrafficParams;

pub const STATE_DIM: usize = 3;

/// Decibel span mapped onto one unit of the channel input.
pub const GAIN_DB_SPAN: f64 = 20.0;

/// Maps raw observations to network inputs of order one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateNormalizer {
    pub mean_ul: f64,
    pub mean_dl: f64,
    /// Linear gain mapped to zero on the channel input.
    pub gain_reference: f64,
}

impl StateNormalizer {
    pub fn new(traffic: &TrafficParams, gain_reference: f64) -> Result<Self> {
        if !(gain_reference > 0.0 && gain_reference.is_finite()) {
            return Err(Error::InvalidParam("gain_reference must be positive".into()));
        }
        Ok(Self { mean_ul: traffic.mean_ul(), mean_dl: traffic.mean_dl(), gain_reference })
    }

    pub fn normalize(&self, raw: &EnvState) -> [f64; STATE_DIM] {
        [
            raw.d_ul / self.mean_ul,
            raw.d_dl / self.mean_dl,
            10.0 * (raw.h / self.gain_reference).log10() / GAIN_DB_SPAN,
        ]
    }
}

/// Frame sizes over their means; channel in dB relative to `gain_reference`,
/// divided by [`GAIN_DB_SPAN`].
pub fn normalize_state(raw: &EnvState, traffic: &TrafficParams, gain_reference: f64) -> Result<[f64; STATE_DIM]> {
    Ok(StateNormalizer::new(traffic, gain_reference)?.normalize(raw))
}

/// Anything the agent can be trained against.
pub trait Environment {
    fn n_actions(&self) -> usize;
    /// Normalized observation, `None` when the episode is over.
    fn observe(&self) -> Option<[f64; STATE_DIM]>;
    /// Returns `(reward, done)`.
    fn step(&mut self, action: usize) -> Result<(f64, bool)>;
}

/// An [`XrEnv`] seen through an action grid and a state normalizer.
#[derive(Debug, Clone)]
pub struct NormalizedEnv {
    pub env: XrEnv,
    pub grid: ActionGrid,
    pub normalizer: StateNormalizer,
}

impl Environment for NormalizedEnv {
    fn n_actions(&self) -> usize {
        self.grid.len()
    }

    fn observe(&self) -> Option<[f64; STATE_DIM]> {
        self.env.observe().map(|s| self.normalizer.normalize(&s))
    }

    fn step(&mut self, action: usize) -> Result<(f64, bool)> {
        let a = *self
            .grid
            .get(action)
            .ok_or_else(|| Error::InvalidAction(format!("index {action} outside grid")))?;
        let step = self.env.step(&a)?;
        Ok((step.reward, step.done))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub target_sync_steps: u64,
    pub episodes: usize,
    /// Frames per training episode.
    pub episode_frames: usize,
    /// Environment steps between gradient steps.
    pub train_every: u64,
    /// Scale of the initial output weights relative to a uniform fan-in init.
    pub output_init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 64,
            learning_rate: 1e-3,
            gamma: 0.9,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 5_000,
            replay_capacity: 10_000,
            batch_size: 64,
            target_sync_steps: 250,
            episodes: 200,
            episode_frames: 100,
            train_every: 1,
            output_init_scale: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParam(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        let eps_ok = |e: f64| (0.0..=1.0).contains(&e);
        if !(eps_ok(self.epsilon_start) && eps_ok(self.epsilon_end)) {
            return Err(Error::InvalidParam("epsilon values must lie in [0, 1]".into()));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return Err(Error::InvalidParam("replay capacity must hold at least one batch".into()));
        }
        if self.hidden_dim == 0 || self.episodes == 0 || self.episode_frames == 0 {
            return Err(Error::InvalidParam("hidden_dim, episodes and episode_frames must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || self.train_every == 0 || self.target_sync_steps == 0 {
            return Err(Error::InvalidParam("learning_rate, train_every and target_sync_steps must be positive".into()));
        }
        Ok(())
    }

    /// Linear decay from `epsilon_start` to `epsilon_end`.
    pub fn epsilon_at(&self, step: u64) -> f64 {
        if step >= self.epsilon_decay_steps {
            return self.epsilon_end;
        }
        let frac = step as f64 / self.epsilon_decay_steps as f64;
        self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)
    }
}

/// Epsilon-greedy choice; greedy ties go to the lowest index.
pub fn select_action(net: &QNetwork, state: &[f64; STATE_DIM], epsilon: f64, rng: &mut ChaCha8Rng) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..net.actions)
    } else {
        net.argmax(state)
    }
}

/// Online network, target network and optimizer state.
#[derive(Debug, Clone)]
pub struct Agent {
    pub net: QNetwork,
    pub target: QNetwork,
    optimizer: Adam,
    grad: Gradient,
    gamma: f64,
}

impl Agent {
    pub fn new(net: QNetwork, cfg: &TrainConfig) -> Self {
        Self {
            target: net.clone(),
            optimizer: Adam::new(&net, cfg.learning_rate),
            grad: Gradient::default(),
            gamma: cfg.gamma,
            net,
        }
    }

    /// One Adam step on the mean squared TD error; returns the pre-step loss.
    pub fn train_step(&mut self, batch: &[Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidParam("empty training batch".into()));
        }
        let targets = QNetwork::td_targets(&self.target, batch, self.gamma);
        let loss = self.net.loss_and_gradient(batch, &targets, &mut self.grad);
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("non-finite loss {loss}")));
        }
        self.optimizer.step(&mut self.net, &self.grad);
        // only the hidden layer and the touched output rows moved
        if !self.net.rows_finite(self.grad.touched_rows()) {
            return Err(Error::Divergence(format!("non-finite parameters after loss {loss}")));
        }
        Ok(loss)
    }

    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.net);
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: QNetwork,
    /// Mean per-step reward of each training episode.
    pub curve: Vec<f64>,
    pub steps: u64,
}

/// Trains a fresh network; `make_env(episode)` supplies each episode.
pub fn train<E, F>(mut make_env: F, cfg: &TrainConfig) -> Result<TrainOutcome>
where
    E: Environment,
    F: FnMut(usize) -> Result<E>,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut agent: Option<Agent> = None;
    let mut replay = ReplayBuffer::new(cfg.replay_capacity);
    let mut batch = Vec::with_capacity(cfg.batch_size);
    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut steps = 0u64;

    for episode in 0..cfg.episodes {
        let mut env = make_env(episode)?;
        let agent = agent.get_or_insert_with(|| {
            let net = QNetwork::random(cfg.hidden_dim, env.n_actions(), cfg.output_init_scale, &mut rng);
            Agent::new(net, cfg)
        });
        if env.n_actions() != agent.net.actions {
            return Err(Error::InvalidParam("environments disagree on the number of actions".into()));
        }

        let mut total = 0.0;
        let mut n = 0usize;
        let mut state = env.observe().ok_or_else(|| Error::InvalidParam("empty episode".into()))?;
        loop {
            let action = select_action(&agent.net, &state, cfg.epsilon_at(steps), &mut rng);
            let (reward, done) = env.step(action)?;
            let next = if done { None } else { env.observe() };
            replay.push(Transition {
                state,
                action,
                reward,
                next_state: next.unwrap_or(state),
                terminal: done,
            });
            total += reward;
            n += 1;
            steps += 1;

            if replay.len() >= cfg.batch_size && steps.is_multiple_of(cfg.train_every) {
                replay.sample_into(cfg.batch_size, &mut rng, &mut batch);
                agent.train_step(&batch).map_err(|e| match e {
                    Error::Divergence(msg) => {
                        Error::Divergence(format!("{msg} (episode {episode}, step {steps})"))
                    }
                    other => other,
                })?;
            }
            if steps.is_multiple_of(cfg.target_sync_steps) {
                agent.sync_target();
            }
            match next {
                Some(s) => state = s,
                None => break,
            }
        }
        curve.push(total / n as f64);
    }

    let net = agent.map(|a| a.net).expect("at least one episode");
    Ok(TrainOutcome { net, curve, steps })
}

/// Greedy policy backed by a trained network.
#[derive(Debug, Clone)]
pub struct DqnPolicy {
    name: String,
    pub net: QNetwork,
    grid: ActionGrid,
    pub normalizer: StateNormalizer,
}

impl DqnPolicy {
    pub fn new(name: impl Into<String>, net: QNetwork, grid: ActionGrid, normalizer: StateNormalizer) -> Result<Self> {
        if net.actions != grid.len() {
            return Err(Error::InvalidParam(format!(
                "network scores {} actions but the grid has {}",
                net.actions,
                grid.len()
            )));
        }
        Ok(Self { name: name.into(), net, grid, normalizer })
    }

    pub fn act(&self, state: &EnvState) -> Action {
        self.grid.actions()[self.net.argmax(&self.normalizer.normalize(state))]
    }
}

impl Policy for DqnPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn grid(&self) -> &ActionGrid {
        &self.grid
    }

    fn decide(&mut self, view: &FrameView<'_>) -> Result<Action> {
        Ok(self.act(&view.state))
    }
}

pub const CHECKPOINT_FORMAT: &str = "xrslot-qnet-v1";

/// Portable model file: dimensions, parameters, normalizer, grid and the
/// training configuration (seed included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub alpha_values: Vec<f64>,
    pub slots_per_frame: u32,
    pub window: usize,
    pub normalizer: StateNormalizer,
    pub train: TrainConfig,
    pub network: QNetwork,
}

impl Checkpoint {
    pub fn new(policy: &DqnPolicy, window: usize, train: TrainConfig) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            input_dim: STATE_DIM,
            hidden_dim: policy.net.hidden,
            output_dim: policy.net.actions,
            alpha_values: policy.grid.alpha_values().to_vec(),
            slots_per_frame: policy.grid.slots_per_frame(),
            window,
            normalizer: policy.normalizer,
            train,
            network: policy.net.clone(),
        }
    }

    pub fn into_policy(self, name: impl Into<String>) -> Result<DqnPolicy> {
        let grid = ActionGrid::new(self.alpha_values, self.slots_per_frame)?;
        DqnPolicy::new(name, self.network, grid, self.normalizer)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let ck: Self = serde_json::from_str(&text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Config(format!("unknown checkpoint format {:?}", ck.format)));
        }
        let net = &ck.network;
        let consistent = ck.input_dim == STATE_DIM
            && net.hidden == ck.hidden_dim
            && net.actions == ck.output_dim
            && net.w1.len() == ck.hidden_dim * STATE_DIM
            && net.b1.len() == ck.hidden_dim
            && net.w2.len() == ck.hidden_dim * ck.output_dim
            && net.b2.len() == ck.output_dim;
        if !consistent {
            return Err(Error::Config(format!("{}: parameter shapes do not match dimensions", path.display())));
        }
        Ok(ck)
    }
}

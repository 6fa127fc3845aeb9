//! The discrete action lattice and the non-learning policies over it.

use serde::{Deserialize, Serialize};

use crate::env::{reward, EnvState, RewardParams};
use crate::error::{Error, Result};
use crate::framemodel::{simulate_frame, Action, SlotConfig};
use crate::params::SystemParams;
use crate::traffic::FramePair;

pub const DEFAULT_ALPHAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Every valid `(n_ul, n_dl, alpha)` combination, in lexicographic order of
/// `(n_ul, n_dl, alpha_index)`. Index order doubles as the tie-break order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionGrid {
    alpha_values: Vec<f64>,
    slots_per_frame: u32,
    actions: Vec<Action>,
}

impl ActionGrid {
    /// Grid over arbitrary offload ratios (ascending, within `[0, 1]`).
    pub fn new(alpha_values: Vec<f64>, slots_per_frame: u32) -> Result<Self> {
        if alpha_values.is_empty() {
            return Err(Error::InvalidParam("action grid needs at least one offload ratio".into()));
        }
        if alpha_values.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidParam("offload ratios must lie in [0, 1]".into()));
        }
        if alpha_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParam("offload ratios must be strictly ascending".into()));
        }
        if slots_per_frame < 1 {
            return Err(Error::InvalidParam("slots_per_frame must be positive".into()));
        }
        let mut actions = Vec::new();
        for n_ul in 1..=slots_per_frame {
            for n_dl in 0..=(slots_per_frame - n_ul) {
                for (alpha_index, &alpha) in alpha_values.iter().enumerate() {
                    actions.push(Action { n_ul, n_dl, alpha_index, alpha });
                }
            }
        }
        Ok(Self { alpha_values, slots_per_frame, actions })
    }

    /// The partial-offloading grid; must include both extremes.
    pub fn partial(alpha_values: Vec<f64>, slots_per_frame: u32) -> Result<Self> {
        if !(alpha_values.contains(&0.0) && alpha_values.contains(&1.0)) {
            return Err(Error::InvalidParam("partial-offloading grid must contain 0 and 1".into()));
        }
        Self::new(alpha_values, slots_per_frame)
    }

    /// Slot splits only, with the offload ratio pinned.
    pub fn fixed(alpha: f64, slots_per_frame: u32) -> Result<Self> {
        Self::new(vec![alpha], slots_per_frame)
    }

    pub fn default_for(slots: &SlotConfig) -> Self {
        Self::partial(DEFAULT_ALPHAS.to_vec(), slots.slots_per_frame).expect("default grid is valid")
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn get(&self, index: usize) -> Option<&Action> {
        self.actions.get(index)
    }

    pub fn alpha_values(&self) -> &[f64] {
        &self.alpha_values
    }

    pub fn slots_per_frame(&self) -> u32 {
        self.slots_per_frame
    }

    /// Index of `action` in the grid, if present.
    pub fn index_of(&self, action: &Action) -> Option<usize> {
        self.actions.iter().position(|a| {
            a.n_ul == action.n_ul && a.n_dl == action.n_dl && a.alpha_index == action.alpha_index
        })
    }
}

/// What a policy may look at when deciding for one frame.
///
/// `frame` and `slice` are the ground truth of the coming frame interval;
/// learning policies only use `state`.
#[derive(Debug, Clone, Copy)]
pub struct FrameView<'a> {
    pub state: EnvState,
    pub frame: &'a FramePair,
    pub slice: &'a [f64],
    pub params: &'a SystemParams,
    pub reward: &'a RewardParams,
}

pub trait Policy {
    fn name(&self) -> &str;
    fn grid(&self) -> &ActionGrid;
    fn decide(&mut self, view: &FrameView<'_>) -> Result<Action>;
}

/// Per-frame argmax of the reward over the whole grid with full knowledge of
/// the coming channel. Ties go to the lowest grid index.
pub fn greedy_oracle(
    frame: &FramePair,
    slice: &[f64],
    params: &SystemParams,
    grid: &ActionGrid,
    rp: &RewardParams,
) -> Result<(Action, f64)> {
    let mut best: Option<(Action, f64)> = None;
    for action in grid.actions() {
        let outcome = simulate_frame(frame, action, slice, params)?;
        let r = reward(&outcome, rp);
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((*action, r));
        }
    }
    best.ok_or_else(|| Error::InvalidParam("empty action grid".into()))
}

/// Full-knowledge greedy policy. With a fixed-ratio grid this is the cheap,
/// non-learning always/never-offload baseline.
#[derive(Debug, Clone)]
pub struct OraclePolicy {
    name: String,
    grid: ActionGrid,
}

impl OraclePolicy {
    pub fn new(name: impl Into<String>, grid: ActionGrid) -> Self {
        Self { name: name.into(), grid }
    }
}

impl Policy for OraclePolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn grid(&self) -> &ActionGrid {
        &self.grid
    }

    fn decide(&mut self, view: &FrameView<'_>) -> Result<Action> {
        greedy_oracle(view.frame, view.slice, view.params, &self.grid, view.reward).map(|(a, _)| a)
    }
}

/// Always the same action.
#[derive(Debug, Clone)]
pub struct ConstantPolicy {
    name: String,
    grid: ActionGrid,
    index: usize,
}

impl ConstantPolicy {
    pub fn new(name: impl Into<String>, grid: ActionGrid, index: usize) -> Result<Self> {
        if index >= grid.len() {
            return Err(Error::InvalidAction(format!("index {index} outside grid of {}", grid.len())));
        }
        Ok(Self { name: name.into(), grid, index })
    }
}

impl Policy for ConstantPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn grid(&self) -> &ActionGrid {
        &self.grid
    }

    fn decide(&mut self, _view: &FrameView<'_>) -> Result<Action> {
        Ok(self.grid.actions()[self.index])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::e_max_default;

    fn rp(params: &SystemParams) -> RewardParams {
        RewardParams {
            sigma: 0.7,
            e_max: e_max_default(&params.slots, &params.headset, &params.traffic),
            window: 1,
        }
    }

    #[test]
    fn default_grid_size_and_order() {
        let g = ActionGrid::default_for(&SlotConfig::default());
        // sum_{n_ul=1..16} (17 - n_ul) = 136 splits, 5 ratios each
        assert_eq!(g.len(), 680);
        let keys: Vec<_> = g.actions().iter().map(|a| (a.n_ul, a.n_dl, a.alpha_index)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        for a in g.actions() {
            a.validate(&SlotConfig::default()).unwrap();
        }
    }

    #[test]
    fn partial_grid_requires_extremes() {
        assert!(ActionGrid::partial(vec![0.0, 0.5], 16).is_err());
        assert!(ActionGrid::partial(vec![0.0, 0.5, 1.0], 16).is_ok());
        assert!(ActionGrid::new(vec![0.5, 0.25], 16).is_err());
    }

    #[test]
    fn fixed_grids_pin_alpha() {
        for alpha in [0.0, 1.0] {
            let g = ActionGrid::fixed(alpha, 16).unwrap();
            assert_eq!(g.len(), 136);
            assert!(g.actions().iter().all(|a| a.alpha == alpha));
        }
    }

    #[test]
    fn oracle_on_single_action_grid() {
        let p = SystemParams::default();
        let g = ActionGrid::new(vec![0.5], 2).unwrap();
        let g = ActionGrid { actions: g.actions()[..1].to_vec(), ..g };
        let f = FramePair { frame_index: 0, d_ul: 1e5, d_dl: 4e5 };
        let (a, _) = greedy_oracle(&f, &[1e-10; 16], &p, &g, &rp(&p)).unwrap();
        assert_eq!((a.n_ul, a.n_dl, a.alpha), (1, 0, 0.5));
    }

    #[test]
    fn oracle_toy_grid_by_hand() {
        // Three actions at a very strong channel: every frame is delivered, so the
        // reward ordering is the energy ordering.
        //   (1,0,a=0): 1 ms UL at 0.05 W + 466667/200e6 s local at 0.5 W
        //   (1,2,a=1): 1 ms UL at 0.05 W + 2 DL slots at 0.3 W + decode
        //   (2,1,a=1): 2 ms UL at 0.05 W + 1 DL slot at 0.3 W + decode  <- cheapest
        let p = SystemParams { traffic: Default::default(), ..Default::default() };
        let rp = rp(&p);
        let f = FramePair { frame_index: 0, d_ul: 141_667.0, d_dl: 466_667.0 };
        let slice = [1e-3; 16];
        let full = ActionGrid::new(vec![0.0, 1.0], 16).unwrap();
        let pick = |n_ul, n_dl, ai| {
            *full.actions().iter().find(|a| (a.n_ul, a.n_dl, a.alpha_index) == (n_ul, n_dl, ai)).unwrap()
        };
        let toy = ActionGrid {
            actions: vec![pick(1, 0, 0), pick(1, 2, 1), pick(2, 1, 1)],
            ..full
        };
        let e_loc = 466_667.0 / 200e6 * 0.5;
        let e_dec = 466_667.0 / 3e9 * 0.1;
        let e = [1e-3 * 0.05 + e_loc, 1e-3 * 0.05 + 2e-3 * 0.3 + e_dec, 2e-3 * 0.05 + 1e-3 * 0.3 + e_dec];
        let hand: Vec<f64> = e.iter().map(|e| -(1.0 - 0.7) * e / rp.e_max).collect();
        assert!(hand[2] > hand[0] && hand[2] > hand[1]);
        let (a, r) = greedy_oracle(&f, &slice, &p, &toy, &rp).unwrap();
        assert_eq!((a.n_ul, a.n_dl, a.alpha), (2, 1, 1.0));
        assert!((r - hand[2]).abs() < 1e-12, "{r} vs {}", hand[2]);
    }

    #[test]
    fn oracle_ties_break_to_lowest_index() {
        let p = SystemParams::default();
        // sigma = 1: energy is ignored and every delivering action ties at 0
        let rp = RewardParams { sigma: 1.0, ..rp(&p) };
        let g = ActionGrid::default_for(&p.slots);
        let f = FramePair { frame_index: 0, d_ul: 1.0, d_dl: 1.0 };
        let (a, r) = greedy_oracle(&f, &[1e-3; 16], &p, &g, &rp).unwrap();
        assert_eq!(r, 0.0);
        assert_eq!((a.n_ul, a.n_dl, a.alpha_index), (1, 0, 0));
    }
}

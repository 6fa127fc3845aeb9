//! Slot-level simulation of an XR headset served by one base station under
//! TDD, with joint UL/DL slot allocation and partial edge offloading.
//!
//! The crate is layered bottom-up:
//!
//! - [`channel`]: per-slot channel gains (UMa NLOS path loss, shadowing,
//!   correlated Rayleigh fading).
//! - [`traffic`]: truncated-Gaussian UL/DL frame sizes.
//! - [`framemodel`]: rates, latencies, energies and frame-loss indicators of
//!   one frame interval.
//! - [`policies`]: the action lattice, the full-knowledge greedy oracle and
//!   fixed baselines.
//! - [`env`]: the episode engine and reward.
//! - [`dqn`]: the deep Q-learning agent.
//! - [`harness`]: sweeps, metrics and result files.

pub mod channel;
pub mod dqn;
pub mod env;
pub mod error;
pub mod framemodel;
pub mod harness;
pub mod params;
pub mod policies;
pub mod seed;
pub mod traffic;

pub use error::{Error, Result};
pub use params::SystemParams;

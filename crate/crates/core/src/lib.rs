//! Online safe learning in episodic two-player zero-sum constrained Markov
//! games with unknown, independent transitions.
//!
//! The learner runs optimistic mirror descent on occupancy measures: each
//! episode both players tilt their previous occupancy by a Lagrangian loss,
//! project it onto the set of occupancies consistent with an L1 confidence
//! ball around their empirical transition kernel, and play the induced
//! policy. A shared multiplier accumulates violations of the coupled utility
//! budget.
//!
//! Modules, bottom-up:
//!
//! * [`space`]: layered state spaces, kernels, policies, dense tables
//! * [`game`]: environments, reward/utility processes, trajectory sampling
//! * [`occupancy`]: occupancy measures and the value functionals
//! * [`confidence`]: epoch counters and the optimistic occupancy domain
//! * [`optimizer`]: mixing, exponential tilt, KL projection through its dual
//! * [`lagrangian`]: the episode loop and multiplier updates
//! * [`hindsight`]: the constrained saddle-point comparator
//! * [`metrics`]: regret, violation, decomposition, rate fits
//! * [`harness`]: configs, file formats and the CLI commands

pub mod confidence;
pub mod error;
pub mod game;
pub mod harness;
pub mod hindsight;
pub mod lagrangian;
pub mod metrics;
pub mod occupancy;
pub mod optimizer;
pub mod space;

pub use error::{Error, Result};
pub use space::{Kernel, LayeredSpace, Policy, RewardTable, StateActionTable};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

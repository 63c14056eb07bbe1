//! Bandit-style wireless network selection policies and a deterministic
//! multi-device congestion-game simulator.
//!
//! Devices repeatedly pick one of several shared networks; a network's
//! bandwidth splits equally among its occupants and changing networks costs
//! a switching delay. The crate provides:
//!
//! - the full roster of selection policies behind one trait: per-slot and
//!   block-based exponential-weight learners (with the greedy, switch-back
//!   and minimal-reset mechanisms toggleable), plus greedy, full-information,
//!   centralized and fixed-random baselines;
//! - a slotted simulation engine with population events, availability
//!   changes, trace playback, and bit-reproducible seeded batches;
//! - evaluation metrics (Nash equilibria, distance to equilibrium, stable
//!   state, fairness, unutilized capacity) and closed-form switch/regret
//!   upper bounds with per-run dominance checks.

pub mod bounds;
pub mod engine;
pub mod environment;
pub mod metrics;
pub mod policies;
pub mod presets;
pub mod scenario;
pub mod smart;
pub mod types;

pub use engine::{run_batch, run_simulation, RunResult, SlotRecord};
pub use policies::{PolicyKind, SelectionPolicy};
pub use scenario::Scenario;
pub use smart::{SmartConfig, SmartExp3, SmartFeatures};
pub use types::{
    scale_gain, Decision, DecisionKind, Error, GammaIndexing, GammaSchedule, NetworkId,
    PolicyParams, ProbabilityDistribution, Result, ScaledGain, SimulationClock,
};

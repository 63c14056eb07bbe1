//! Shared vocabulary: network identifiers, gains, probability distributions
//! and the per-decision bookkeeping used by every selection policy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("end of trace reached at slot {0}")]
    EndOfTrace(u64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Index of a network within a scenario's network list.
///
/// Stable for the whole run; availability of a network to a given device may
/// change, its id never does.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct NetworkId(pub usize);

impl std::fmt::Display for NetworkId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which counter the exploration-rate schedule is evaluated on.
///
/// Block-based policies default to the block index; the per-slot variant is
/// exposed for experimentation since both readings appear in practice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GammaIndexing {
    #[default]
    Block,
    Slot,
}

/// Exploration-rate schedule: maps a one-based decision index to a rate in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GammaSchedule {
    /// `index^(-1/3)`; equals 1 at index 1 and tends to zero.
    #[default]
    InverseCubeRoot,
    /// A fixed rate in (0, 1].
    Fixed(f64),
}

impl GammaSchedule {
    /// Rate for a one-based index. Always in (0, 1] for `index >= 1`.
    pub fn rate(&self, index: u64) -> f64 {
        match self {
            GammaSchedule::InverseCubeRoot => (index.max(1) as f64).powf(-1.0 / 3.0),
            GammaSchedule::Fixed(g) => *g,
        }
    }
}

/// Learner parameters shared by the block-based policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    /// Block-growth rate in (0, 1].
    pub beta: f64,
    /// Exploration-rate schedule.
    pub gamma: GammaSchedule,
    /// Counter the schedule runs on.
    pub gamma_indexing: GammaIndexing,
    /// Duration of one time slot in seconds.
    pub slot_seconds: f64,
    /// Divisor mapping a bit rate in Mbps to a gain in [0, 1].
    pub gain_scale_mbps: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            beta: 0.1,
            gamma: GammaSchedule::InverseCubeRoot,
            gamma_indexing: GammaIndexing::Block,
            slot_seconds: 15.0,
            gain_scale_mbps: 1.0,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!(
                "beta must be in (0, 1], got {}",
                self.beta
            )));
        }
        if let GammaSchedule::Fixed(g) = self.gamma {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::Config(format!("gamma must be in (0, 1], got {g}")));
            }
        }
        if !(self.slot_seconds > 0.0) {
            return Err(Error::Config(format!(
                "slot_seconds must be positive, got {}",
                self.slot_seconds
            )));
        }
        if !(self.gain_scale_mbps > 0.0) {
            return Err(Error::Config(format!(
                "gain_scale_mbps must be positive, got {}",
                self.gain_scale_mbps
            )));
        }
        Ok(())
    }
}

/// A per-slot gain in [0, 1]: observed bit rate divided by the gain scale,
/// clamped at 1 so that trace data exceeding nominal bandwidth stays legal.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ScaledGain(f64);

impl ScaledGain {
    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Maps a bit rate to a gain in [0, 1].
///
/// Monotone non-decreasing in `bit_rate_mbps`; values above the scale clamp
/// to 1 rather than erroring.
pub fn scale_gain(bit_rate_mbps: f64, gain_scale_mbps: f64) -> Result<ScaledGain> {
    if !bit_rate_mbps.is_finite() || !gain_scale_mbps.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite gain inputs: bit_rate={bit_rate_mbps}, scale={gain_scale_mbps}"
        )));
    }
    if bit_rate_mbps < 0.0 {
        return Err(Error::InvalidInput(format!(
            "negative bit rate: {bit_rate_mbps}"
        )));
    }
    if gain_scale_mbps <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "gain scale must be positive: {gain_scale_mbps}"
        )));
    }
    Ok(ScaledGain((bit_rate_mbps / gain_scale_mbps).min(1.0)))
}

/// Tolerance on the sum of a probability distribution.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// A validated probability distribution over the available networks.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityDistribution {
    probs: Vec<f64>,
}

impl ProbabilityDistribution {
    /// Validates that every entry is in [0, 1] and the total is 1 within
    /// [`PROB_SUM_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidState("empty probability distribution".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "probabilities sum to {sum}, expected 1 within {PROB_SUM_TOLERANCE}"
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::InvalidState(format!(
                "probability outside [0, 1]: {probs:?}"
            )));
        }
        Ok(ProbabilityDistribution { probs })
    }

    pub fn values(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    /// Index of the largest probability, ties to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate().skip(1) {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// `max(p) - min(p)`, the spread used by the greedy-eligibility rule.
    pub fn spread(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &p in &self.probs {
            lo = lo.min(p);
            hi = hi.max(p);
        }
        hi - lo
    }
}

/// How a block's network was chosen; fixes the bookkeeping probability
/// used to form the unbiased gain estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionKind {
    InitialExploration,
    Random,
    Greedy,
    SwitchBack,
}

impl DecisionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DecisionKind::InitialExploration => "initial-exploration",
            DecisionKind::Random => "random",
            DecisionKind::Greedy => "greedy",
            DecisionKind::SwitchBack => "switch-back",
        }
    }
}

/// One selection decision: the chosen network, the probability with which it
/// was chosen, and the selection mode that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub network: NetworkId,
    /// Probability with which `network` was chosen, in (0, 1].
    pub selection_probability: f64,
    pub kind: DecisionKind,
    /// One-based index of the decision epoch (block) this slot belongs to.
    pub block_index: u64,
}

/// Slotted simulation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationClock {
    /// Current slot, in `[0, horizon)`.
    pub slot: u64,
    /// Number of slots in the run.
    pub horizon: u64,
    /// Seconds per slot.
    pub slot_seconds: f64,
}

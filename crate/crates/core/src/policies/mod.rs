//! Selection policies behind one per-slot interface: decide, observe, adapt
//! to network-set changes.
//!
//! The exponential-weight machinery shared by the EXP3 family lives here as
//! free functions so that every variant uses the exact same arithmetic.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::types::{Decision, Error, NetworkId, ProbabilityDistribution, Result, ScaledGain};

mod block_exp3;
mod centralized;
mod exp3;
mod fixed_random;
mod full_information;
mod greedy;

pub use block_exp3::BlockExp3;
pub use centralized::{centralized_allocate, Centralized};
pub use exp3::Exp3;
pub use fixed_random::FixedRandom;
pub use full_information::FullInformation;
pub use greedy::GreedyBaseline;

/// Per-device selection policy. The engine calls `decide` exactly once per
/// slot and `observe` exactly once after each decide.
pub trait SelectionPolicy: Send {
    /// Chooses (or keeps) the network for the current slot.
    fn decide(&mut self, rng: &mut dyn RngCore) -> Result<Decision>;

    /// Feeds back the scaled gain observed on the chosen network.
    ///
    /// `all_gains` carries the per-network gains the device could have
    /// observed this slot; only full-feedback policies consume it.
    fn observe(&mut self, gain: ScaledGain, all_gains: Option<&[ScaledGain]>) -> Result<()>;

    /// Reacts to networks appearing or disappearing from the device's view.
    fn on_network_set_change(&mut self, added: &[NetworkId], removed: &[NetworkId]) -> Result<()>;

    /// Highest-probability network and its probability, for stable-state
    /// detection. `None` for policies without a probability distribution.
    fn probability_top(&self) -> Option<(NetworkId, f64)>;

    /// Number of resets performed so far.
    fn reset_count(&self) -> u64 {
        0
    }

    /// Largest block length assigned so far (1 for per-slot policies).
    fn max_assigned_block_length(&self) -> u64 {
        1
    }
}

/// The selection algorithms a scenario can assign to a device group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Exp3,
    BlockExp3,
    HybridBlockExp3,
    SmartExp3,
    SmartExp3NoReset,
    Greedy,
    FullInformation,
    Centralized,
    FixedRandom,
}

impl PolicyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Exp3 => "exp3",
            PolicyKind::BlockExp3 => "block_exp3",
            PolicyKind::HybridBlockExp3 => "hybrid_block_exp3",
            PolicyKind::SmartExp3 => "smart_exp3",
            PolicyKind::SmartExp3NoReset => "smart_exp3_no_reset",
            PolicyKind::Greedy => "greedy",
            PolicyKind::FullInformation => "full_information",
            PolicyKind::Centralized => "centralized",
            PolicyKind::FixedRandom => "fixed_random",
        }
    }
}

/// Mixes the normalized weights with a uniform distribution:
/// `p_i = (1 - gamma) * w_i / sum(w) + gamma / k`.
///
/// Weights are normalized by their maximum before summing, which leaves the
/// result unchanged (the rule is scale-invariant) and keeps the sum finite
/// for arbitrarily large weights.
pub fn probability_update(weights: &[f64], gamma: f64) -> Result<ProbabilityDistribution> {
    if weights.is_empty() {
        return Err(Error::InvalidState(
            "no networks to distribute probability over".into(),
        ));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidInput(format!(
            "gamma must be in [0, 1], got {gamma}"
        )));
    }
    let mut max = 0.0f64;
    for &w in weights {
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::InvalidState(format!(
                "weight must be positive and finite: {w}"
            )));
        }
        max = max.max(w);
    }
    let k = weights.len() as f64;
    let sum: f64 = weights.iter().map(|w| w / max).sum();
    let probs = weights
        .iter()
        .map(|w| (1.0 - gamma) * ((w / max) / sum) + gamma / k)
        .collect();
    ProbabilityDistribution::new(probs)
}

/// Multiplies the chosen network's weight by `exp(gamma * (gain / p_bar) / k)`,
/// leaving every other weight untouched.
///
/// On overflow all weights are first divided by the current maximum and the
/// update retried; the probability rule's output is unchanged by that
/// rescaling.
pub fn weight_update(
    weights: &mut [f64],
    chosen: usize,
    gain: f64,
    p_bar: f64,
    gamma: f64,
    k: usize,
) -> Result<()> {
    if !(p_bar > 0.0 && p_bar <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "p_bar must be in (0, 1], got {p_bar}"
        )));
    }
    if !gain.is_finite() || gain < 0.0 {
        return Err(Error::InvalidInput(format!(
            "gain must be finite and >= 0, got {gain}"
        )));
    }
    let estimated = gain / p_bar;
    let multiplier = (gamma * estimated / k as f64).exp();
    let updated = weights[chosen] * multiplier;
    if updated.is_finite() {
        weights[chosen] = updated;
    } else {
        let max = weights.iter().copied().fold(0.0f64, f64::max);
        for w in weights.iter_mut() {
            *w /= max;
        }
        let retried = weights[chosen] * multiplier;
        weights[chosen] = if retried.is_finite() {
            retried
        } else {
            f64::MAX
        };
    }
    Ok(())
}

/// Cap on block lengths; lengths that would exceed it saturate here.
pub const MAX_BLOCK_LENGTH: u64 = 1 << 53;

/// Block length after `x` prior selections: `ceil((1 + beta)^x)`, saturating
/// at [`MAX_BLOCK_LENGTH`].
pub fn block_length(x: u64, beta: f64) -> u64 {
    let raw = (1.0 + beta).powf(x as f64);
    if !raw.is_finite() || raw >= MAX_BLOCK_LENGTH as f64 {
        return MAX_BLOCK_LENGTH;
    }
    raw.ceil() as u64
}

/// Draws an index from a categorical distribution using a single uniform
/// variate, so different policies sharing one stream stay comparable.
pub fn sample_categorical(probs: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Uniform draw from `0..len`.
pub(crate) fn sample_uniform_index(len: usize, rng: &mut dyn RngCore) -> usize {
    rng.random_range(0..len)
}

/// Argmax over per-network means with ties broken toward the lowest index.
pub(crate) fn argmax_mean(total_gain: &[f64], samples: &[u64]) -> usize {
    let mut best = 0;
    let mut best_mean = f64::NEG_INFINITY;
    for i in 0..total_gain.len() {
        let mean = if samples[i] == 0 {
            f64::NEG_INFINITY
        } else {
            total_gain[i] / samples[i] as f64
        };
        if mean > best_mean {
            best_mean = mean;
            best = i;
        }
    }
    best
}

/// Weight assigned to a newly discovered network: the maximum weight among
/// the networks already known, or 1 if none remain.
pub(crate) fn joining_weight(existing: &[f64]) -> f64 {
    let max = existing.iter().copied().fold(0.0f64, f64::max);
    if max > 0.0 {
        max
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn probability_update_uniform_weights() {
        let p = probability_update(&[1.0, 1.0, 1.0], 0.3).unwrap();
        for &v in p.values() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn probability_update_pure_normalization_at_gamma_zero() {
        let p = probability_update(&[2.0, 1.0, 1.0], 0.0).unwrap();
        assert!((p.get(0) - 0.5).abs() < 1e-12);
        assert!((p.get(1) - 0.25).abs() < 1e-12);
        assert!((p.get(2) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn probability_update_hand_example() {
        let p = probability_update(&[3.0, 1.0], 0.5).unwrap();
        assert!((p.get(0) - 0.625).abs() < 1e-12);
        assert!((p.get(1) - 0.375).abs() < 1e-12);
    }

    #[test]
    fn probability_update_rejects_bad_weights() {
        assert!(probability_update(&[0.0, 1.0], 0.3).is_err());
        assert!(probability_update(&[-1.0, 1.0], 0.3).is_err());
        assert!(probability_update(&[f64::NAN, 1.0], 0.3).is_err());
        assert!(probability_update(&[], 0.3).is_err());
    }

    #[test]
    fn weight_update_zero_gain_is_identity() {
        let mut w = vec![1.5, 2.5];
        weight_update(&mut w, 0, 0.0, 0.5, 0.3, 2).unwrap();
        assert_eq!(w, vec![1.5, 2.5]);
    }

    #[test]
    fn weight_update_hand_example() {
        let mut w = vec![1.0, 1.0, 1.0];
        weight_update(&mut w, 0, 1.0, 1.0, 0.3, 3).unwrap();
        assert!((w[0] - 1.1051709180756477).abs() < 1e-15);
        assert_eq!(w[1], 1.0);
        assert_eq!(w[2], 1.0);
    }

    #[test]
    fn weight_update_ratio_identity() {
        let mut a = vec![1.0, 1.0];
        let mut b = vec![1.0, 1.0];
        weight_update(&mut a, 0, 0.5, 0.5, 0.3, 2).unwrap();
        weight_update(&mut b, 0, 1.0, 1.0, 0.3, 2).unwrap();
        assert_eq!(a[0], b[0]);
    }

    #[test]
    fn weight_update_rejects_bad_inputs() {
        let mut w = vec![1.0];
        assert!(weight_update(&mut w, 0, 1.0, 0.0, 0.3, 1).is_err());
        assert!(weight_update(&mut w, 0, 1.0, 1.5, 0.3, 1).is_err());
        assert!(weight_update(&mut w, 0, -1.0, 1.0, 0.3, 1).is_err());
    }

    #[test]
    fn weight_update_overflow_renormalizes() {
        let mut w = vec![1e300, 1e280];
        // multiplier around e^200 pushes the first weight past f64::MAX
        weight_update(&mut w, 0, 600.0, 1.0, 1.0, 3).unwrap();
        assert!(w.iter().all(|x| x.is_finite() && *x > 0.0));
        // renormalization happened: second weight scaled down by 1e300
        assert!((w[1] - 1e-20).abs() < 1e-32);
        let p = probability_update(&w, 0.1).unwrap();
        assert!(p.get(0) > p.get(1));
    }

    #[test]
    fn block_length_examples() {
        assert_eq!(block_length(0, 0.1), 1);
        assert_eq!(block_length(0, 1.0), 1);
        assert_eq!(block_length(8, 0.1), 3);
        assert_eq!(block_length(3, 1.0), 8);
        assert_eq!(block_length(1, 0.1), 2);
        assert_eq!(block_length(2, 0.1), 2);
    }

    #[test]
    fn block_length_saturates() {
        assert_eq!(block_length(u64::MAX, 1.0), MAX_BLOCK_LENGTH);
        assert_eq!(block_length(10_000, 0.1), MAX_BLOCK_LENGTH);
    }

    #[test]
    fn sample_categorical_point_mass() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..100 {
            assert_eq!(sample_categorical(&[1.0, 0.0, 0.0], &mut rng), 0);
        }
    }

    proptest! {
        // p_i = (1-g) w_i/sum + g/k is invariant under scaling of the weights.
        #[test]
        fn probability_update_scale_invariant(
            w in proptest::collection::vec(0.001f64..1e6, 2..6),
            scale_exp in -40i32..40,
            gamma in 0.0f64..=1.0,
        ) {
            let scale = 2.0f64.powi(scale_exp);
            let scaled: Vec<f64> = w.iter().map(|x| x * scale).collect();
            let p1 = probability_update(&w, gamma).unwrap();
            let p2 = probability_update(&scaled, gamma).unwrap();
            for (a, b) in p1.values().iter().zip(p2.values()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn probability_update_sums_to_one(
            w in proptest::collection::vec(1e-6f64..1e12, 1..6),
            gamma in 0.0f64..=1.0,
        ) {
            let p = probability_update(&w, gamma).unwrap();
            let sum: f64 = p.values().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            let k = w.len() as f64;
            for &v in p.values() {
                prop_assert!(v >= gamma / k - 1e-12);
            }
        }

        #[test]
        fn block_length_monotone_in_x(x in 0u64..200, beta in 0.01f64..=1.0) {
            prop_assert!(block_length(x, beta) <= block_length(x + 1, beta));
            prop_assert!(block_length(x, beta) >= 1);
        }
    }
}

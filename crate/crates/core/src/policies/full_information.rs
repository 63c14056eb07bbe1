//! Full-feedback baseline: draws proportionally to weights and, with the
//! whole gain vector revealed, penalizes every network by its loss.

use rand::RngCore;

use crate::types::{Decision, DecisionKind, Error, NetworkId, Result, ScaledGain};

use super::{joining_weight, sample_categorical, SelectionPolicy};

pub struct FullInformation {
    ids: Vec<NetworkId>,
    weights: Vec<f64>,
    eta: f64,
    decisions: u64,
    pending: bool,
}

impl FullInformation {
    /// The multiplicative-update learning rate; 0.3 unless overridden.
    pub const DEFAULT_ETA: f64 = 0.3;

    pub fn new(available: &[NetworkId], eta: f64) -> Result<Self> {
        if available.is_empty() {
            return Err(Error::InvalidState(
                "policy needs at least one network".into(),
            ));
        }
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::Config(format!("eta must be positive, got {eta}")));
        }
        Ok(FullInformation {
            ids: available.to_vec(),
            weights: vec![1.0; available.len()],
            eta,
            decisions: 0,
            pending: false,
        })
    }

    fn normalized(&self) -> Vec<f64> {
        let sum: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / sum).collect()
    }

    #[cfg(test)]
    pub(crate) fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl SelectionPolicy for FullInformation {
    fn decide(&mut self, rng: &mut dyn RngCore) -> Result<Decision> {
        if self.pending {
            return Err(Error::InvalidState("decide called before observe".into()));
        }
        self.decisions += 1;
        let probs = self.normalized();
        let chosen = sample_categorical(&probs, rng);
        self.pending = true;
        Ok(Decision {
            network: self.ids[chosen],
            selection_probability: probs[chosen],
            kind: DecisionKind::Random,
            block_index: self.decisions,
        })
    }

    fn observe(&mut self, _gain: ScaledGain, all_gains: Option<&[ScaledGain]>) -> Result<()> {
        if !self.pending {
            return Err(Error::InvalidState("observe called before decide".into()));
        }
        self.pending = false;
        let gains = all_gains.ok_or_else(|| {
            Error::InvalidInput("full information policy needs the per-network gain vector".into())
        })?;
        if gains.len() != self.weights.len() {
            return Err(Error::InvalidInput(format!(
                "gain vector has {} entries for {} networks",
                gains.len(),
                self.weights.len()
            )));
        }
        for (w, g) in self.weights.iter_mut().zip(gains) {
            let loss = 1.0 - g.value();
            *w *= (-self.eta * loss).exp();
        }
        // keep the scale pinned: losses only ever shrink the weights
        let max = self.weights.iter().copied().fold(0.0f64, f64::max);
        if max > 0.0 && max.is_finite() {
            for w in self.weights.iter_mut() {
                *w = (*w / max).max(1e-300);
            }
        } else {
            return Err(Error::InvalidState(
                "full information weights degenerated".into(),
            ));
        }
        Ok(())
    }

    fn on_network_set_change(&mut self, added: &[NetworkId], removed: &[NetworkId]) -> Result<()> {
        let mut ids = Vec::new();
        let mut weights = Vec::new();
        for (i, id) in self.ids.iter().enumerate() {
            if !removed.contains(id) {
                ids.push(*id);
                weights.push(self.weights[i]);
            }
        }
        let w_new = joining_weight(&weights);
        for id in added {
            if !ids.contains(id) {
                ids.push(*id);
                weights.push(w_new);
            }
        }
        if ids.is_empty() {
            return Err(Error::InvalidState(
                "network set change left no networks".into(),
            ));
        }
        self.ids = ids;
        self.weights = weights;
        self.pending = false;
        Ok(())
    }

    fn probability_top(&self) -> Option<(NetworkId, f64)> {
        let probs = self.normalized();
        let mut best = 0;
        for i in 1..probs.len() {
            if probs[i] > probs[best] {
                best = i;
            }
        }
        Some((self.ids[best], probs[best]))
    }
}

//! Per-slot exponential-weight selection: one random draw per slot from the
//! mixed distribution, one weight update per observation.

use rand::RngCore;

use crate::types::{Decision, DecisionKind, Error, GammaSchedule, NetworkId, Result, ScaledGain};

use super::{
    joining_weight, probability_update, sample_categorical, weight_update, SelectionPolicy,
};

pub struct Exp3 {
    ids: Vec<NetworkId>,
    weights: Vec<f64>,
    gamma: GammaSchedule,
    slot: u64,
    pending: Option<Pending>,
    top: Option<(NetworkId, f64)>,
}

struct Pending {
    chosen: usize,
    p_bar: f64,
    gamma: f64,
}

impl Exp3 {
    pub fn new(available: &[NetworkId], gamma: GammaSchedule) -> Result<Self> {
        if available.is_empty() {
            return Err(Error::InvalidState(
                "policy needs at least one network".into(),
            ));
        }
        Ok(Exp3 {
            ids: available.to_vec(),
            weights: vec![1.0; available.len()],
            gamma,
            slot: 0,
            pending: None,
            top: None,
        })
    }
}

impl SelectionPolicy for Exp3 {
    fn decide(&mut self, rng: &mut dyn RngCore) -> Result<Decision> {
        if self.pending.is_some() {
            return Err(Error::InvalidState("decide called before observe".into()));
        }
        self.slot += 1;
        let gamma = self.gamma.rate(self.slot);
        let probs = probability_update(&self.weights, gamma)?;
        let chosen = sample_categorical(probs.values(), rng);
        let top = probs.argmax();
        self.top = Some((self.ids[top], probs.get(top)));
        let p_bar = probs.get(chosen);
        self.pending = Some(Pending {
            chosen,
            p_bar,
            gamma,
        });
        Ok(Decision {
            network: self.ids[chosen],
            selection_probability: p_bar,
            kind: DecisionKind::Random,
            block_index: self.slot,
        })
    }

    fn observe(&mut self, gain: ScaledGain, _all_gains: Option<&[ScaledGain]>) -> Result<()> {
        let Pending {
            chosen,
            p_bar,
            gamma,
        } = self
            .pending
            .take()
            .ok_or_else(|| Error::InvalidState("observe called before decide".into()))?;
        let k = self.weights.len();
        weight_update(&mut self.weights, chosen, gain.value(), p_bar, gamma, k)
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
        self.pending = None;
        self.top = None;
        Ok(())
    }

    fn probability_top(&self) -> Option<(NetworkId, f64)> {
        self.top
    }
}

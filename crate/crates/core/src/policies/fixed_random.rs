//! Picks a network uniformly at random on the first slot and stays there.

use rand::RngCore;

use crate::types::{Decision, DecisionKind, Error, NetworkId, Result, ScaledGain};

use super::{sample_uniform_index, SelectionPolicy};

pub struct FixedRandom {
    ids: Vec<NetworkId>,
    chosen: Option<usize>,
    decisions: u64,
}

impl FixedRandom {
    pub fn new(available: &[NetworkId]) -> Result<Self> {
        if available.is_empty() {
            return Err(Error::InvalidState(
                "policy needs at least one network".into(),
            ));
        }
        Ok(FixedRandom {
            ids: available.to_vec(),
            chosen: None,
            decisions: 0,
        })
    }
}

impl SelectionPolicy for FixedRandom {
    fn decide(&mut self, rng: &mut dyn RngCore) -> Result<Decision> {
        self.decisions += 1;
        let (chosen, p_bar) = match self.chosen {
            Some(i) => (i, 1.0),
            None => {
                let i = sample_uniform_index(self.ids.len(), rng);
                self.chosen = Some(i);
                (i, 1.0 / self.ids.len() as f64)
            }
        };
        Ok(Decision {
            network: self.ids[chosen],
            selection_probability: p_bar,
            kind: DecisionKind::Random,
            block_index: 1,
        })
    }

    fn observe(&mut self, _gain: ScaledGain, _all_gains: Option<&[ScaledGain]>) -> Result<()> {
        Ok(())
    }

    fn on_network_set_change(&mut self, added: &[NetworkId], removed: &[NetworkId]) -> Result<()> {
        let kept_id = self.chosen.map(|i| self.ids[i]);
        self.ids.retain(|id| !removed.contains(id));
        for id in added {
            if !self.ids.contains(id) {
                self.ids.push(*id);
            }
        }
        if self.ids.is_empty() {
            return Err(Error::InvalidState(
                "network set change left no networks".into(),
            ));
        }
        self.chosen = kept_id.and_then(|id| self.ids.iter().position(|n| *n == id));
        Ok(())
    }

    fn probability_top(&self) -> Option<(NetworkId, f64)> {
        None
    }
}

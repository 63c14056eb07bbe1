//! Exponential-weight selection over blocks of slots: one random draw per
//! block, the block's accumulated gain fed into a single weight update.

use rand::RngCore;

use crate::types::{
    Decision, DecisionKind, Error, GammaIndexing, NetworkId, PolicyParams, Result, ScaledGain,
};

use super::{
    block_length, joining_weight, probability_update, sample_categorical, weight_update,
    SelectionPolicy,
};

pub struct BlockExp3 {
    ids: Vec<NetworkId>,
    weights: Vec<f64>,
    params: PolicyParams,
    /// Times each network has been selected for a block.
    x: Vec<u64>,
    block_index: u64,
    slots_seen: u64,
    current: Option<Block>,
    top: Option<(NetworkId, f64)>,
    max_block_len: u64,
}

struct Block {
    chosen: usize,
    length: u64,
    elapsed: u64,
    gain_sum: f64,
    p_bar: f64,
    gamma: f64,
}

impl BlockExp3 {
    pub fn new(available: &[NetworkId], params: PolicyParams) -> Result<Self> {
        if available.is_empty() {
            return Err(Error::InvalidState(
                "policy needs at least one network".into(),
            ));
        }
        params.validate()?;
        Ok(BlockExp3 {
            ids: available.to_vec(),
            weights: vec![1.0; available.len()],
            params,
            x: vec![0; available.len()],
            block_index: 0,
            slots_seen: 0,
            current: None,
            top: None,
            max_block_len: 0,
        })
    }

    fn begin_block(&mut self, rng: &mut dyn RngCore) -> Result<()> {
        self.block_index += 1;
        let gamma_index = match self.params.gamma_indexing {
            GammaIndexing::Block => self.block_index,
            GammaIndexing::Slot => self.slots_seen + 1,
        };
        let gamma = self.params.gamma.rate(gamma_index);
        let probs = probability_update(&self.weights, gamma)?;
        let top = probs.argmax();
        self.top = Some((self.ids[top], probs.get(top)));
        let chosen = sample_categorical(probs.values(), rng);
        let length = block_length(self.x[chosen], self.params.beta);
        self.x[chosen] += 1;
        self.max_block_len = self.max_block_len.max(length);
        self.current = Some(Block {
            chosen,
            length,
            elapsed: 0,
            gain_sum: 0.0,
            p_bar: probs.get(chosen),
            gamma,
        });
        Ok(())
    }
}

impl SelectionPolicy for BlockExp3 {
    fn decide(&mut self, rng: &mut dyn RngCore) -> Result<Decision> {
        if self.current.is_none() {
            self.begin_block(rng)?;
        }
        let block = self.current.as_ref().expect("block exists after begin");
        Ok(Decision {
            network: self.ids[block.chosen],
            selection_probability: block.p_bar,
            kind: DecisionKind::Random,
            block_index: self.block_index,
        })
    }

    fn observe(&mut self, gain: ScaledGain, _all_gains: Option<&[ScaledGain]>) -> Result<()> {
        let block = self
            .current
            .as_mut()
            .ok_or_else(|| Error::InvalidState("observe called before decide".into()))?;
        block.elapsed += 1;
        block.gain_sum += gain.value();
        self.slots_seen += 1;
        if block.elapsed == block.length {
            let Block {
                chosen,
                gain_sum,
                p_bar,
                gamma,
                ..
            } = *block;
            let k = self.weights.len();
            weight_update(&mut self.weights, chosen, gain_sum, p_bar, gamma, k)?;
            self.current = None;
        }
        Ok(())
    }

    fn on_network_set_change(&mut self, added: &[NetworkId], removed: &[NetworkId]) -> Result<()> {
        let mut ids = Vec::new();
        let mut weights = Vec::new();
        let mut x = Vec::new();
        for (i, id) in self.ids.iter().enumerate() {
            if !removed.contains(id) {
                ids.push(*id);
                weights.push(self.weights[i]);
                x.push(self.x[i]);
            }
        }
        let w_new = joining_weight(&weights);
        for id in added {
            if !ids.contains(id) {
                ids.push(*id);
                weights.push(w_new);
                x.push(0);
            }
        }
        if ids.is_empty() {
            return Err(Error::InvalidState(
                "network set change left no networks".into(),
            ));
        }
        // a block on a vanished network cannot continue
        if let Some(block) = &self.current {
            if removed.contains(&self.ids[block.chosen]) {
                self.current = None;
            } else {
                let id = self.ids[block.chosen];
                let new_local = ids.iter().position(|n| *n == id).expect("kept network");
                self.current.as_mut().expect("checked above").chosen = new_local;
            }
        }
        self.ids = ids;
        self.weights = weights;
        self.x = x;
        self.top = None;
        Ok(())
    }

    fn probability_top(&self) -> Option<(NetworkId, f64)> {
        self.top
    }

    fn max_assigned_block_length(&self) -> u64 {
        self.max_block_len.max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::scale_gain;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn ids(k: usize) -> Vec<NetworkId> {
        (0..k).map(NetworkId).collect()
    }

    fn params() -> PolicyParams {
        PolicyParams {
            beta: 0.1,
            ..PolicyParams::default()
        }
    }

    #[test]
    fn block_lengths_follow_selection_counts() {
        // single network: every block picks it, so lengths are ceil(1.1^x)
        let mut p = BlockExp3::new(&ids(1), params()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut lengths = Vec::new();
        for _ in 0..3 {
            p.decide(&mut rng).unwrap();
            let len = p.current.as_ref().unwrap().length;
            lengths.push(len);
            for _ in 0..len {
                p.decide(&mut rng).unwrap();
                p.observe(scale_gain(0.5, 1.0).unwrap(), None).unwrap();
            }
        }
        assert_eq!(lengths, vec![1, 2, 2]);
    }

    #[test]
    fn one_weight_update_per_block_not_per_slot() {
        let mut p = BlockExp3::new(&ids(1), params()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        // first block has length 1: weights update once
        p.decide(&mut rng).unwrap();
        p.observe(scale_gain(1.0, 1.0).unwrap(), None).unwrap();
        let after_first = p.weights[0];
        assert!(after_first > 1.0);
        // second block has length 2: no update until both slots observed
        p.decide(&mut rng).unwrap();
        p.observe(scale_gain(1.0, 1.0).unwrap(), None).unwrap();
        assert_eq!(p.weights[0], after_first);
        p.decide(&mut rng).unwrap();
        p.observe(scale_gain(1.0, 1.0).unwrap(), None).unwrap();
        assert!(p.weights[0] > after_first);
    }

    #[test]
    fn slots_equal_sum_of_block_lengths() {
        let mut p = BlockExp3::new(&ids(3), params()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut slots = 0u64;
        let mut block_slots = 0u64;
        let mut last_block = 0u64;
        while slots < 500 {
            let d = p.decide(&mut rng).unwrap();
            if d.block_index != last_block {
                last_block = d.block_index;
                block_slots += p.current.as_ref().unwrap().length;
            }
            p.observe(scale_gain(0.4, 1.0).unwrap(), None).unwrap();
            slots += 1;
        }
        // every started block is accounted for; the last one may be partial
        let pending = p.current.as_ref().map_or(0, |b| b.length - b.elapsed);
        assert_eq!(block_slots - pending, slots);
    }

    #[test]
    fn block_gain_bounded_by_length() {
        let mut p = BlockExp3::new(&ids(2), params()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..300 {
            p.decide(&mut rng).unwrap();
            if let Some(b) = &p.current {
                assert!(b.gain_sum <= b.length as f64 + 1e-12);
                assert!(b.gain_sum <= b.elapsed as f64 + 1e-12);
            }
            p.observe(scale_gain(1.0, 1.0).unwrap(), None).unwrap();
        }
    }
}

//! Explore every network once in random order, then stick to the highest
//! average gain.

use rand::RngCore;

use crate::types::{Decision, DecisionKind, Error, NetworkId, Result, ScaledGain};

use super::{argmax_mean, sample_uniform_index, SelectionPolicy};

pub struct GreedyBaseline {
    ids: Vec<NetworkId>,
    unexplored: Vec<usize>,
    total_gain: Vec<f64>,
    samples: Vec<u64>,
    decisions: u64,
    pending: Option<usize>,
}

impl GreedyBaseline {
    pub fn new(available: &[NetworkId]) -> Result<Self> {
        if available.is_empty() {
            return Err(Error::InvalidState(
                "policy needs at least one network".into(),
            ));
        }
        Ok(GreedyBaseline {
            ids: available.to_vec(),
            unexplored: (0..available.len()).collect(),
            total_gain: vec![0.0; available.len()],
            samples: vec![0; available.len()],
            decisions: 0,
            pending: None,
        })
    }
}

impl SelectionPolicy for GreedyBaseline {
    fn decide(&mut self, rng: &mut dyn RngCore) -> Result<Decision> {
        self.decisions += 1;
        let (chosen, p_bar, kind) = if self.unexplored.is_empty() {
            (
                argmax_mean(&self.total_gain, &self.samples),
                1.0,
                DecisionKind::Greedy,
            )
        } else {
            let p_bar = 1.0 / self.unexplored.len() as f64;
            let pick = sample_uniform_index(self.unexplored.len(), rng);
            (
                self.unexplored.swap_remove(pick),
                p_bar,
                DecisionKind::InitialExploration,
            )
        };
        self.pending = Some(chosen);
        Ok(Decision {
            network: self.ids[chosen],
            selection_probability: p_bar,
            kind,
            block_index: self.decisions,
        })
    }

    fn observe(&mut self, gain: ScaledGain, _all_gains: Option<&[ScaledGain]>) -> Result<()> {
        let chosen = self
            .pending
            .take()
            .ok_or_else(|| Error::InvalidState("observe called before decide".into()))?;
        self.total_gain[chosen] += gain.value();
        self.samples[chosen] += 1;
        Ok(())
    }

    fn on_network_set_change(&mut self, added: &[NetworkId], removed: &[NetworkId]) -> Result<()> {
        let keep: Vec<usize> = (0..self.ids.len())
            .filter(|i| !removed.contains(&self.ids[*i]))
            .collect();
        let mut ids = Vec::new();
        let mut total_gain = Vec::new();
        let mut samples = Vec::new();
        let mut unexplored = Vec::new();
        for (new_i, old_i) in keep.iter().enumerate() {
            ids.push(self.ids[*old_i]);
            total_gain.push(self.total_gain[*old_i]);
            samples.push(self.samples[*old_i]);
            if self.unexplored.contains(old_i) {
                unexplored.push(new_i);
            }
        }
        for id in added {
            if !ids.contains(id) {
                ids.push(*id);
                total_gain.push(0.0);
                samples.push(0);
                unexplored.push(ids.len() - 1);
            }
        }
        if ids.is_empty() {
            return Err(Error::InvalidState(
                "network set change left no networks".into(),
            ));
        }
        self.ids = ids;
        self.total_gain = total_gain;
        self.samples = samples;
        self.unexplored = unexplored;
        self.pending = None;
        Ok(())
    }

    fn probability_top(&self) -> Option<(NetworkId, f64)> {
        None
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

    #[test]
    fn first_slots_are_a_permutation() {
        for seed in 0..20 {
            let mut p = GreedyBaseline::new(&ids(3)).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut seen = Vec::new();
            for _ in 0..3 {
                let d = p.decide(&mut rng).unwrap();
                assert_eq!(d.kind, DecisionKind::InitialExploration);
                seen.push(d.network.0);
                p.observe(scale_gain(0.1, 1.0).unwrap(), None).unwrap();
            }
            seen.sort_unstable();
            assert_eq!(seen, vec![0, 1, 2]);
        }
    }

    #[test]
    fn picks_argmax_mean_after_exploration() {
        let mut p = GreedyBaseline::new(&ids(3)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let means = [0.2, 0.9, 0.5];
        for _ in 0..3 {
            let d = p.decide(&mut rng).unwrap();
            p.observe(scale_gain(means[d.network.0], 1.0).unwrap(), None)
                .unwrap();
        }
        let d = p.decide(&mut rng).unwrap();
        assert_eq!(d.network, NetworkId(1));
        assert_eq!(d.kind, DecisionKind::Greedy);
    }

    #[test]
    fn tie_breaks_to_lowest_id() {
        let mut p = GreedyBaseline::new(&ids(2)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..2 {
            let d = p.decide(&mut rng).unwrap();
            let _ = d;
            p.observe(scale_gain(0.5, 1.0).unwrap(), None).unwrap();
        }
        let d = p.decide(&mut rng).unwrap();
        assert_eq!(d.network, NetworkId(0));
    }

    #[test]
    fn never_selects_strictly_dominated_network() {
        let mut p = GreedyBaseline::new(&ids(3)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let means = [0.3, 0.8, 0.1];
        for _ in 0..200 {
            let d = p.decide(&mut rng).unwrap();
            if d.kind == DecisionKind::Greedy {
                assert_eq!(d.network, NetworkId(1));
            }
            p.observe(scale_gain(means[d.network.0], 1.0).unwrap(), None)
                .unwrap();
        }
    }

    #[test]
    fn empty_set_is_rejected() {
        assert!(GreedyBaseline::new(&[]).is_err());
    }
}

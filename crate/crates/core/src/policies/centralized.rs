//! Omniscient baseline: a central allocator places devices at a Nash
//! equilibrium by water-filling and they never move.

use rand::RngCore;

use crate::types::{Decision, DecisionKind, Error, NetworkId, Result, ScaledGain};

use super::SelectionPolicy;

/// Assigns `n_devices` one at a time to the network maximizing the marginal
/// share `bandwidth / (count + 1)`, ties to the lowest index.
///
/// For equal-share utilities the resulting counts satisfy the equilibrium
/// condition `b_i/n_i >= b_j/(n_j + 1)` for every occupied `i` and every `j`.
pub fn centralized_allocate(bandwidths: &[f64], n_devices: usize) -> Vec<usize> {
    let mut counts = vec![0usize; bandwidths.len()];
    for _ in 0..n_devices {
        let mut best = 0;
        let mut best_share = f64::NEG_INFINITY;
        for (i, b) in bandwidths.iter().enumerate() {
            let share = b / (counts[i] + 1) as f64;
            if share > best_share {
                best_share = share;
                best = i;
            }
        }
        counts[best] += 1;
    }
    counts
}

pub struct Centralized {
    assigned: NetworkId,
}

impl Centralized {
    /// `rank` is this device's position within its group of `group_size`
    /// devices sharing the allocation; devices fill networks in id order.
    pub fn new(
        available: &[NetworkId],
        bandwidths: &[f64],
        group_size: usize,
        rank: usize,
    ) -> Result<Self> {
        if available.is_empty() {
            return Err(Error::InvalidState(
                "policy needs at least one network".into(),
            ));
        }
        if available.len() != bandwidths.len() {
            return Err(Error::Config(
                "one bandwidth per available network required".into(),
            ));
        }
        if rank >= group_size {
            return Err(Error::Config(format!(
                "rank {rank} outside group of {group_size}"
            )));
        }
        let counts = centralized_allocate(bandwidths, group_size);
        let mut cumulative = 0usize;
        let mut assigned = available[0];
        for (i, c) in counts.iter().enumerate() {
            cumulative += c;
            if rank < cumulative {
                assigned = available[i];
                break;
            }
        }
        Ok(Centralized { assigned })
    }
}

impl SelectionPolicy for Centralized {
    fn decide(&mut self, _rng: &mut dyn RngCore) -> Result<Decision> {
        Ok(Decision {
            network: self.assigned,
            selection_probability: 1.0,
            kind: DecisionKind::Greedy,
            block_index: 1,
        })
    }

    fn observe(&mut self, _gain: ScaledGain, _all_gains: Option<&[ScaledGain]>) -> Result<()> {
        Ok(())
    }

    fn on_network_set_change(&mut self, _added: &[NetworkId], removed: &[NetworkId]) -> Result<()> {
        if removed.contains(&self.assigned) {
            return Err(Error::InvalidState(
                "centralized allocation lost its assigned network".into(),
            ));
        }
        Ok(())
    }

    fn probability_top(&self) -> Option<(NetworkId, f64)> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive unilateral-deviation check, independent of water-filling.
    fn is_nash(bandwidths: &[f64], counts: &[usize]) -> bool {
        for i in 0..counts.len() {
            if counts[i] == 0 {
                continue;
            }
            let own = bandwidths[i] / counts[i] as f64;
            for j in 0..counts.len() {
                if j == i {
                    continue;
                }
                if bandwidths[j] / (counts[j] + 1) as f64 > own + 1e-12 {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn single_network_takes_everyone() {
        assert_eq!(centralized_allocate(&[5.0], 3), vec![3]);
    }

    #[test]
    fn uniform_bandwidths_split_evenly() {
        let counts = centralized_allocate(&[11.0, 11.0, 11.0], 20);
        let mut sorted = counts.clone();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sorted, vec![7, 7, 6]);
        assert!(is_nash(&[11.0, 11.0, 11.0], &counts));
    }

    #[test]
    fn non_uniform_bandwidths_match_enumeration() {
        let bw = [4.0, 7.0, 22.0];
        let counts = centralized_allocate(&bw, 20);
        assert_eq!(counts, vec![2, 4, 14]);
        // brute force: the only composition of 20 passing the deviation check
        let mut nash = Vec::new();
        for a in 0..=20usize {
            for b in 0..=(20 - a) {
                let c = 20 - a - b;
                if is_nash(&bw, &[a, b, c]) {
                    nash.push(vec![a, b, c]);
                }
            }
        }
        assert_eq!(nash, vec![vec![2, 4, 14]]);
    }

    #[test]
    fn allocation_is_always_nash() {
        let cases: &[(&[f64], usize)] = &[
            (&[1.0], 5),
            (&[3.0, 5.0], 7),
            (&[4.0, 7.0, 22.0], 20),
            (&[11.0, 11.0, 11.0], 20),
            (&[16.0, 14.0, 22.0, 7.0, 4.0], 30),
            (&[2.5, 9.0], 1),
        ];
        for (bw, n) in cases {
            let counts = centralized_allocate(bw, *n);
            assert_eq!(counts.iter().sum::<usize>(), *n);
            assert!(is_nash(bw, &counts), "not NE: {counts:?} for {bw:?}");
        }
    }

    proptest::proptest! {
        #[test]
        fn water_filling_always_lands_on_an_equilibrium(
            bw in proptest::collection::vec(0.5f64..50.0, 1..6),
            n in 1usize..40,
        ) {
            let counts = centralized_allocate(&bw, n);
            proptest::prop_assert_eq!(counts.iter().sum::<usize>(), n);
            proptest::prop_assert!(is_nash(&bw, &counts), "{:?} for {:?}", counts, bw);
        }
    }

    #[test]
    fn ranks_cover_the_allocation() {
        let ids: Vec<NetworkId> = (0..3).map(NetworkId).collect();
        let bw = [4.0, 7.0, 22.0];
        let mut per_network = vec![0usize; 3];
        for rank in 0..20 {
            let p = Centralized::new(&ids, &bw, 20, rank).unwrap();
            per_network[p.assigned.0] += 1;
        }
        assert_eq!(per_network, vec![2, 4, 14]);
    }
}

//! Block-based exponential-weight selection with the practical machinery
//! that makes it usable on real devices: initial exploration, occasional
//! greedy picks while probabilities are still flat, a one-slot switch-back
//! escape from bad moves, and a minimal reset that re-probes the environment
//! without discarding learned weights.
//!
//! Feature flags turn the mechanisms off individually, which also yields the
//! comparison variants: everything off is plain block-based selection,
//! greedy-only is the hybrid variant, and reset-off is the no-reset variant.

use std::collections::VecDeque;

use rand::{Rng, RngCore};

use crate::policies::{
    argmax_mean, block_length, joining_weight, probability_update, sample_categorical,
    sample_uniform_index, weight_update, SelectionPolicy,
};
use crate::types::{
    Decision, DecisionKind, Error, GammaIndexing, NetworkId, PolicyParams, Result, ScaledGain,
};

/// Which of the mechanisms on top of block-based selection are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmartFeatures {
    /// Initial exploration plus coin-flip greedy picks while eligible.
    pub greedy: bool,
    /// One-slot recovery to the previous network after a bad first slot.
    pub switch_back: bool,
    /// Periodic and drop-triggered minimal resets.
    pub reset: bool,
}

impl SmartFeatures {
    /// The full algorithm.
    pub fn all() -> Self {
        SmartFeatures {
            greedy: true,
            switch_back: true,
            reset: true,
        }
    }

    /// Full algorithm minus resets.
    pub fn no_reset() -> Self {
        SmartFeatures {
            greedy: true,
            switch_back: true,
            reset: false,
        }
    }

    /// Greedy policy only: block selection plus exploration/greedy picks.
    pub fn hybrid() -> Self {
        SmartFeatures {
            greedy: true,
            switch_back: false,
            reset: false,
        }
    }

    /// Everything off; reduces the module to plain block-based selection.
    pub fn plain_block() -> Self {
        SmartFeatures {
            greedy: false,
            switch_back: false,
            reset: false,
        }
    }
}

/// Tunables, all defaulting to the values used throughout the evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SmartConfig {
    pub params: PolicyParams,
    pub features: SmartFeatures,
    /// Probability of taking the greedy arm when eligible.
    pub greedy_coin_prob: f64,
    /// How many trailing slots of the previous block inform a switch-back.
    pub switch_back_window: usize,
    /// Reset when the top network's probability reaches this...
    pub reset_prob_threshold: f64,
    /// ...and its block length has grown to at least this.
    pub reset_min_block_length: u64,
    /// Relative gain drop that counts as a real change, not noise.
    pub reset_drop_fraction: f64,
    /// A drop only triggers a reset when it persists strictly longer than
    /// this many slots; transient congestion dips (other devices passing
    /// through for a slot or two) must not reset the learner.
    pub reset_min_consecutive_slots: u64,
}

impl SmartConfig {
    pub fn new(params: PolicyParams, features: SmartFeatures) -> Self {
        SmartConfig {
            params,
            features,
            greedy_coin_prob: 0.5,
            switch_back_window: 8,
            reset_prob_threshold: 0.75,
            reset_min_block_length: 40,
            reset_drop_fraction: 0.15,
            reset_min_consecutive_slots: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.greedy_coin_prob > 0.0 && self.greedy_coin_prob <= 1.0) {
            return Err(Error::Config(format!(
                "greedy_coin_prob must be in (0, 1], got {}",
                self.greedy_coin_prob
            )));
        }
        if self.switch_back_window == 0 {
            return Err(Error::Config(
                "switch_back_window must be at least 1".into(),
            ));
        }
        if !(self.reset_drop_fraction > 0.0 && self.reset_drop_fraction < 1.0) {
            return Err(Error::Config(format!(
                "reset_drop_fraction must be in (0, 1), got {}",
                self.reset_drop_fraction
            )));
        }
        Ok(())
    }
}

struct Block {
    chosen: usize,
    length: u64,
    elapsed: u64,
    gain_sum: f64,
    p_bar: f64,
    gamma: f64,
    kind: DecisionKind,
    /// Previous block's record to judge this block's first slot against;
    /// present only when a switch-back may fire here.
    switch_back_cmp: Option<PrevBlock>,
    /// Trailing per-slot gains, capped at the switch-back window.
    window: VecDeque<f64>,
}

#[derive(Clone)]
struct PrevBlock {
    network: usize,
    window: Vec<f64>,
    mean: f64,
    last: f64,
}

pub struct SmartExp3 {
    cfg: SmartConfig,
    ids: Vec<NetworkId>,
    weights: Vec<f64>,
    /// Times each network has been picked for a block this reset period.
    x: Vec<u64>,
    /// Networks not yet explored (local indices).
    explore: Vec<usize>,
    // running mean gain per network, for greedy picks
    stat_gain: Vec<f64>,
    stat_samples: Vec<u64>,
    // greedy gate: y is the top network's block length the first time the
    // probability spread exceeds 1/(k-1). Recorded once per run and kept
    // through resets, so that post-reset block lengths sit below it and
    // greedy stays usable while the environment is re-probed.
    gate_y: Option<u64>,
    block_index: u64,
    slots_seen: u64,
    current: Option<Block>,
    prev_block: Option<PrevBlock>,
    pending_switch_back: Option<usize>,
    // reset monitor
    period_slots: Vec<u64>,
    consecutive: u64,
    last_slot_network: Option<usize>,
    /// Trailing pre-drop gains on the current stretch (the drop baseline).
    baseline_gains: VecDeque<f64>,
    /// Consecutive slots at least the drop fraction below the baseline.
    drop_run: u64,
    drop_baseline: f64,
    resets: u64,
    last_probs: Option<Vec<f64>>,
    top: Option<(NetworkId, f64)>,
    max_block_len: u64,
}

impl SmartExp3 {
    pub fn new(available: &[NetworkId], cfg: SmartConfig) -> Result<Self> {
        if available.is_empty() {
            return Err(Error::InvalidState(
                "policy needs at least one network".into(),
            ));
        }
        cfg.validate()?;
        let k = available.len();
        let explore = if cfg.features.greedy {
            (0..k).collect()
        } else {
            Vec::new()
        };
        Ok(SmartExp3 {
            cfg,
            ids: available.to_vec(),
            weights: vec![1.0; k],
            x: vec![0; k],
            explore,
            stat_gain: vec![0.0; k],
            stat_samples: vec![0; k],
            gate_y: None,
            block_index: 0,
            slots_seen: 0,
            current: None,
            prev_block: None,
            pending_switch_back: None,
            period_slots: vec![0; k],
            consecutive: 0,
            last_slot_network: None,
            baseline_gains: VecDeque::new(),
            drop_run: 0,
            drop_baseline: 0.0,
            resets: 0,
            last_probs: None,
            top: None,
            max_block_len: 0,
        })
    }

    fn gamma_for_next_block(&self) -> f64 {
        let index = match self.cfg.params.gamma_indexing {
            GammaIndexing::Block => self.block_index,
            GammaIndexing::Slot => self.slots_seen + 1,
        };
        self.cfg.params.gamma.rate(index.max(1))
    }

    /// Clears block lengths, greedy statistics and the exploration state,
    /// keeping weights (and the recorded gate value `y`) intact.
    fn apply_reset(&mut self) {
        self.x.fill(0);
        self.stat_gain.fill(0.0);
        self.stat_samples.fill(0);
        self.explore = (0..self.ids.len()).collect();
        self.period_slots.fill(0);
        self.baseline_gains.clear();
        self.drop_run = 0;
        self.resets += 1;
    }

    /// Greedy eligibility: a flat distribution, or a top block length still
    /// below the recorded gate value (which re-enables greedy after a reset).
    /// Records the gate value on the first spread crossing of each period.
    fn greedy_eligible(&mut self, probs: &[f64]) -> bool {
        let k = self.ids.len();
        if k < 2 {
            return false;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut top = 0;
        for (i, &p) in probs.iter().enumerate() {
            lo = lo.min(p);
            if p > hi {
                hi = p;
                top = i;
            }
        }
        let spread = hi - lo;
        let threshold = 1.0 / (k - 1) as f64;
        let l_top = block_length(self.x[top], self.cfg.params.beta);
        if spread > threshold && self.gate_y.is_none() {
            self.gate_y = Some(l_top);
        }
        spread <= threshold || self.gate_y.is_some_and(|y| l_top < y)
    }

    fn start_block(&mut self, chosen: usize, p_bar: f64, kind: DecisionKind, gamma: f64) {
        let length = block_length(self.x[chosen], self.cfg.params.beta);
        self.x[chosen] += 1;
        self.max_block_len = self.max_block_len.max(length);
        let switch_back_cmp = if self.cfg.features.switch_back && kind != DecisionKind::SwitchBack {
            self.prev_block
                .as_ref()
                .filter(|p| p.network != chosen)
                .cloned()
        } else {
            None
        };
        self.current = Some(Block {
            chosen,
            length,
            elapsed: 0,
            gain_sum: 0.0,
            p_bar,
            gamma,
            kind,
            switch_back_cmp,
            window: VecDeque::with_capacity(self.cfg.switch_back_window),
        });
    }

    fn begin_block(&mut self, rng: &mut dyn RngCore) -> Result<()> {
        self.block_index += 1;
        let gamma = self.gamma_for_next_block();
        let probs = probability_update(&self.weights, gamma)?;
        let top = probs.argmax();
        self.top = Some((self.ids[top], probs.get(top)));

        if self.cfg.features.reset
            && probs.get(top) >= self.cfg.reset_prob_threshold
            && block_length(self.x[top], self.cfg.params.beta) >= self.cfg.reset_min_block_length
        {
            self.apply_reset();
        }

        let (chosen, p_bar, kind) = if !self.explore.is_empty() {
            let p_bar = 1.0 / self.explore.len() as f64;
            let pick = sample_uniform_index(self.explore.len(), rng);
            (
                self.explore.swap_remove(pick),
                p_bar,
                DecisionKind::InitialExploration,
            )
        } else if self.cfg.features.greedy && self.greedy_eligible(probs.values()) {
            if rng.random::<f64>() < self.cfg.greedy_coin_prob {
                let best = argmax_mean(&self.stat_gain, &self.stat_samples);
                (best, self.cfg.greedy_coin_prob, DecisionKind::Greedy)
            } else {
                let i = sample_categorical(probs.values(), rng);
                (
                    i,
                    probs.get(i) * (1.0 - self.cfg.greedy_coin_prob),
                    DecisionKind::Random,
                )
            }
        } else {
            let i = sample_categorical(probs.values(), rng);
            (i, probs.get(i), DecisionKind::Random)
        };
        self.last_probs = Some(probs.values().to_vec());
        self.start_block(chosen, p_bar, kind, gamma);
        Ok(())
    }

    /// Starts the special one-decision recovery block on the previous
    /// network. The probability refresh still happens; selection does not.
    fn begin_switch_back_block(&mut self, target: usize) -> Result<()> {
        self.block_index += 1;
        let gamma = self.gamma_for_next_block();
        let probs = probability_update(&self.weights, gamma)?;
        let top = probs.argmax();
        self.top = Some((self.ids[top], probs.get(top)));
        self.last_probs = Some(probs.values().to_vec());
        self.start_block(target, 1.0, DecisionKind::SwitchBack, gamma);
        Ok(())
    }

    /// Applies the block's weight update and rolls it into switch-back memory.
    fn finalize_block(&mut self) -> Result<()> {
        let Some(block) = self.current.take() else {
            return Ok(());
        };
        if block.elapsed == 0 {
            return Ok(());
        }
        let k = self.weights.len();
        weight_update(
            &mut self.weights,
            block.chosen,
            block.gain_sum,
            block.p_bar,
            block.gamma,
            k,
        )?;
        let window: Vec<f64> = block.window.iter().copied().collect();
        let mean = window.iter().sum::<f64>() / window.len() as f64;
        let last = *window.last().expect("non-empty window");
        self.prev_block = Some(PrevBlock {
            network: block.chosen,
            window,
            mean,
            last,
        });
        Ok(())
    }

    /// First-slot comparison against the previous block: worse than its mean,
    /// worse than its final slot, or worse than most of its trailing window.
    fn switch_back_rule(prev: &PrevBlock, gain: f64) -> bool {
        if gain < prev.mean || gain < prev.last {
            return true;
        }
        let higher = prev.window.iter().filter(|g| **g > gain).count();
        2 * higher > prev.window.len()
    }

    /// Tracks sustained gain drops on the current stretch of slots. A drop
    /// run starts when a gain sinks at least the configured fraction below
    /// the smallest of the trailing pre-drop slots, and ends on recovery;
    /// recovered or pre-drop gains feed the baseline, dropped ones do not.
    /// Taking the window minimum keeps a neighbor's brief absence (a gain
    /// spike that then normalizes) from reading as a drop.
    fn track_drop(&mut self, gain: f64) {
        let cutoff = 1.0 - self.cfg.reset_drop_fraction;
        if self.drop_run > 0 {
            if gain <= cutoff * self.drop_baseline {
                self.drop_run += 1;
                return;
            }
            self.drop_run = 0;
        }
        if !self.baseline_gains.is_empty() {
            let baseline = self
                .baseline_gains
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            if baseline > 0.0 && gain <= cutoff * baseline {
                self.drop_run = 1;
                self.drop_baseline = baseline;
                return;
            }
        }
        let window = self.cfg.reset_min_consecutive_slots as usize;
        if self.baseline_gains.len() == window.max(1) {
            self.baseline_gains.pop_front();
        }
        self.baseline_gains.push_back(gain);
    }

    /// Drop-triggered reset: the most-used network of this period, held
    /// continuously, sank at least the configured fraction below the
    /// pre-drop baseline for strictly more than the configured run of slots.
    fn drop_reset_due(&self, chosen: usize) -> bool {
        if self.drop_run <= self.cfg.reset_min_consecutive_slots
            || self.consecutive <= self.cfg.reset_min_consecutive_slots
        {
            return false;
        }
        let mut i_max = 0;
        for i in 1..self.period_slots.len() {
            if self.period_slots[i] > self.period_slots[i_max] {
                i_max = i;
            }
        }
        chosen == i_max
    }

    pub fn reset_total(&self) -> u64 {
        self.resets
    }

    #[cfg(test)]
    pub(crate) fn weights_mut(&mut self) -> &mut Vec<f64> {
        &mut self.weights
    }

    #[cfg(test)]
    pub(crate) fn exploration_remaining(&self) -> usize {
        self.explore.len()
    }
}

impl SelectionPolicy for SmartExp3 {
    fn decide(&mut self, rng: &mut dyn RngCore) -> Result<Decision> {
        if self.current.is_none() {
            match self.pending_switch_back.take() {
                Some(target) => self.begin_switch_back_block(target)?,
                None => self.begin_block(rng)?,
            }
        }
        let block = self.current.as_ref().expect("block exists after begin");
        let decision = Decision {
            network: self.ids[block.chosen],
            selection_probability: block.p_bar,
            kind: block.kind,
            block_index: self.block_index,
        };
        debug_assert!(
            decision.selection_probability > 0.0 && decision.selection_probability <= 1.0
        );
        Ok(decision)
    }

    fn observe(&mut self, gain: ScaledGain, _all_gains: Option<&[ScaledGain]>) -> Result<()> {
        let g = gain.value();
        let cfg_window = self.cfg.switch_back_window;
        let block = self
            .current
            .as_mut()
            .ok_or_else(|| Error::InvalidState("observe called before decide".into()))?;
        block.elapsed += 1;
        block.gain_sum += g;
        if block.window.len() == cfg_window {
            block.window.pop_front();
        }
        block.window.push_back(g);
        let chosen = block.chosen;
        let first_slot = block.elapsed == 1;
        let finished = block.elapsed == block.length;
        let back_to = if first_slot {
            block
                .switch_back_cmp
                .as_ref()
                .filter(|prev| Self::switch_back_rule(prev, g))
                .map(|prev| prev.network)
        } else {
            None
        };
        debug_assert!(block.gain_sum <= block.elapsed as f64 + 1e-9);

        self.slots_seen += 1;
        self.stat_gain[chosen] += g;
        self.stat_samples[chosen] += 1;
        self.period_slots[chosen] += 1;
        if self.last_slot_network == Some(chosen) {
            self.consecutive += 1;
        } else {
            self.consecutive = 1;
            self.baseline_gains.clear();
            self.drop_run = 0;
        }
        self.last_slot_network = Some(chosen);
        self.track_drop(g);

        if let Some(back_to) = back_to {
            self.finalize_block()?;
            self.pending_switch_back = Some(back_to);
            return Ok(());
        }
        if self.cfg.features.reset && self.drop_reset_due(chosen) {
            self.finalize_block()?;
            self.apply_reset();
            return Ok(());
        }
        if finished {
            self.finalize_block()?;
        }
        Ok(())
    }

    fn on_network_set_change(&mut self, added: &[NetworkId], removed: &[NetworkId]) -> Result<()> {
        // a block on a vanished network ends right away with its partial gain
        if let Some(block) = &self.current {
            if removed.contains(&self.ids[block.chosen]) {
                self.finalize_block()?;
                if let Some(p) = &self.prev_block {
                    if removed.contains(&self.ids[p.network]) {
                        self.prev_block = None;
                    }
                }
            }
        }
        let removed_high_p =
            match &self.last_probs {
                Some(probs) => self.ids.iter().enumerate().any(|(i, id)| {
                    removed.contains(id) && probs[i] >= self.cfg.reset_prob_threshold
                }),
                None => false,
            };

        let old_ids = self.ids.clone();
        let keep: Vec<usize> = (0..old_ids.len())
            .filter(|i| !removed.contains(&old_ids[*i]))
            .collect();
        let remap = |old: usize| -> Option<usize> { keep.iter().position(|k| *k == old) };

        let mut ids = Vec::new();
        let mut weights = Vec::new();
        let mut x = Vec::new();
        let mut stat_gain = Vec::new();
        let mut stat_samples = Vec::new();
        let mut period_slots = Vec::new();
        for &old in &keep {
            ids.push(old_ids[old]);
            weights.push(self.weights[old]);
            x.push(self.x[old]);
            stat_gain.push(self.stat_gain[old]);
            stat_samples.push(self.stat_samples[old]);
            period_slots.push(self.period_slots[old]);
        }
        let w_new = joining_weight(&weights);
        let mut any_added = false;
        for id in added {
            if !ids.contains(id) {
                ids.push(*id);
                weights.push(w_new);
                x.push(0);
                stat_gain.push(0.0);
                stat_samples.push(0);
                period_slots.push(0);
                any_added = true;
            }
        }
        if ids.is_empty() {
            return Err(Error::InvalidState(
                "network set change left no networks".into(),
            ));
        }

        self.explore = self.explore.iter().filter_map(|e| remap(*e)).collect();
        if let Some(block) = self.current.as_mut() {
            block.chosen = remap(block.chosen).expect("surviving block network");
            block.switch_back_cmp = block.switch_back_cmp.take().and_then(|mut p| {
                p.network = remap(p.network)?;
                Some(p)
            });
        }
        self.prev_block = match self.prev_block.take() {
            Some(mut p) => match remap(p.network) {
                Some(n) => {
                    p.network = n;
                    Some(p)
                }
                None => None,
            },
            None => None,
        };
        self.pending_switch_back = self.pending_switch_back.and_then(remap);
        self.last_slot_network = self.last_slot_network.and_then(remap);
        if self.last_slot_network.is_none() {
            self.consecutive = 0;
            self.baseline_gains.clear();
            self.drop_run = 0;
        }
        self.last_probs = None;
        self.top = None;

        self.ids = ids;
        self.weights = weights;
        self.x = x;
        self.stat_gain = stat_gain;
        self.stat_samples = stat_samples;
        self.period_slots = period_slots;

        if any_added || removed_high_p {
            self.apply_reset();
        }
        Ok(())
    }

    fn probability_top(&self) -> Option<(NetworkId, f64)> {
        self.top
    }

    fn reset_count(&self) -> u64 {
        self.resets
    }

    fn max_assigned_block_length(&self) -> u64 {
        self.max_block_len.max(1)
    }
}

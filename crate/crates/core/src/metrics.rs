//! Evaluation quantities: Nash equilibria of the equal-share game, distance
//! to equilibrium, stable-state detection, fairness, and resource
//! utilization.

use crate::engine::RunResult;
use crate::scenario::Scenario;
use crate::types::{Error, NetworkId, Result};

/// Caps the reported distance when a device's current gain is zero.
pub const DISTANCE_CAP_PERCENT: f64 = 1e9;

/// Largest composition count `C(n+k-1, k-1)` the exact enumeration will scan.
pub const ENUMERATION_BOUND: u64 = 2_000_000;

/// A device-count vector under which nobody gains by moving alone.
#[derive(Debug, Clone, PartialEq)]
pub struct NashAllocation {
    pub counts: Vec<usize>,
    /// Per-device gain on each occupied network (`bandwidth / count`).
    pub per_network_gain: Vec<f64>,
}

impl NashAllocation {
    fn new(counts: Vec<usize>, bandwidths: &[f64]) -> Self {
        let per_network_gain = counts
            .iter()
            .zip(bandwidths)
            .map(|(c, b)| if *c > 0 { b / *c as f64 } else { 0.0 })
            .collect();
        NashAllocation {
            counts,
            per_network_gain,
        }
    }

    /// The equilibrium gain multiset, ascending: `b_i/n_i` repeated `n_i` times.
    pub fn gain_multiset(&self) -> Vec<f64> {
        let mut gains = Vec::new();
        for (c, g) in self.counts.iter().zip(&self.per_network_gain) {
            gains.extend(std::iter::repeat_n(*g, *c));
        }
        gains.sort_by(f64::total_cmp);
        gains
    }
}

/// No occupant of `i` would rather move to any `j`:
/// `b_i/n_i >= b_j/(n_j + 1)`.
pub fn satisfies_ne_condition(bandwidths: &[f64], counts: &[usize]) -> bool {
    for i in 0..counts.len() {
        if counts[i] == 0 {
            continue;
        }
        let own = bandwidths[i] / counts[i] as f64;
        for j in 0..counts.len() {
            if j != i && bandwidths[j] / (counts[j] + 1) as f64 > own + 1e-12 {
                return false;
            }
        }
    }
    true
}

fn compositions_count(n: u64, k: u64) -> u64 {
    // C(n + k - 1, k - 1), saturating
    let mut result = 1u64;
    for i in 1..k {
        result = result.saturating_mul(n + i).saturating_div(i);
        if result > ENUMERATION_BOUND * 64 {
            return u64::MAX;
        }
    }
    result
}

/// All equilibria of the equal-share game, by exhaustive enumeration of the
/// compositions of `n_devices` over the networks. Above [`ENUMERATION_BOUND`]
/// the result falls back to the single water-filling equilibrium and the
/// second return value is false.
pub fn enumerate_nash(bandwidths: &[f64], n_devices: usize) -> (Vec<NashAllocation>, bool) {
    let k = bandwidths.len();
    if compositions_count(n_devices as u64, k as u64) > ENUMERATION_BOUND {
        let counts = crate::policies::centralized_allocate(bandwidths, n_devices);
        return (vec![NashAllocation::new(counts, bandwidths)], false);
    }
    let mut found = Vec::new();
    let mut counts = vec![0usize; k];
    fn recurse(
        bandwidths: &[f64],
        counts: &mut Vec<usize>,
        index: usize,
        remaining: usize,
        found: &mut Vec<NashAllocation>,
    ) {
        if index == counts.len() - 1 {
            counts[index] = remaining;
            if satisfies_ne_condition(bandwidths, counts) {
                found.push(NashAllocation::new(counts.clone(), bandwidths));
            }
            return;
        }
        for c in 0..=remaining {
            counts[index] = c;
            recurse(bandwidths, counts, index + 1, remaining - c, found);
        }
    }
    recurse(bandwidths, &mut counts, 0, n_devices, &mut found);
    (found, true)
}

/// Maximum percentage by which any device's gain falls short of its
/// rank-paired equilibrium gain.
///
/// Gains are sorted ascending on both sides so the comparison does not
/// depend on which device ended up in which equilibrium seat.
pub fn distance_to_ne(current_gains: &[f64], ne: &NashAllocation) -> f64 {
    let mut current = current_gains.to_vec();
    current.sort_by(f64::total_cmp);
    let target = ne.gain_multiset();
    debug_assert_eq!(
        current.len(),
        target.len(),
        "device count must match the equilibrium"
    );
    let mut worst: f64 = 0.0;
    for (cur, ne_gain) in current.iter().zip(&target) {
        let shortfall = ne_gain - cur;
        if shortfall <= 0.0 {
            continue;
        }
        if *cur <= 0.0 {
            return DISTANCE_CAP_PERCENT;
        }
        worst = worst.max(shortfall / cur * 100.0);
    }
    worst.min(DISTANCE_CAP_PERCENT)
}

/// Distance to the closest of several equilibria; converging to any valid
/// equilibrium should not be penalized.
pub fn distance_to_nearest_ne(current_gains: &[f64], nes: &[NashAllocation]) -> f64 {
    nes.iter()
        .map(|ne| distance_to_ne(current_gains, ne))
        .fold(f64::INFINITY, f64::min)
}

/// Earliest slot from which every device holds probability `threshold` or
/// more on one fixed network through the end of the run.
///
/// Devices without a final-slot probability snapshot (no probability state,
/// or inactive at the end) are not evaluable and are skipped; if no device
/// is evaluable the run has no stable state.
pub fn detect_stable_state(
    prob_top: &[Vec<Option<(NetworkId, f64)>>],
    threshold: f64,
) -> Option<u64> {
    let mut latest_start: Option<u64> = None;
    let mut evaluated = false;
    for history in prob_top {
        let Some(Some((final_net, final_p))) = history.last() else {
            continue;
        };
        evaluated = true;
        if *final_p < threshold {
            return None;
        }
        let mut start = history.len() - 1;
        for i in (0..history.len()).rev() {
            match &history[i] {
                Some((net, p)) if net == final_net && *p >= threshold => start = i,
                _ => break,
            }
        }
        latest_start = Some(latest_start.unwrap_or(0).max(start as u64));
    }
    if evaluated {
        latest_start
    } else {
        None
    }
}

/// Population standard deviation of per-device cumulative downloads.
pub fn fairness_stddev(per_device_downloads: &[f64]) -> Result<f64> {
    if per_device_downloads.len() < 2 {
        return Err(Error::InvalidInput(
            "fairness needs at least two devices".into(),
        ));
    }
    let n = per_device_downloads.len() as f64;
    let mean = per_device_downloads.iter().sum::<f64>() / n;
    let var = per_device_downloads
        .iter()
        .map(|d| (d - mean).powi(2))
        .sum::<f64>()
        / n;
    Ok(var.sqrt())
}

/// Total capacity offered over the horizon, in (decimal) bytes.
pub fn total_capacity_bytes(aggregate_mbps: f64, horizon_slots: u64, slot_seconds: f64) -> f64 {
    aggregate_mbps * 1e6 / 8.0 * slot_seconds * horizon_slots as f64
}

/// Bytes of capacity lost to empty networks: a network-slot with no occupant
/// delivers nothing and cannot be recovered.
pub fn unutilized_resources(run: &RunResult, bandwidths: &[f64]) -> f64 {
    let mut lost = 0.0;
    for occupancy in &run.allocation_history {
        for (i, n) in occupancy.iter().enumerate() {
            if *n == 0 {
                lost += bandwidths[i] * 1e6 / 8.0 * run.slot_seconds;
            }
        }
    }
    lost
}

/// Per-device gains implied by an occupancy vector (ascending multiset).
fn gains_of_allocation(occupancy: &[usize], bandwidths: &[f64]) -> Vec<f64> {
    let mut gains = Vec::new();
    for (i, n) in occupancy.iter().enumerate() {
        if *n > 0 {
            gains.extend(std::iter::repeat_n(bandwidths[i] / *n as f64, *n));
        }
    }
    gains
}

/// Fraction of slots spent exactly at an equilibrium allocation, and within
/// `epsilon` percent of one.
///
/// Equilibria are recomputed per active-population size, so runs with joins
/// and leaves are measured against the right game at every slot.
pub fn time_at_ne(
    allocation_history: &[Vec<usize>],
    bandwidths: &[f64],
    epsilon: f64,
) -> (f64, f64) {
    use std::collections::HashMap;
    let mut ne_cache: HashMap<usize, Vec<NashAllocation>> = HashMap::new();
    let mut at_ne = 0usize;
    let mut at_eps = 0usize;
    let mut counted = 0usize;
    for occupancy in allocation_history {
        let n: usize = occupancy.iter().sum();
        if n == 0 {
            continue;
        }
        counted += 1;
        let nes = ne_cache
            .entry(n)
            .or_insert_with(|| enumerate_nash(bandwidths, n).0);
        if nes.iter().any(|ne| ne.counts == *occupancy) {
            at_ne += 1;
            at_eps += 1;
            continue;
        }
        let gains = gains_of_allocation(occupancy, bandwidths);
        if distance_to_nearest_ne(&gains, nes) <= epsilon {
            at_eps += 1;
        }
    }
    if counted == 0 {
        return (0.0, 0.0);
    }
    (
        at_ne as f64 / counted as f64,
        at_eps as f64 / counted as f64,
    )
}

/// Mean per-slot distance to the nearest equilibrium, one value per slot,
/// averaged across runs. Slots with no active devices yield NaN.
pub fn mean_distance_series(runs: &[RunResult], bandwidths: &[f64]) -> Vec<f64> {
    use std::collections::HashMap;
    if runs.is_empty() {
        return Vec::new();
    }
    let horizon = runs[0].horizon as usize;
    let mut ne_cache: HashMap<usize, Vec<NashAllocation>> = HashMap::new();
    let mut series = vec![0.0f64; horizon];
    let mut counts = vec![0usize; horizon];
    for run in runs {
        for (slot, occupancy) in run.allocation_history.iter().enumerate() {
            let n: usize = occupancy.iter().sum();
            if n == 0 {
                continue;
            }
            let nes = ne_cache
                .entry(n)
                .or_insert_with(|| enumerate_nash(bandwidths, n).0);
            let gains = gains_of_allocation(occupancy, bandwidths);
            series[slot] += distance_to_nearest_ne(&gains, nes);
            counts[slot] += 1;
        }
    }
    for (s, c) in series.iter_mut().zip(&counts) {
        *s = if *c > 0 { *s / *c as f64 } else { f64::NAN };
    }
    series
}

/// Average shortfall below the fair share `aggregate / n`, in percent.
pub fn distance_from_avg_bitrate(
    per_device_gains_mbps: &[f64],
    estimated_aggregate_mbps: f64,
    n_devices: usize,
) -> Result<f64> {
    if estimated_aggregate_mbps <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "aggregate bandwidth must be positive, got {estimated_aggregate_mbps}"
        )));
    }
    if n_devices == 0 || per_device_gains_mbps.is_empty() {
        return Err(Error::InvalidInput("need at least one device".into()));
    }
    let fair = estimated_aggregate_mbps / n_devices as f64;
    let total: f64 = per_device_gains_mbps
        .iter()
        .map(|g| (fair - g).max(0.0) * 100.0 / fair)
        .sum();
    Ok(total / per_device_gains_mbps.len() as f64)
}

/// Median with the usual even-length averaging.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

/// One row of the batch summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub total_switches: u64,
    pub total_resets: u64,
    pub stable_slot: Option<u64>,
    /// None when the scenario's devices see different network sets, where a
    /// single congestion game is not defined.
    pub fraction_at_ne: Option<f64>,
    pub fraction_at_eps: Option<f64>,
    pub total_download_bytes: f64,
    pub median_device_download_bytes: f64,
    pub download_stddev_bytes: f64,
}

pub fn summarize_run(run: &RunResult, scenario: &Scenario) -> RunSummary {
    let (frac_ne, frac_eps) = if scenario.trace.is_none() && scenario.has_uniform_availability() {
        let (a, b) = time_at_ne(
            &run.allocation_history,
            &scenario.bandwidths(),
            scenario.epsilon,
        );
        (Some(a), Some(b))
    } else {
        (None, None)
    };
    let stddev = fairness_stddev(&run.download_bytes).unwrap_or(0.0);
    RunSummary {
        seed: run.seed,
        total_switches: run.total_switches(),
        total_resets: run.total_resets(),
        stable_slot: detect_stable_state(&run.prob_top, 0.75),
        fraction_at_ne: frac_ne,
        fraction_at_eps: frac_eps,
        total_download_bytes: run.total_download_bytes(),
        median_device_download_bytes: median(&run.download_bytes),
        download_stddev_bytes: stddev,
    }
}

/// Serializes batch summaries, one row per run.
pub fn summary_csv(summaries: &[RunSummary]) -> String {
    let mut out = String::from(
        "seed,switches,resets,stable_slot,frac_at_ne,frac_at_eps,download_bytes,median_device_download_bytes,download_stddev_bytes\n",
    );
    for s in summaries {
        let stable = s.stable_slot.map(|v| v.to_string()).unwrap_or_default();
        let ne = s.fraction_at_ne.map(|v| v.to_string()).unwrap_or_default();
        let eps = s.fraction_at_eps.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            s.seed,
            s.total_switches,
            s.total_resets,
            stable,
            ne,
            eps,
            s.total_download_bytes,
            s.median_device_download_bytes,
            s.download_stddev_bytes
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unique_equilibrium_for_non_uniform_bandwidths() {
        let (nes, exact) = enumerate_nash(&[4.0, 7.0, 22.0], 20);
        assert!(exact);
        assert_eq!(nes.len(), 1);
        assert_eq!(nes[0].counts, vec![2, 4, 14]);
    }

    #[test]
    fn three_equilibria_for_uniform_bandwidths() {
        let (nes, exact) = enumerate_nash(&[11.0, 11.0, 11.0], 20);
        assert!(exact);
        let mut counts: Vec<Vec<usize>> = nes.iter().map(|n| n.counts.clone()).collect();
        counts.sort();
        assert_eq!(counts, vec![vec![6, 7, 7], vec![7, 6, 7], vec![7, 7, 6]]);
    }

    #[test]
    fn symmetric_two_network_case() {
        let (nes, _) = enumerate_nash(&[5.0, 5.0], 2);
        assert_eq!(nes.len(), 1);
        assert_eq!(nes[0].counts, vec![1, 1]);
    }

    #[test]
    fn every_enumerated_allocation_passes_deviation_check() {
        for (bw, n) in [
            (vec![4.0, 7.0, 22.0], 20usize),
            (vec![11.0, 11.0, 11.0], 20),
            (vec![16.0, 14.0, 22.0, 7.0, 4.0], 20),
            (vec![1.0, 10.0], 7),
        ] {
            let (nes, exact) = enumerate_nash(&bw, n);
            assert!(exact);
            assert!(!nes.is_empty(), "no equilibrium found for {bw:?}");
            for ne in nes {
                assert!(satisfies_ne_condition(&bw, &ne.counts));
                assert_eq!(ne.counts.iter().sum::<usize>(), n);
            }
        }
    }

    #[test]
    fn enumeration_falls_back_above_bound() {
        let bw = vec![1.0; 12];
        let (nes, exact) = enumerate_nash(&bw, 300);
        assert!(!exact);
        assert_eq!(nes.len(), 1);
        assert_eq!(nes[0].counts.iter().sum::<usize>(), 300);
        assert!(satisfies_ne_condition(&bw, &nes[0].counts));
    }

    #[test]
    fn distance_matches_worked_example() {
        // three devices at 1, 1 and 4 Mbps against an equal split of 6 Mbps
        let ne = NashAllocation::new(vec![3], &[6.0]);
        assert_eq!(distance_to_ne(&[1.0, 1.0, 4.0], &ne), 100.0);
    }

    #[test]
    fn distance_zero_at_equilibrium() {
        let (nes, _) = enumerate_nash(&[4.0, 7.0, 22.0], 20);
        let gains = nes[0].gain_multiset();
        assert_eq!(distance_to_ne(&gains, &nes[0]), 0.0);
    }

    #[test]
    fn distance_positive_off_equilibrium() {
        let (nes, _) = enumerate_nash(&[4.0, 7.0, 22.0], 20);
        // allocation (3, 5, 12)
        let gains = gains_of_allocation(&[3, 5, 12], &[4.0, 7.0, 22.0]);
        let d = distance_to_ne(&gains, &nes[0]);
        assert!(
            d > 0.0,
            "off-equilibrium allocation must have positive distance, got {d}"
        );
    }

    #[test]
    fn distance_caps_on_zero_gain() {
        let ne = NashAllocation::new(vec![2], &[4.0]);
        assert_eq!(distance_to_ne(&[0.0, 4.0], &ne), DISTANCE_CAP_PERCENT);
    }

    #[test]
    fn stable_state_detection() {
        let n = NetworkId(0);
        let hold = |p: f64| Some((n, p));
        // stable from slot 2 of 5
        let dev1 = vec![hold(0.3), hold(0.5), hold(0.9), hold(0.9), hold(0.9)];
        // stable from slot 1
        let dev2 = vec![hold(0.2), hold(0.8), hold(0.8), hold(0.8), hold(0.8)];
        assert_eq!(
            detect_stable_state(&[dev1.clone(), dev2.clone()], 0.75),
            Some(2)
        );
        // final-slot dip below the threshold spoils it
        let dev3 = vec![hold(0.9), hold(0.9), hold(0.9), hold(0.9), hold(0.7)];
        assert_eq!(detect_stable_state(&[dev1.clone(), dev3], 0.75), None);
        // changing the top network spoils it even at high probability
        let dev4 = vec![
            hold(0.9),
            hold(0.9),
            Some((NetworkId(1), 0.9)),
            hold(0.9),
            hold(0.9),
        ];
        assert_eq!(detect_stable_state(&[dev4], 0.75), Some(3));
        // no probability-bearing device: not evaluable
        let dev5: Vec<Option<(NetworkId, f64)>> = vec![None; 5];
        assert_eq!(detect_stable_state(&[dev5], 0.75), None);
    }

    #[test]
    fn fairness_examples() {
        assert_eq!(fairness_stddev(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
        assert_eq!(fairness_stddev(&[1.0, 3.0]).unwrap(), 1.0);
        assert!(fairness_stddev(&[1.0]).is_err());
        // invariant under permutation
        assert_eq!(
            fairness_stddev(&[1.0, 5.0, 2.0]).unwrap(),
            fairness_stddev(&[5.0, 2.0, 1.0]).unwrap()
        );
    }

    #[test]
    fn capacity_arithmetic_matches_stated_total() {
        // 33 Mbps for 1200 slots of 15 s is 74.25 decimal GB
        let bytes = total_capacity_bytes(33.0, 1200, 15.0);
        assert!((bytes - 74.25e9).abs() < 1e-3);
    }

    #[test]
    fn time_at_ne_fractions() {
        let bw = [4.0, 7.0, 22.0];
        let at_ne = vec![vec![2usize, 4, 14]; 10];
        let (a, b) = time_at_ne(&at_ne, &bw, 7.5);
        assert_eq!((a, b), (1.0, 1.0));
        let never = vec![vec![20usize, 0, 0]; 10];
        let (a, b) = time_at_ne(&never, &bw, 7.5);
        assert_eq!(a, 0.0);
        assert!(b <= 1.0);
        // ne fraction can never exceed the epsilon fraction
        let mixed: Vec<Vec<usize>> = (0..10)
            .map(|i| {
                if i % 2 == 0 {
                    vec![2, 4, 14]
                } else {
                    vec![3, 4, 13]
                }
            })
            .collect();
        let (a, b) = time_at_ne(&mixed, &bw, 7.5);
        assert!(a <= b);
    }

    #[test]
    fn avg_bitrate_distance_examples() {
        // everyone at the fair share
        assert_eq!(distance_from_avg_bitrate(&[2.0, 2.0], 4.0, 2).unwrap(), 0.0);
        // one starved, one doubled: mean of (100, 0)
        assert_eq!(
            distance_from_avg_bitrate(&[0.0, 4.0], 4.0, 2).unwrap(),
            50.0
        );
        // equal split of 33 over (7, 7, 6) devices on 11 Mbps networks
        let mut gains = vec![11.0 / 7.0; 14];
        gains.extend(vec![11.0 / 6.0; 6]);
        let d = distance_from_avg_bitrate(&gains, 33.0, 20).unwrap();
        assert!((d - 10.0 / 3.0).abs() < 1e-9, "got {d}");
        assert!(distance_from_avg_bitrate(&[1.0], 0.0, 1).is_err());
    }

    #[test]
    fn median_behaviour() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}

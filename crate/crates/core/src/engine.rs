//! Deterministic slotted simulation loop and the batch runner.
//!
//! Reproducibility contract: a `(scenario, seed)` pair yields a bit-identical
//! [`RunResult`] regardless of host or batch parallelism. Every device owns
//! two ChaCha12 streams (decisions and delays) derived from
//! `(master seed, device id, purpose)` with a splitmix64 mix, so recording
//! consumers can never perturb decisions.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::environment::{per_slot_gains, sample_delay, EventAction};
use crate::policies::{
    BlockExp3, Centralized, Exp3, FixedRandom, FullInformation, GreedyBaseline, PolicyKind,
    SelectionPolicy,
};
use crate::scenario::{DeviceGroup, Scenario};
use crate::smart::{SmartConfig, SmartExp3, SmartFeatures};
use crate::types::{
    scale_gain, DecisionKind, Error, GammaSchedule, NetworkId, PolicyParams, Result, ScaledGain,
};

/// One device-slot outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: u64,
    pub device: usize,
    pub network: NetworkId,
    pub bit_rate_mbps: f64,
    /// Scaled gain in [0, 1] fed to the learner (full-slot rate; switching
    /// cost deliberately excluded).
    pub gain: f64,
    /// Switching delay paid this slot; zero unless the network changed.
    pub delay_seconds: f64,
    pub kind: DecisionKind,
    pub block: u64,
}

/// Complete history of one simulation run plus per-device aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub horizon: u64,
    pub slot_seconds: f64,
    pub gain_scale_mbps: f64,
    pub records: Vec<SlotRecord>,
    /// `[slot][network]` occupancy counts over active devices.
    pub allocation_history: Vec<Vec<usize>>,
    /// `[device][slot]` top-probability snapshots (None when inactive or the
    /// policy has no probability distribution).
    pub prob_top: Vec<Vec<Option<(NetworkId, f64)>>>,
    /// Per-device slots whose network differs from the previous slot's.
    pub switch_counts: Vec<u64>,
    pub reset_counts: Vec<u64>,
    pub download_bytes: Vec<f64>,
    pub max_block_lengths: Vec<u64>,
    pub device_policies: Vec<PolicyKind>,
}

impl RunResult {
    pub fn total_switches(&self) -> u64 {
        self.switch_counts.iter().sum()
    }

    pub fn total_download_bytes(&self) -> f64 {
        self.download_bytes.iter().sum()
    }

    pub fn total_resets(&self) -> u64 {
        self.reset_counts.iter().sum()
    }

    /// Bytes actually delivered: rate × (slot − delay), decimal units.
    pub fn goodput_bytes(rate_mbps: f64, slot_seconds: f64, delay_seconds: f64) -> f64 {
        rate_mbps * 1e6 / 8.0 * (slot_seconds - delay_seconds).max(0.0)
    }

    /// Serializes the per-slot records in the documented CSV layout.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("slot,device,network,bitrate_mbps,gain,delay_s,kind,block\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.slot,
                r.device,
                r.network,
                r.bit_rate_mbps,
                r.gain,
                r.delay_seconds,
                r.kind.as_str(),
                r.block
            ));
        }
        out
    }
}

/// splitmix64 finalizer; documented so other implementations can reproduce
/// the exact streams.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream seed for `(master, device, purpose)`.
fn stream_seed(master: u64, device: u64, purpose: u64) -> u64 {
    mix64(mix64(mix64(master) ^ device) ^ purpose)
}

const PURPOSE_DECIDE: u64 = 0;
const PURPOSE_DELAY: u64 = 1;

struct Device {
    policy_kind: PolicyKind,
    policy: Box<dyn SelectionPolicy>,
    active: bool,
    available: Vec<NetworkId>,
    rng_decide: ChaCha12Rng,
    rng_delay: ChaCha12Rng,
    last_network: Option<NetworkId>,
    switches: u64,
    download_bytes: f64,
}

fn build_policy(
    scenario: &Scenario,
    group: &DeviceGroup,
    available: &[NetworkId],
    rank_in_group: usize,
) -> Result<Box<dyn SelectionPolicy>> {
    let o = &group.params;
    let params = PolicyParams {
        beta: o.beta.unwrap_or(0.1),
        gamma: GammaSchedule::InverseCubeRoot,
        gamma_indexing: o.gamma_indexing.unwrap_or_default(),
        slot_seconds: scenario.slot_seconds,
        gain_scale_mbps: scenario.gain_scale(),
    };
    let smart = |features: SmartFeatures| -> SmartConfig {
        let mut cfg = SmartConfig::new(params.clone(), features);
        if let Some(v) = o.greedy_coin_prob {
            cfg.greedy_coin_prob = v;
        }
        if let Some(v) = o.switch_back_window {
            cfg.switch_back_window = v;
        }
        if let Some(v) = o.reset_prob_threshold {
            cfg.reset_prob_threshold = v;
        }
        if let Some(v) = o.reset_min_block_length {
            cfg.reset_min_block_length = v;
        }
        if let Some(v) = o.reset_drop_fraction {
            cfg.reset_drop_fraction = v;
        }
        if let Some(v) = o.reset_min_consecutive_slots {
            cfg.reset_min_consecutive_slots = v;
        }
        cfg
    };
    Ok(match group.policy {
        PolicyKind::Exp3 => Box::new(Exp3::new(available, params.gamma)?),
        PolicyKind::BlockExp3 => Box::new(BlockExp3::new(available, params)?),
        PolicyKind::HybridBlockExp3 => {
            Box::new(SmartExp3::new(available, smart(SmartFeatures::hybrid()))?)
        }
        PolicyKind::SmartExp3 => Box::new(SmartExp3::new(available, smart(SmartFeatures::all()))?),
        PolicyKind::SmartExp3NoReset => {
            Box::new(SmartExp3::new(available, smart(SmartFeatures::no_reset()))?)
        }
        PolicyKind::Greedy => Box::new(GreedyBaseline::new(available)?),
        PolicyKind::FullInformation => Box::new(FullInformation::new(
            available,
            o.eta.unwrap_or(FullInformation::DEFAULT_ETA),
        )?),
        PolicyKind::Centralized => {
            let bandwidths: Vec<f64> = available
                .iter()
                .map(|id| scenario.networks[id.0].bandwidth_mbps)
                .collect();
            Box::new(Centralized::new(
                available,
                &bandwidths,
                group.count,
                rank_in_group,
            )?)
        }
        PolicyKind::FixedRandom => Box::new(FixedRandom::new(available)?),
    })
}

/// Runs one simulation. Configuration errors surface before slot 0.
pub fn run_simulation(scenario: &Scenario, seed: u64) -> Result<RunResult> {
    scenario.validate()?;
    let n_networks = scenario.networks.len();
    let gain_scale = scenario.gain_scale();
    let slot_seconds = scenario.slot_seconds;

    // events in application order
    let mut events: Vec<&crate::environment::ScenarioEvent> = scenario.events.iter().collect();
    events.sort_by_key(|e| e.at_slot);

    let mut devices: Vec<Device> = Vec::with_capacity(scenario.total_devices());
    let mut group_of_device: Vec<(usize, usize)> = Vec::new(); // (group index, rank)
    for (gi, g) in scenario.device_groups.iter().enumerate() {
        for rank in 0..g.count {
            group_of_device.push((gi, rank));
        }
    }
    for (device_id, (gi, rank)) in group_of_device.iter().enumerate() {
        let g = &scenario.device_groups[*gi];
        let available = g
            .networks
            .clone()
            .unwrap_or_else(|| scenario.all_networks());
        let policy = build_policy(scenario, g, &available, *rank)?;
        devices.push(Device {
            policy_kind: g.policy,
            policy,
            active: g.active_from_start,
            available,
            rng_decide: ChaCha12Rng::seed_from_u64(stream_seed(
                seed,
                device_id as u64,
                PURPOSE_DECIDE,
            )),
            rng_delay: ChaCha12Rng::seed_from_u64(stream_seed(
                seed,
                device_id as u64,
                PURPOSE_DELAY,
            )),
            last_network: None,
            switches: 0,
            download_bytes: 0.0,
        });
    }
    let n_devices = devices.len();

    let mut records = Vec::with_capacity(n_devices * scenario.horizon_slots as usize);
    let mut allocation_history = Vec::with_capacity(scenario.horizon_slots as usize);
    let mut prob_top = vec![Vec::with_capacity(scenario.horizon_slots as usize); n_devices];
    let mut next_event = 0usize;

    for slot in 0..scenario.horizon_slots {
        // population and availability changes land at the start of the slot
        while next_event < events.len() && events[next_event].at_slot == slot {
            let event = events[next_event];
            next_event += 1;
            let group_name = event.action.group();
            let gi = scenario
                .device_groups
                .iter()
                .position(|g| g.name == group_name)
                .expect("validated group");
            match &event.action {
                EventAction::Join { .. } => {
                    for (d, (dgi, rank)) in group_of_device.iter().enumerate() {
                        if *dgi == gi && !devices[d].active {
                            let g = &scenario.device_groups[gi];
                            let available = g
                                .networks
                                .clone()
                                .unwrap_or_else(|| scenario.all_networks());
                            devices[d].policy = build_policy(scenario, g, &available, *rank)?;
                            devices[d].available = available;
                            devices[d].active = true;
                            devices[d].last_network = None;
                        }
                    }
                }
                EventAction::Leave { .. } => {
                    for (d, (dgi, _)) in group_of_device.iter().enumerate() {
                        if *dgi == gi {
                            devices[d].active = false;
                            devices[d].last_network = None;
                        }
                    }
                }
                EventAction::SetNetworks { networks, .. } => {
                    for (d, (dgi, _)) in group_of_device.iter().enumerate() {
                        if *dgi != gi {
                            continue;
                        }
                        let device = &mut devices[d];
                        let added: Vec<NetworkId> = networks
                            .iter()
                            .copied()
                            .filter(|n| !device.available.contains(n))
                            .collect();
                        let removed: Vec<NetworkId> = device
                            .available
                            .iter()
                            .copied()
                            .filter(|n| !networks.contains(n))
                            .collect();
                        if added.is_empty() && removed.is_empty() {
                            continue;
                        }
                        device.policy.on_network_set_change(&added, &removed)?;
                        // mirror the policies' ordering (survivors first,
                        // then additions) so per-network feedback vectors
                        // stay aligned with policy state
                        device.available.retain(|n| networks.contains(n));
                        device.available.extend(added.iter().copied());
                    }
                }
            }
        }

        // per-slot capacities: static bandwidths or the trace row
        let capacities: Vec<f64> = match &scenario.trace {
            Some(t) => vec![t.wifi_mbps[slot as usize], t.cellular_mbps[slot as usize]],
            None => scenario.bandwidths(),
        };

        // decisions
        let mut decisions: Vec<Option<crate::types::Decision>> = vec![None; n_devices];
        for (d, device) in devices.iter_mut().enumerate() {
            if device.active {
                decisions[d] = Some(device.policy.decide(&mut device.rng_decide)?);
            }
        }

        // allocation and equal-share rates
        let active_allocation: Vec<NetworkId> =
            decisions.iter().flatten().map(|dec| dec.network).collect();
        let rates_active = per_slot_gains(&active_allocation, &capacities);
        let mut occupancy = vec![0usize; n_networks];
        for net in &active_allocation {
            occupancy[net.0] += 1;
        }

        let mut rate_of_device = vec![0.0f64; n_devices];
        let mut idx = 0usize;
        for (d, dec) in decisions.iter().enumerate() {
            if dec.is_some() {
                rate_of_device[d] = rates_active[idx];
                idx += 1;
            }
        }

        // feedback, delays, records
        for d in 0..n_devices {
            let Some(decision) = decisions[d] else {
                prob_top[d].push(None);
                continue;
            };
            let device = &mut devices[d];
            let network = decision.network;
            let rate = rate_of_device[d];

            let delay = match device.last_network {
                Some(prev) if prev != network => {
                    device.switches += 1;
                    sample_delay(
                        &scenario.networks[network.0].delay,
                        slot_seconds,
                        &mut device.rng_delay,
                    )
                }
                _ => 0.0,
            };
            device.last_network = Some(network);
            device.download_bytes += RunResult::goodput_bytes(rate, slot_seconds, delay);

            let gain = scale_gain(rate, gain_scale)?;
            let all_gains: Option<Vec<ScaledGain>> = if device.policy_kind
                == PolicyKind::FullInformation
            {
                // the gain each network would yield if this device moved
                // there on its own (it already counts in its own network)
                let v: Result<Vec<ScaledGain>> = device
                    .available
                    .iter()
                    .map(|id| {
                        let extra = usize::from(*id != network);
                        let would_be = capacities[id.0] / (occupancy[id.0] + extra).max(1) as f64;
                        scale_gain(would_be, gain_scale)
                    })
                    .collect();
                Some(v?)
            } else {
                None
            };
            device.policy.observe(gain, all_gains.as_deref())?;

            prob_top[d].push(device.policy.probability_top());
            records.push(SlotRecord {
                slot,
                device: d,
                network,
                bit_rate_mbps: rate,
                gain: gain.value(),
                delay_seconds: delay,
                kind: decision.kind,
                block: decision.block_index,
            });
        }
        allocation_history.push(occupancy);
    }

    Ok(RunResult {
        seed,
        horizon: scenario.horizon_slots,
        slot_seconds,
        gain_scale_mbps: gain_scale,
        records,
        allocation_history,
        prob_top,
        switch_counts: devices.iter().map(|d| d.switches).collect(),
        reset_counts: devices.iter().map(|d| d.policy.reset_count()).collect(),
        download_bytes: devices.iter().map(|d| d.download_bytes).collect(),
        max_block_lengths: devices
            .iter()
            .map(|d| d.policy.max_assigned_block_length())
            .collect(),
        device_policies: devices.iter().map(|d| d.policy_kind).collect(),
    })
}

/// Runs one simulation per seed. Results are ordered like the seed list and
/// identical to sequential execution whatever the parallelism
/// (0 means one worker per core).
pub fn run_batch(scenario: &Scenario, seeds: &[u64], parallelism: usize) -> Result<Vec<RunResult>> {
    scenario.validate()?;
    {
        let mut sorted = seeds.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(Error::Config("batch seeds must be distinct".into()));
        }
    }
    if parallelism == 1 {
        return seeds.iter().map(|s| run_simulation(scenario, *s)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        seeds
            .par_iter()
            .map(|s| run_simulation(scenario, *s))
            .collect()
    })
}

//! Experiment description: networks, device groups with their policies,
//! horizon, events, and the file format the CLI consumes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::environment::{EventAction, NetworkModel, ScenarioEvent, TracePair};
use crate::policies::PolicyKind;
use crate::types::{Error, GammaIndexing, NetworkId, Result};

fn default_epsilon() -> f64 {
    7.5
}

fn default_seeds() -> u64 {
    50
}

fn default_true() -> bool {
    true
}

/// Per-group knob overrides; anything unset falls back to the defaults used
/// throughout the evaluation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Learning rate for the full-information baseline.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_indexing: Option<GammaIndexing>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub greedy_coin_prob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub switch_back_window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reset_prob_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reset_min_block_length: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reset_drop_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reset_min_consecutive_slots: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceGroup {
    pub name: String,
    pub count: usize,
    pub policy: PolicyKind,
    /// Initially available networks; `None` means all of them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub networks: Option<Vec<NetworkId>>,
    #[serde(default = "default_true")]
    pub active_from_start: bool,
    #[serde(default, skip_serializing_if = "is_default_overrides")]
    pub params: PolicyOverrides,
}

fn is_default_overrides(p: &PolicyOverrides) -> bool {
    *p == PolicyOverrides::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub horizon_slots: u64,
    pub slot_seconds: f64,
    /// Bit-rate divisor for gains; defaults to the largest network bandwidth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_scale_mbps: Option<f64>,
    /// Percent threshold for the epsilon-equilibrium report.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Default number of seeds for batch runs.
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    pub networks: Vec<NetworkModel>,
    pub device_groups: Vec<DeviceGroup>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<ScenarioEvent>,
    /// Per-slot capacities for single-device playback; set programmatically,
    /// never read from a scenario file.
    #[serde(skip)]
    pub trace: Option<TracePair>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_slots == 0 {
            return Err(Error::Config("horizon_slots must be at least 1".into()));
        }
        if !(self.slot_seconds > 0.0) {
            return Err(Error::Config("slot_seconds must be positive".into()));
        }
        if self.networks.is_empty() {
            return Err(Error::Config("at least one network required".into()));
        }
        for (i, n) in self.networks.iter().enumerate() {
            if n.id.0 != i {
                return Err(Error::Config(format!(
                    "network ids must be contiguous from 0; entry {i} has id {}",
                    n.id
                )));
            }
            n.validate()?;
        }
        if let Some(s) = self.gain_scale_mbps {
            if !(s > 0.0) {
                return Err(Error::Config("gain_scale_mbps must be positive".into()));
            }
        }
        if self.epsilon < 0.0 {
            return Err(Error::Config("epsilon must be non-negative".into()));
        }
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be at least 1".into()));
        }
        if self.total_devices() == 0 {
            return Err(Error::Config("at least one device required".into()));
        }
        for g in &self.device_groups {
            if g.count == 0 {
                return Err(Error::Config(format!("device group '{}' is empty", g.name)));
            }
            if let Some(nets) = &g.networks {
                if nets.is_empty() {
                    return Err(Error::Config(format!(
                        "device group '{}' has an empty network set",
                        g.name
                    )));
                }
                for id in nets {
                    if id.0 >= self.networks.len() {
                        return Err(Error::Config(format!(
                            "device group '{}' references unknown network {id}",
                            g.name
                        )));
                    }
                }
            }
        }
        for e in &self.events {
            if e.at_slot >= self.horizon_slots {
                return Err(Error::Config(format!(
                    "event at slot {} is beyond the horizon {}",
                    e.at_slot, self.horizon_slots
                )));
            }
            let group = e.action.group();
            if !self.device_groups.iter().any(|g| g.name == group) {
                return Err(Error::Config(format!(
                    "event references unknown group '{group}'"
                )));
            }
            if let EventAction::SetNetworks { networks, .. } = &e.action {
                if networks.is_empty() {
                    return Err(Error::Config("set_networks event with empty set".into()));
                }
                for id in networks {
                    if id.0 >= self.networks.len() {
                        return Err(Error::Config(format!(
                            "set_networks event references unknown network {id}"
                        )));
                    }
                }
            }
        }
        if let Some(t) = &self.trace {
            if self.networks.len() != 2 {
                return Err(Error::Config(
                    "trace playback needs exactly two networks".into(),
                ));
            }
            if (t.len() as u64) < self.horizon_slots {
                return Err(Error::Config(format!(
                    "trace has {} slots, horizon wants {}",
                    t.len(),
                    self.horizon_slots
                )));
            }
        }
        Ok(())
    }

    pub fn total_devices(&self) -> usize {
        self.device_groups.iter().map(|g| g.count).sum()
    }

    /// The divisor mapping bit rates to [0, 1] gains: explicit override,
    /// else the largest trace rate (playback) or network bandwidth.
    pub fn gain_scale(&self) -> f64 {
        if let Some(s) = self.gain_scale_mbps {
            return s;
        }
        if let Some(t) = &self.trace {
            return t.max_rate().max(f64::MIN_POSITIVE);
        }
        self.networks
            .iter()
            .map(|n| n.bandwidth_mbps)
            .fold(0.0f64, f64::max)
    }

    pub fn bandwidths(&self) -> Vec<f64> {
        self.networks.iter().map(|n| n.bandwidth_mbps).collect()
    }

    /// All network ids, the default availability set.
    pub fn all_networks(&self) -> Vec<NetworkId> {
        (0..self.networks.len()).map(NetworkId).collect()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| Error::Config(format!("scenario parse: {e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("scenario serialize: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read scenario '{}': {e}", path.display()))
        })?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// True when every device group sees the full network set for the whole
    /// run; only then is a single shared congestion game defined and the
    /// equilibrium-distance reporting meaningful.
    pub fn has_uniform_availability(&self) -> bool {
        let all = self.all_networks();
        self.device_groups.iter().all(|g| match &g.networks {
            None => true,
            Some(nets) => {
                let mut sorted = nets.clone();
                sorted.sort_unstable();
                sorted == all
            }
        }) && !self
            .events
            .iter()
            .any(|e| matches!(e.action, EventAction::SetNetworks { .. }))
    }

    /// Replaces every group's policy, for side-by-side algorithm comparisons.
    pub fn with_policy(mut self, policy: PolicyKind) -> Self {
        for g in &mut self.device_groups {
            g.policy = policy;
        }
        self
    }
}

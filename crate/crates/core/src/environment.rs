//! The world model: networks that split their bandwidth equally among
//! occupants, switching-delay distributions, population events, and recorded
//! bit-rate traces for playback.

use std::io::BufRead;

use rand::RngCore;
use rand_distr::{Distribution, Normal, StudentT as StudentTDist};
use serde::{Deserialize, Serialize};

use crate::types::{Error, NetworkId, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    Wifi,
    Cellular,
}

/// Switching-delay distribution. Samples are truncated into
/// `[0, slot_seconds]`; a slot is sized to exceed any realistic delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DelayModel {
    Constant {
        seconds: f64,
    },
    /// Johnson's SU distribution: `xi + lambda * sinh((z - gamma) / delta)`
    /// with standard normal `z`.
    JohnsonSu {
        gamma: f64,
        delta: f64,
        xi: f64,
        lambda: f64,
    },
    /// Location-scale Student's t with `nu` degrees of freedom.
    StudentT {
        nu: f64,
        loc: f64,
        scale: f64,
    },
}

impl DelayModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            DelayModel::Constant { seconds } => seconds.is_finite() && *seconds >= 0.0,
            DelayModel::JohnsonSu {
                gamma,
                delta,
                xi,
                lambda,
            } => gamma.is_finite() && xi.is_finite() && *delta > 0.0 && *lambda > 0.0,
            DelayModel::StudentT { nu, loc, scale } => *nu > 0.0 && loc.is_finite() && *scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid delay model parameters: {self:?}"
            )))
        }
    }

    /// Mean of the untruncated distribution (for `StudentT`, defined for
    /// `nu > 1`). Used by tests as an independent oracle.
    pub fn untruncated_mean(&self) -> f64 {
        match self {
            DelayModel::Constant { seconds } => *seconds,
            DelayModel::JohnsonSu {
                gamma,
                delta,
                xi,
                lambda,
            } => xi - lambda * (0.5 / (delta * delta)).exp() * (gamma / delta).sinh(),
            DelayModel::StudentT { loc, .. } => *loc,
        }
    }
}

/// Draws one switching delay, truncated into `[0, slot_seconds]`.
pub fn sample_delay(model: &DelayModel, slot_seconds: f64, rng: &mut dyn RngCore) -> f64 {
    let raw = match model {
        DelayModel::Constant { seconds } => *seconds,
        DelayModel::JohnsonSu {
            gamma,
            delta,
            xi,
            lambda,
        } => {
            let z = Normal::new(0.0, 1.0).expect("standard normal").sample(rng);
            xi + lambda * ((z - gamma) / delta).sinh()
        }
        DelayModel::StudentT { nu, loc, scale } => {
            let t = StudentTDist::new(*nu).expect("validated nu").sample(rng);
            loc + scale * t
        }
    };
    raw.clamp(0.0, slot_seconds)
}

/// One shared resource.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub id: NetworkId,
    pub bandwidth_mbps: f64,
    pub kind: NetworkKind,
    pub delay: DelayModel,
}

impl NetworkModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_mbps > 0.0) || !self.bandwidth_mbps.is_finite() {
            return Err(Error::Config(format!(
                "network {} bandwidth must be positive, got {}",
                self.id, self.bandwidth_mbps
            )));
        }
        self.delay.validate()
    }
}

/// A network's bandwidth is split equally among the devices on it: each
/// device mapped to network `i` with occupancy `n_i` receives
/// `capacity_i / n_i` Mbps.
pub fn per_slot_gains(allocation: &[NetworkId], capacities: &[f64]) -> Vec<f64> {
    let mut occupancy = vec![0usize; capacities.len()];
    for net in allocation {
        occupancy[net.0] += 1;
    }
    allocation
        .iter()
        .map(|net| capacities[net.0] / occupancy[net.0] as f64)
        .collect()
}

/// Population and availability changes, applied at the start of `at_slot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub at_slot: u64,
    #[serde(flatten)]
    pub action: EventAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum EventAction {
    /// Activates the group's devices with fresh policy state.
    Join { group: String },
    /// Deactivates the group's devices; their state is frozen.
    Leave { group: String },
    /// Replaces the group's available-network set.
    SetNetworks {
        group: String,
        networks: Vec<NetworkId>,
    },
}

impl EventAction {
    pub fn group(&self) -> &str {
        match self {
            EventAction::Join { group }
            | EventAction::Leave { group }
            | EventAction::SetNetworks { group, .. } => group,
        }
    }
}

/// Simultaneously recorded per-slot bit rates of a wifi and a cellular
/// network, for single-device playback.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePair {
    pub wifi_mbps: Vec<f64>,
    pub cellular_mbps: Vec<f64>,
}

impl TracePair {
    pub fn new(wifi_mbps: Vec<f64>, cellular_mbps: Vec<f64>) -> Result<Self> {
        if wifi_mbps.len() != cellular_mbps.len() {
            return Err(Error::Config(format!(
                "trace series lengths differ: {} wifi rows vs {} cellular rows",
                wifi_mbps.len(),
                cellular_mbps.len()
            )));
        }
        if wifi_mbps.is_empty() {
            return Err(Error::Config("trace has no rows".into()));
        }
        for (i, v) in wifi_mbps.iter().chain(cellular_mbps.iter()).enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::Config(format!(
                    "trace value {v} at entry {i} is invalid"
                )));
            }
        }
        Ok(TracePair {
            wifi_mbps,
            cellular_mbps,
        })
    }

    /// Parses `slot,wifi_mbps,cellular_mbps` rows (header required).
    pub fn from_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("trace CSV is empty".into()))?
            .map_err(Error::Io)?;
        if header.trim() != "slot,wifi_mbps,cellular_mbps" {
            return Err(Error::Config(format!(
                "trace CSV header must be 'slot,wifi_mbps,cellular_mbps', got '{header}'"
            )));
        }
        let mut wifi = Vec::new();
        let mut cellular = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line.map_err(Error::Io)?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Config(format!(
                    "trace row {}: expected 3 fields, got {}",
                    row + 2,
                    fields.len()
                )));
            }
            let parse = |s: &str, what: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|_| {
                    Error::Config(format!("trace row {}: bad {what} value '{s}'", row + 2))
                })
            };
            let _slot = parse(fields[0], "slot")?;
            wifi.push(parse(fields[1], "wifi_mbps")?);
            cellular.push(parse(fields[2], "cellular_mbps")?);
        }
        TracePair::new(wifi, cellular)
    }

    pub fn len(&self) -> usize {
        self.wifi_mbps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wifi_mbps.is_empty()
    }

    pub fn max_rate(&self) -> f64 {
        self.wifi_mbps
            .iter()
            .chain(self.cellular_mbps.iter())
            .copied()
            .fold(0.0f64, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("slot,wifi_mbps,cellular_mbps\n");
        for (slot, (w, c)) in self.wifi_mbps.iter().zip(&self.cellular_mbps).enumerate() {
            out.push_str(&format!("{slot},{w},{c}\n"));
        }
        out
    }
}

/// Recorded bit rate of a trace network at slot `t`; network 0 is the wifi
/// series, network 1 the cellular one.
pub fn trace_gain(trace: &TracePair, t: u64, network: NetworkId) -> Result<f64> {
    if t as usize >= trace.len() {
        return Err(Error::EndOfTrace(t));
    }
    match network.0 {
        0 => Ok(trace.wifi_mbps[t as usize]),
        1 => Ok(trace.cellular_mbps[t as usize]),
        other => Err(Error::InvalidInput(format!(
            "trace has networks 0 and 1, asked for {other}"
        ))),
    }
}

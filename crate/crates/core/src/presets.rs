//! Ready-made scenarios for the experiments the simulator reproduces:
//! two static settings, three dynamic variants, and mixed-policy
//! robustness checks.

use crate::environment::{DelayModel, EventAction, NetworkKind, NetworkModel, ScenarioEvent};
use crate::policies::PolicyKind;
use crate::scenario::{DeviceGroup, PolicyOverrides, Scenario};
use crate::types::NetworkId;

/// Default wifi switching-delay model (seconds).
pub fn wifi_delay() -> DelayModel {
    DelayModel::JohnsonSu {
        gamma: 0.3,
        delta: 1.0,
        xi: 0.5,
        lambda: 1.0,
    }
}

/// Default cellular switching-delay model (seconds).
pub fn cellular_delay() -> DelayModel {
    DelayModel::StudentT {
        nu: 5.0,
        loc: 2.0,
        scale: 0.5,
    }
}

fn network(id: usize, bandwidth: f64, kind: NetworkKind) -> NetworkModel {
    let delay = match kind {
        NetworkKind::Wifi => wifi_delay(),
        NetworkKind::Cellular => cellular_delay(),
    };
    NetworkModel {
        id: NetworkId(id),
        bandwidth_mbps: bandwidth,
        kind,
        delay,
    }
}

fn group(name: &str, count: usize, policy: PolicyKind) -> DeviceGroup {
    DeviceGroup {
        name: name.into(),
        count,
        policy,
        networks: None,
        active_from_start: true,
        params: PolicyOverrides::default(),
    }
}

/// Non-uniform bandwidths (4, 7 and 22 Mbps), 20 devices, one equilibrium.
pub fn setting1(policy: PolicyKind) -> Scenario {
    Scenario {
        name: "setting1".into(),
        horizon_slots: 1200,
        slot_seconds: 15.0,
        gain_scale_mbps: None,
        epsilon: 7.5,
        seeds: 50,
        networks: vec![
            network(0, 4.0, NetworkKind::Wifi),
            network(1, 7.0, NetworkKind::Wifi),
            network(2, 22.0, NetworkKind::Cellular),
        ],
        device_groups: vec![group("all", 20, policy)],
        events: vec![],
        trace: None,
    }
}

/// Uniform bandwidths (11 Mbps each), 20 devices, three equilibria.
pub fn setting2(policy: PolicyKind) -> Scenario {
    Scenario {
        name: "setting2".into(),
        networks: vec![
            network(0, 11.0, NetworkKind::Wifi),
            network(1, 11.0, NetworkKind::Wifi),
            network(2, 11.0, NetworkKind::Cellular),
        ],
        ..setting1(policy)
    }
}

/// Nine devices join at slot 400 and leave again at slot 800.
pub fn dynamic1(policy: PolicyKind) -> Scenario {
    let mut s = setting1(policy);
    s.name = "dynamic1".into();
    s.device_groups = vec![group("stayers", 11, policy), {
        let mut g = group("transients", 9, policy);
        g.active_from_start = false;
        g
    }];
    s.events = vec![
        ScenarioEvent {
            at_slot: 400,
            action: EventAction::Join {
                group: "transients".into(),
            },
        },
        ScenarioEvent {
            at_slot: 800,
            action: EventAction::Leave {
                group: "transients".into(),
            },
        },
    ];
    s
}

/// Sixteen of twenty devices leave at slot 600, freeing resources.
pub fn dynamic2(policy: PolicyKind) -> Scenario {
    let mut s = setting1(policy);
    s.name = "dynamic2".into();
    s.device_groups = vec![group("stayers", 4, policy), group("leavers", 16, policy)];
    s.events = vec![ScenarioEvent {
        at_slot: 600,
        action: EventAction::Leave {
            group: "leavers".into(),
        },
    }];
    s
}

/// Five networks across three service areas; eight devices move from the
/// food court to the study area at slot 400 and on to the bus stop at 800.
/// The cellular network (id 0) covers every area.
pub fn mobility(policy: PolicyKind) -> Scenario {
    let food_court = Some(vec![NetworkId(0), NetworkId(1), NetworkId(2)]);
    let study_area = Some(vec![NetworkId(0), NetworkId(3)]);
    let bus_stop = Some(vec![NetworkId(0), NetworkId(4)]);
    Scenario {
        name: "mobility".into(),
        horizon_slots: 1200,
        slot_seconds: 15.0,
        gain_scale_mbps: None,
        epsilon: 7.5,
        seeds: 50,
        networks: vec![
            network(0, 16.0, NetworkKind::Cellular),
            network(1, 14.0, NetworkKind::Wifi),
            network(2, 22.0, NetworkKind::Wifi),
            network(3, 7.0, NetworkKind::Wifi),
            network(4, 4.0, NetworkKind::Wifi),
        ],
        device_groups: vec![
            DeviceGroup {
                networks: food_court.clone(),
                ..group("food_court", 2, policy)
            },
            DeviceGroup {
                networks: food_court,
                ..group("movers", 8, policy)
            },
            DeviceGroup {
                networks: study_area.clone(),
                ..group("study_area", 5, policy)
            },
            DeviceGroup {
                networks: bus_stop.clone(),
                ..group("bus_stop", 5, policy)
            },
        ],
        events: vec![
            ScenarioEvent {
                at_slot: 400,
                action: EventAction::SetNetworks {
                    group: "movers".into(),
                    networks: vec![NetworkId(0), NetworkId(3)],
                },
            },
            ScenarioEvent {
                at_slot: 800,
                action: EventAction::SetNetworks {
                    group: "movers".into(),
                    networks: vec![NetworkId(0), NetworkId(4)],
                },
            },
        ],
        trace: None,
    }
}

/// Mixed populations pitting the adaptive policy against greedy devices.
pub fn robustness(smart_count: usize, greedy_count: usize) -> Scenario {
    let mut s = setting1(PolicyKind::SmartExp3);
    s.name = format!("robustness_{smart_count}_{greedy_count}");
    s.device_groups = vec![
        group("smart", smart_count, PolicyKind::SmartExp3),
        group("greedy", greedy_count, PolicyKind::Greedy),
    ];
    s
}

/// Every preset shipped with the repository, by name.
pub fn all() -> Vec<Scenario> {
    vec![
        setting1(PolicyKind::SmartExp3),
        setting2(PolicyKind::SmartExp3),
        dynamic1(PolicyKind::SmartExp3),
        dynamic2(PolicyKind::SmartExp3),
        mobility(PolicyKind::SmartExp3),
        robustness(1, 19),
        robustness(10, 10),
        robustness(19, 1),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for s in all() {
            s.validate().unwrap_or_else(|e| panic!("{}: {e}", s.name));
            let text = s.to_toml_string().unwrap();
            let parsed = Scenario::from_toml_str(&text).unwrap();
            assert_eq!(s, parsed, "round trip changed {}", s.name);
        }
    }

    #[test]
    fn dynamic_groups_cover_the_population() {
        let d1 = dynamic1(PolicyKind::SmartExp3);
        assert_eq!(d1.total_devices(), 20);
        let d2 = dynamic2(PolicyKind::SmartExp3);
        assert_eq!(d2.total_devices(), 20);
        assert_eq!(mobility(PolicyKind::SmartExp3).total_devices(), 20);
    }
}

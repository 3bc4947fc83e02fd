//! Personal-area-network configuration.
//!
//! Each player pools their devices into a PAN that joins the mesh as a
//! single node. One device coordinates the PAN, one device (if any has a
//! long-range interface) acts as the gateway towards the external server,
//! and the devices' resources are aggregated into the node profile the rest
//! of the crate works with. All tie-breaks are by smallest device id so the
//! outcome never depends on input order.

use crate::model::{DeviceId, DeviceProfile, LinkClass, LinkSpec, NodeId, NodeProfile, Position};
use thiserror::Error;

/// Battery level below which a link's energy cost counts against its score.
pub const DEFAULT_LOW_BATTERY_THRESHOLD: u64 = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PanError {
    #[error("cannot configure a PAN from an empty device list")]
    EmptyDeviceList,
    #[error("devices belong to different owners: {0} and {1}")]
    MixedOwners(String, String),
}

/// The outcome of configuring one player's PAN.
#[derive(Debug, Clone, PartialEq)]
pub struct PanConfig {
    /// Device coordinating the PAN.
    pub coordinator: DeviceId,
    /// Device relaying long-range traffic; the coordinator when local-only.
    pub gateway: DeviceId,
    /// True when no device has a long-range interface.
    pub local_only: bool,
    /// Aggregated profile the PAN presents to the mesh.
    pub node: NodeProfile,
}

fn check_same_owner(devices: &[DeviceProfile]) -> Result<(), PanError> {
    let first = &devices[0].owner;
    for d in &devices[1..] {
        if d.owner != *first {
            return Err(PanError::MixedOwners(first.clone(), d.owner.clone()));
        }
    }
    Ok(())
}

/// Elects the PAN coordinator: the device with the most compute, breaking
/// ties by the larger battery and then by the smallest device id.
pub fn elect_coordinator(devices: &[DeviceProfile]) -> Result<DeviceId, PanError> {
    if devices.is_empty() {
        return Err(PanError::EmptyDeviceList);
    }
    check_same_owner(devices)?;
    let winner = devices
        .iter()
        .max_by(|a, b| {
            (a.compute, a.battery)
                .cmp(&(b.compute, b.battery))
                .then_with(|| b.device_id.cmp(&a.device_id))
        })
        .expect("non-empty device list");
    Ok(winner.device_id.clone())
}

/// Scores a link for gateway selection: its bandwidth minus its monetary
/// cost, minus its energy cost too when the device battery is below
/// `low_battery_threshold`.
pub fn score_link(link: &LinkSpec, battery: u64, low_battery_threshold: u64) -> f64 {
    let energy_penalty = if battery < low_battery_threshold {
        link.energy_per_message as f64
    } else {
        0.0
    };
    link.bandwidth - link.cost_per_message - energy_penalty
}

/// Selects the gateway device: the one whose best long-range link scores
/// highest, ties broken by smallest device id. When no device has a
/// long-range interface the coordinator doubles as gateway and the PAN is
/// flagged local-only.
pub fn select_gateway(
    devices: &[DeviceProfile],
    low_battery_threshold: u64,
) -> Result<(DeviceId, bool), PanError> {
    if devices.is_empty() {
        return Err(PanError::EmptyDeviceList);
    }
    check_same_owner(devices)?;
    let mut best: Option<(f64, &DeviceId)> = None;
    for device in devices {
        let device_best = device
            .interfaces
            .iter()
            .filter(|l| l.class == LinkClass::LongRange)
            .map(|l| score_link(l, device.battery, low_battery_threshold))
            .fold(None, |acc: Option<f64>, s| {
                Some(acc.map_or(s, |a| a.max(s)))
            });
        if let Some(score) = device_best {
            let better = match best {
                None => true,
                Some((bs, bid)) => {
                    score > bs || (score == bs && device.device_id < *bid)
                }
            };
            if better {
                best = Some((score, &device.device_id));
            }
        }
    }
    match best {
        Some((_, id)) => Ok((id.clone(), false)),
        None => Ok((elect_coordinator(devices)?, true)),
    }
}

/// Aggregates a device list into a PAN configuration.
///
/// The node's compute is the sum over devices, its battery the minimum over
/// devices (the PAN dies with its weakest member), and its interface set the
/// deduplicated union of the devices' interfaces. The node id is the owning
/// player's id. The `trusted`, `capacity_cap`, and `external` attributes are
/// left at their defaults for the caller to fill in.
pub fn aggregate_pan(
    devices: &[DeviceProfile],
    position: Position,
    radio_range: f64,
    low_battery_threshold: u64,
) -> Result<PanConfig, PanError> {
    if devices.is_empty() {
        return Err(PanError::EmptyDeviceList);
    }
    check_same_owner(devices)?;
    let coordinator = elect_coordinator(devices)?;
    let (gateway, local_only) = select_gateway(devices, low_battery_threshold)?;

    let compute = devices.iter().map(|d| d.compute).sum();
    let battery = devices
        .iter()
        .map(|d| d.battery)
        .min()
        .expect("non-empty device list");
    let mut interfaces: Vec<LinkSpec> = Vec::new();
    for device in devices {
        for link in &device.interfaces {
            if !interfaces.contains(link) {
                interfaces.push(link.clone());
            }
        }
    }
    interfaces.sort_by(|a, b| {
        (a.class, a.energy_per_message)
            .cmp(&(b.class, b.energy_per_message))
            .then(a.bandwidth.total_cmp(&b.bandwidth))
            .then(a.cost_per_message.total_cmp(&b.cost_per_message))
    });

    let node = NodeProfile {
        node_id: NodeId(devices[0].owner.clone()),
        position,
        radio_range,
        compute,
        battery,
        interfaces,
        capacity_cap: None,
        trusted: false,
        external: false,
    };
    Ok(PanConfig {
        coordinator,
        gateway,
        local_only,
        node,
    })
}

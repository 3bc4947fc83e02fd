//! Scenario files: the experiment input format.
//!
//! A scenario is a strict JSON document (unknown keys are rejected) that
//! describes the players and their pooled devices, the optional servers, the
//! bots, the service catalog, and the knobs of the run. This module owns the
//! schema; the field list below is normative and versioned.
//!
//! # Schema, version 1
//!
//! Top level:
//! - `schema_version`: integer, optional, must be 1 when present.
//! - `arena`: `{ "width", "height" }`, both finite and positive. Required.
//! - `players`: non-empty list, see below. Required.
//! - `server`: optional in-arena server node, see below.
//! - `external_server`: optional; `{ "id", "compute", "battery"?,
//!   "capacity_cap"? }`. Reached only through long-range interfaces; battery
//!   defaults to 2^64-1 (mains powered). Counts as trusted.
//! - `bots`: optional list of `{ "id", "event_rate"?, "workload_per_client"? }`.
//!   Each bot adds an `artificial_intelligence` service named `ai.<id>`
//!   (workload default 1); the hosting node emits the bot's events at
//!   `event_rate` (default 1.0) without dead-reckoning suppression.
//! - `services`: optional list of `{ "id", "kind", "workload_per_client"?,
//!   "state_bearing"? }`. `kind` is one of the placeable module kinds
//!   (classes distributable, distributable-replicable, or trusted-node);
//!   mandatory-everywhere kinds are implicit on all nodes (model their cost
//!   with `mandatory_workload`) and the virtual map store is implicit on the
//!   external server. `workload_per_client` defaults to 1, `state_bearing`
//!   to true for `game_state_management` and false otherwise.
//! - `energy`: optional `{ "e_send"?, "e_receive"?, "e_relay"?,
//!   "e_compute"? }`; defaults 1, 1, 1, 0.
//! - `wireless_multicast`: optional flag, default false. When true one
//!   transmission reaches all of a node's dissemination-tree children.
//! - `core_affinity`: optional flag, default true; co-places the physics,
//!   collision, and game-state services on the same hosts.
//! - `allocator`: optional, `"heuristic"` (default) or `"auction"`.
//! - `dr_threshold`: optional non-negative float, default 1.0.
//! - `mandatory_workload`: optional non-negative integer, default 0;
//!   work units every non-external node executes per tick.
//! - `low_battery_threshold`: optional non-negative integer, default 20.
//! - `long_range_hop_cost`: optional integer ≥ 1, default 1.
//! - `price_increment`: optional positive float, default 1.0.
//! - `rank_weights`: optional `{ "compute"?, "battery"?, "bandwidth"? }`,
//!   non-negative floats, default 1.0 each.
//!
//! Player: `{ "id", "position": {"x","y"}, "radio_range", "speed"?,
//! "trusted"?, "event_rate"?, "capacity_cap"?, "devices": [...] }` with at
//! least one device. `speed` defaults to 0 (units per tick), `trusted` to
//! false, `event_rate` to 1.0. Device: `{ "id", "compute", "battery",
//! "interfaces"? }`; `battery` must be positive. Interface: `{ "class":
//! "short_range"|"long_range", "bandwidth", "cost_per_message"?,
//! "energy_per_message"? }`.
//!
//! Server: `{ "id", "position", "radio_range", "compute", "battery",
//! "interfaces"?, "capacity_cap"? }`. The server is static and trusted.
//!
//! Identifiers use `[A-Za-z0-9_.-]`, are non-empty, and may not be `GLOBAL`
//! (reserved by the metrics tables). Node ids (players, server, external
//! server) share one namespace; so do actor ids (players and bots) and
//! service ids (including the generated `ai.<bot>` names).

use crate::model::{
    classify, DeviceId, DeviceProfile, LinkClass, LinkSpec, ModuleKind, NodeId, NodeProfile,
    PlacementClass, Position,
};
use crate::overlay::MeshParams;
use crate::pan::aggregate_pan;
use crate::placement::{RankWeights, ServiceId, ServiceSpec};
use crate::sim::EnergyModel;
use crate::sync::fnv1a_64;
use serde::Deserialize;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("scenario syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("scenario error: {0}")]
    Semantic(String),
}

/// Which placement allocator a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocatorKind {
    Heuristic,
    Auction,
}

/// One player: the aggregated PAN node plus its simulation behavior.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerSetup {
    /// Mesh profile produced by PAN aggregation (compute summed, battery
    /// minimum, interfaces united), with the player's trust flag and
    /// capacity cap applied.
    pub node: NodeProfile,
    pub coordinator: DeviceId,
    pub gateway: DeviceId,
    /// Random-waypoint speed in units per tick; zero means static.
    pub speed: f64,
    /// Expected game events emitted per tick.
    pub event_rate: f64,
}

/// One bot: an actor driven by a placeable AI service.
#[derive(Debug, Clone, PartialEq)]
pub struct BotSetup {
    /// Actor identifier in the game state.
    pub actor: String,
    /// Generated AI service (`ai.<actor>`) whose host emits the events.
    pub service: ServiceId,
    pub event_rate: f64,
}

/// A validated scenario, ready to simulate.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// FNV-1a digest of the source text, echoed in run metadata.
    pub source_digest: u64,
    pub arena_width: f64,
    pub arena_height: f64,
    pub players: Vec<PlayerSetup>,
    pub server: Option<NodeProfile>,
    pub external: Option<NodeProfile>,
    pub bots: Vec<BotSetup>,
    /// Declared services plus the generated per-bot AI services.
    pub services: Vec<ServiceSpec>,
    pub allocator: AllocatorKind,
    pub energy: EnergyModel,
    pub dr_threshold: f64,
    pub core_affinity: bool,
    pub mandatory_workload: u64,
    pub low_battery_threshold: u64,
    pub mesh_params: MeshParams,
    pub price_increment: f64,
    pub rank_weights: RankWeights,
}

impl Scenario {
    /// All mesh node profiles: players, then server, then external server.
    pub fn profiles(&self) -> Vec<NodeProfile> {
        let mut out: Vec<NodeProfile> = self.players.iter().map(|p| p.node.clone()).collect();
        out.extend(self.server.clone());
        out.extend(self.external.clone());
        out
    }

    /// The player setup for a node id, if that node is a player.
    pub fn player(&self, id: &NodeId) -> Option<&PlayerSetup> {
        self.players.iter().find(|p| &p.node.node_id == id)
    }
}

/// FNV-1a digest of a scenario file's raw bytes, reported in run metadata so
/// outputs can be traced back to their exact input.
pub fn scenario_digest(text: &str) -> u64 {
    fnv1a_64(text.as_bytes())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema_version: Option<i64>,
    arena: RawArena,
    players: Vec<RawPlayer>,
    server: Option<RawServer>,
    external_server: Option<RawExternal>,
    #[serde(default)]
    bots: Vec<RawBot>,
    #[serde(default)]
    services: Vec<RawService>,
    energy: Option<RawEnergy>,
    wireless_multicast: Option<bool>,
    core_affinity: Option<bool>,
    allocator: Option<String>,
    dr_threshold: Option<f64>,
    mandatory_workload: Option<i64>,
    low_battery_threshold: Option<i64>,
    long_range_hop_cost: Option<i64>,
    price_increment: Option<f64>,
    rank_weights: Option<RawWeights>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArena {
    width: f64,
    height: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPosition {
    x: f64,
    y: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlayer {
    id: String,
    position: RawPosition,
    radio_range: f64,
    speed: Option<f64>,
    trusted: Option<bool>,
    event_rate: Option<f64>,
    capacity_cap: Option<i64>,
    devices: Vec<RawDevice>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDevice {
    id: String,
    compute: i64,
    battery: i64,
    #[serde(default)]
    interfaces: Vec<RawInterface>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInterface {
    class: String,
    bandwidth: f64,
    cost_per_message: Option<f64>,
    energy_per_message: Option<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawServer {
    id: String,
    position: RawPosition,
    radio_range: f64,
    compute: i64,
    battery: i64,
    #[serde(default)]
    interfaces: Vec<RawInterface>,
    capacity_cap: Option<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExternal {
    id: String,
    compute: i64,
    battery: Option<i64>,
    capacity_cap: Option<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBot {
    id: String,
    event_rate: Option<f64>,
    workload_per_client: Option<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawService {
    id: String,
    kind: String,
    workload_per_client: Option<i64>,
    state_bearing: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnergy {
    e_send: Option<i64>,
    e_receive: Option<i64>,
    e_relay: Option<i64>,
    e_compute: Option<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeights {
    compute: Option<f64>,
    battery: Option<f64>,
    bandwidth: Option<f64>,
}

fn sem(message: String) -> ScenarioError {
    ScenarioError::Semantic(message)
}

fn check_id(what: &str, id: &str) -> Result<(), ScenarioError> {
    if id.is_empty() {
        return Err(sem(format!("{what} id must not be empty")));
    }
    if id == "GLOBAL" {
        return Err(sem(format!("{what} id GLOBAL is reserved")));
    }
    if let Some(c) = id
        .chars()
        .find(|c| !(c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-')))
    {
        return Err(sem(format!("{what} id {id:?} contains invalid character {c:?}")));
    }
    Ok(())
}

/// Integer field that must be at least `min`.
fn int_at_least(field: &str, value: i64, min: u64) -> Result<u64, ScenarioError> {
    u64::try_from(value)
        .ok()
        .filter(|v| *v >= min)
        .ok_or_else(|| sem(format!("{field} must be an integer >= {min}, got {value}")))
}

fn finite_at_least(field: &str, value: f64, min: f64) -> Result<f64, ScenarioError> {
    if value.is_finite() && value >= min {
        Ok(value)
    } else {
        Err(sem(format!("{field} must be a finite number >= {min}, got {value}")))
    }
}

fn finite_positive(field: &str, value: f64) -> Result<f64, ScenarioError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(sem(format!("{field} must be a finite positive number, got {value}")))
    }
}

fn position(field: &str, raw: &RawPosition) -> Result<Position, ScenarioError> {
    if raw.x.is_finite() && raw.y.is_finite() {
        Ok(Position::new(raw.x, raw.y))
    } else {
        Err(sem(format!("{field} must have finite coordinates")))
    }
}

fn interfaces(owner: &str, raws: &[RawInterface]) -> Result<Vec<LinkSpec>, ScenarioError> {
    raws.iter()
        .map(|raw| {
            let class = match raw.class.as_str() {
                "short_range" => LinkClass::ShortRange,
                "long_range" => LinkClass::LongRange,
                other => {
                    return Err(sem(format!(
                        "{owner}: interface class must be short_range or long_range, got {other:?}"
                    )))
                }
            };
            Ok(LinkSpec {
                class,
                bandwidth: finite_positive(&format!("{owner}: interface bandwidth"), raw.bandwidth)?,
                cost_per_message: finite_at_least(
                    &format!("{owner}: interface cost_per_message"),
                    raw.cost_per_message.unwrap_or(0.0),
                    0.0,
                )?,
                energy_per_message: int_at_least(
                    &format!("{owner}: interface energy_per_message"),
                    raw.energy_per_message.unwrap_or(0),
                    0,
                )?,
            })
        })
        .collect()
}

fn capacity_cap(owner: &str, raw: Option<i64>) -> Result<Option<u64>, ScenarioError> {
    raw.map(|v| int_at_least(&format!("{owner}: capacity_cap"), v, 1))
        .transpose()
}

fn module_kind(service: &str, name: &str) -> Result<ModuleKind, ScenarioError> {
    ModuleKind::ALL
        .into_iter()
        .find(|k| k.to_string() == name)
        .ok_or_else(|| sem(format!("service {service}: unknown module kind {name:?}")))
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = serde_json::from_str(text).map_err(|e| ScenarioError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    if let Some(v) = raw.schema_version {
        if v != 1 {
            return Err(sem(format!("unsupported schema_version {v}; this build reads version 1")));
        }
    }
    let arena_width = finite_positive("arena.width", raw.arena.width)?;
    let arena_height = finite_positive("arena.height", raw.arena.height)?;
    if raw.players.is_empty() {
        return Err(sem("players must not be empty".to_owned()));
    }

    let low_battery_threshold = int_at_least(
        "low_battery_threshold",
        raw.low_battery_threshold
            .unwrap_or(crate::pan::DEFAULT_LOW_BATTERY_THRESHOLD as i64),
        0,
    )?;

    let mut node_ids: BTreeSet<String> = BTreeSet::new();
    let mut claim_node = |what: &str, id: &str| -> Result<(), ScenarioError> {
        check_id(what, id)?;
        if !node_ids.insert(id.to_owned()) {
            return Err(sem(format!("duplicate node id {id:?}")));
        }
        Ok(())
    };

    let mut players = Vec::with_capacity(raw.players.len());
    for p in &raw.players {
        claim_node("player", &p.id)?;
        let label = format!("player {}", p.id);
        if p.devices.is_empty() {
            return Err(sem(format!("{label} has no devices")));
        }
        let mut device_ids = BTreeSet::new();
        let mut devices = Vec::with_capacity(p.devices.len());
        for d in &p.devices {
            check_id(&format!("{label}: device"), &d.id)?;
            if !device_ids.insert(d.id.clone()) {
                return Err(sem(format!("{label}: duplicate device id {:?}", d.id)));
            }
            devices.push(DeviceProfile {
                device_id: DeviceId(d.id.clone()),
                compute: int_at_least(&format!("{label}: device {}: compute", d.id), d.compute, 0)?,
                battery: int_at_least(&format!("{label}: device {}: battery", d.id), d.battery, 1)?,
                interfaces: interfaces(&format!("{label}: device {}", d.id), &d.interfaces)?,
                owner: p.id.clone(),
            });
        }
        if devices.iter().map(|d| d.compute).sum::<u64>() == 0 {
            return Err(sem(format!("{label}: total device compute must be positive")));
        }
        let pan = aggregate_pan(
            &devices,
            position(&format!("{label}: position"), &p.position)?,
            finite_positive(&format!("{label}: radio_range"), p.radio_range)?,
            low_battery_threshold,
        )
        .map_err(|e| sem(format!("{label}: {e}")))?;
        let mut node = pan.node;
        node.trusted = p.trusted.unwrap_or(false);
        node.capacity_cap = capacity_cap(&label, p.capacity_cap)?;
        players.push(PlayerSetup {
            node,
            coordinator: pan.coordinator,
            gateway: pan.gateway,
            speed: finite_at_least(&format!("{label}: speed"), p.speed.unwrap_or(0.0), 0.0)?,
            event_rate: finite_at_least(
                &format!("{label}: event_rate"),
                p.event_rate.unwrap_or(1.0),
                0.0,
            )?,
        });
    }

    let server = raw
        .server
        .as_ref()
        .map(|s| -> Result<NodeProfile, ScenarioError> {
            claim_node("server", &s.id)?;
            let label = format!("server {}", s.id);
            Ok(NodeProfile {
                node_id: NodeId(s.id.clone()),
                position: position(&format!("{label}: position"), &s.position)?,
                radio_range: finite_positive(&format!("{label}: radio_range"), s.radio_range)?,
                compute: int_at_least(&format!("{label}: compute"), s.compute, 1)?,
                battery: int_at_least(&format!("{label}: battery"), s.battery, 1)?,
                interfaces: interfaces(&label, &s.interfaces)?,
                capacity_cap: capacity_cap(&label, s.capacity_cap)?,
                trusted: true,
                external: false,
            })
        })
        .transpose()?;

    let external = raw
        .external_server
        .as_ref()
        .map(|s| -> Result<NodeProfile, ScenarioError> {
            claim_node("external_server", &s.id)?;
            let label = format!("external_server {}", s.id);
            Ok(NodeProfile {
                node_id: NodeId(s.id.clone()),
                position: Position::new(0.0, 0.0),
                radio_range: 0.0,
                compute: int_at_least(&format!("{label}: compute"), s.compute, 1)?,
                battery: s
                    .battery
                    .map(|b| int_at_least(&format!("{label}: battery"), b, 1))
                    .transpose()?
                    .unwrap_or(u64::MAX),
                interfaces: Vec::new(),
                capacity_cap: capacity_cap(&label, s.capacity_cap)?,
                trusted: true,
                external: true,
            })
        })
        .transpose()?;

    let mut actor_ids: BTreeSet<&str> = raw.players.iter().map(|p| p.id.as_str()).collect();
    let mut service_ids: BTreeSet<String> = BTreeSet::new();
    let mut services = Vec::new();
    for s in &raw.services {
        check_id("service", &s.id)?;
        if !service_ids.insert(s.id.clone()) {
            return Err(sem(format!("duplicate service id {:?}", s.id)));
        }
        let kind = module_kind(&s.id, &s.kind)?;
        match classify(kind) {
            PlacementClass::MandatoryEverywhere => {
                return Err(sem(format!(
                    "service {}: kind {kind} runs on every node implicitly; model its cost \
                     with mandatory_workload",
                    s.id
                )))
            }
            PlacementClass::ExternalServer => {
                return Err(sem(format!(
                    "service {}: kind {kind} lives on the external server implicitly and is \
                     not placeable",
                    s.id
                )))
            }
            _ => {}
        }
        services.push(ServiceSpec {
            id: ServiceId(s.id.clone()),
            kind,
            workload_per_client: int_at_least(
                &format!("service {}: workload_per_client", s.id),
                s.workload_per_client.unwrap_or(1),
                1,
            )?,
            state_bearing: s
                .state_bearing
                .unwrap_or(kind == ModuleKind::GameStateManagement),
        });
    }

    let mut bots = Vec::with_capacity(raw.bots.len());
    for b in &raw.bots {
        check_id("bot", &b.id)?;
        if !actor_ids.insert(&b.id) {
            return Err(sem(format!("bot id {:?} collides with another actor", b.id)));
        }
        let service_name = format!("ai.{}", b.id);
        if !service_ids.insert(service_name.clone()) {
            return Err(sem(format!(
                "bot {}: generated service id {service_name:?} collides with a declared service",
                b.id
            )));
        }
        services.push(ServiceSpec {
            id: ServiceId(service_name.clone()),
            kind: ModuleKind::ArtificialIntelligence,
            workload_per_client: int_at_least(
                &format!("bot {}: workload_per_client", b.id),
                b.workload_per_client.unwrap_or(1),
                1,
            )?,
            state_bearing: false,
        });
        bots.push(BotSetup {
            actor: b.id.clone(),
            service: ServiceId(service_name),
            event_rate: finite_at_least(
                &format!("bot {}: event_rate", b.id),
                b.event_rate.unwrap_or(1.0),
                0.0,
            )?,
        });
    }

    let allocator = match raw.allocator.as_deref() {
        None | Some("heuristic") => AllocatorKind::Heuristic,
        Some("auction") => AllocatorKind::Auction,
        Some(other) => {
            return Err(sem(format!(
                "allocator must be \"heuristic\" or \"auction\", got {other:?}"
            )))
        }
    };

    let e = raw.energy.as_ref();
    let energy = EnergyModel {
        e_send: int_at_least("energy.e_send", e.and_then(|e| e.e_send).unwrap_or(1), 0)?,
        e_receive: int_at_least("energy.e_receive", e.and_then(|e| e.e_receive).unwrap_or(1), 0)?,
        e_relay: int_at_least("energy.e_relay", e.and_then(|e| e.e_relay).unwrap_or(1), 0)?,
        e_compute: int_at_least("energy.e_compute", e.and_then(|e| e.e_compute).unwrap_or(0), 0)?,
        wireless_multicast: raw.wireless_multicast.unwrap_or(false),
    };

    let w = raw.rank_weights.as_ref();
    let rank_weights = RankWeights {
        compute: finite_at_least(
            "rank_weights.compute",
            w.and_then(|w| w.compute).unwrap_or(1.0),
            0.0,
        )?,
        battery: finite_at_least(
            "rank_weights.battery",
            w.and_then(|w| w.battery).unwrap_or(1.0),
            0.0,
        )?,
        bandwidth: finite_at_least(
            "rank_weights.bandwidth",
            w.and_then(|w| w.bandwidth).unwrap_or(1.0),
            0.0,
        )?,
    };

    Ok(Scenario {
        source_digest: scenario_digest(text),
        arena_width,
        arena_height,
        players,
        server,
        external,
        bots,
        services,
        allocator,
        energy,
        dr_threshold: finite_at_least("dr_threshold", raw.dr_threshold.unwrap_or(1.0), 0.0)?,
        core_affinity: raw.core_affinity.unwrap_or(true),
        mandatory_workload: int_at_least(
            "mandatory_workload",
            raw.mandatory_workload.unwrap_or(0),
            0,
        )?,
        low_battery_threshold,
        mesh_params: MeshParams {
            long_range_hop_cost: int_at_least(
                "long_range_hop_cost",
                raw.long_range_hop_cost.unwrap_or(1),
                1,
            )? as u32,
        },
        price_increment: finite_positive("price_increment", raw.price_increment.unwrap_or(1.0))?,
        rank_weights,
    })
}

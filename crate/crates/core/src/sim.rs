//! The deterministic discrete-event simulator.
//!
//! A run is a pure function of (scenario, architecture, seed, tick count).
//! Each tick executes a fixed phase order:
//!
//! 1. mandatory workload is charged to every live non-external node;
//! 2. players move (random waypoint: walk toward the waypoint at the node's
//!    speed, draw a fresh one from the PRNG on arrival);
//! 3. if movement changed any mesh edge, the overlay and all dissemination
//!    trees are rebuilt (one reconfiguration);
//! 4. players emit game events at their rate, filtered by dead reckoning;
//!    bot events are emitted by the live lowest-id host of the bot's AI
//!    service, unfiltered;
//! 5. messages due this tick arrive; relays forward them hop by hop at one
//!    tick per unit of edge cost, re-reading the routing table at every hop;
//! 6. every replica orders and applies its per-tick event batch; batches
//!    containing client uploads are forwarded once to the peer replicas;
//! 7. replicas that applied something multicast an update down their
//!    dissemination trees;
//! 8. replica digests are compared (the consistency observation);
//! 9. nodes whose battery hit zero leave the mesh: their services are
//!    re-placed or marked dormant, clients re-associated, and a state
//!    snapshot is sent to any replacement replica.
//!
//! Energy is integer-valued and debited at the moment of each action; a node
//! that cannot afford an action spends what is left, performs nothing, and
//! fails. The ledger is exact: final battery = initial battery - debits.
//!
//! Message bookkeeping is conservation-exact. Every transmission op names
//! its intended receivers (one per unicast leg, all tree children under
//! wireless multicast); every op increments `sent` or `relayed` once; every
//! arrival increments the receiver's `received`. At any tick,
//! registered targets = arrivals + losses + targets still in flight,
//! and a violation aborts the run.

use crate::association::{
    assign_clients, build_dissemination_tree, AssignmentMap, AssociationError,
};
use crate::metrics::{GlobalMetrics, MetricsReport, NodeMetrics, RunMeta};
use crate::model::{euclidean_distance, NodeId, PlacementClass, Position};
use crate::overlay::{build_mesh_with, BroadcastTree, OverlayError, OverlayGraph};
use crate::placement::{
    allocate_auction, allocate_heuristic, plan_cost, AuctionParams, HeuristicParams,
    PlacementError, PlacementPlan, PlanViolation, ServiceId,
};
use crate::rng::SplitMix64;
use crate::scenario::{AllocatorKind, Scenario};
use crate::sync::{
    apply_events, dr_should_send, order_events, state_digest, ActorId, GameEvent, GameState,
};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// Cap on extra ticks spent draining in-flight messages after a run.
const DRAIN_LIMIT: u64 = 100_000;

/// The four system organizations under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// One server hosts everything; every client must be one hop from it.
    ClientServerDirect,
    /// One server hosts everything; clients reach it over the mesh.
    ClientServerOverlay,
    /// Every player node hosts every placeable service (trusted services on
    /// every trusted player node).
    PureP2P,
    /// Services are placed by the configured allocator.
    HybridDistributed,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::ClientServerDirect => "cs",
            Architecture::ClientServerOverlay => "cs-overlay",
            Architecture::PureP2P => "p2p",
            Architecture::HybridDistributed => "hybrid",
        })
    }
}

/// Energy drawn per action, in integer energy units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnergyModel {
    /// Per transmission op a node originates.
    pub e_send: u64,
    /// Per message arrival.
    pub e_receive: u64,
    /// Per transmission op a node forwards for others.
    pub e_relay: u64,
    /// Per work unit executed.
    pub e_compute: u64,
    /// When true, one tree transmission reaches all children at once.
    pub wireless_multicast: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Overlay(#[from] OverlayError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error("invalid placement plan: {0}")]
    Plan(#[from] PlanViolation),
    #[error(transparent)]
    Association(#[from] AssociationError),
    #[error("architecture {0} needs a server or external_server")]
    MissingServer(Architecture),
    #[error("client-server direct: client {0} is not adjacent to server {1}")]
    NotAdjacent(NodeId, NodeId),
    #[error("simulation invariant violated: {0}")]
    Invariant(String),
}

impl SimError {
    /// True for errors that mean the simulator itself broke an invariant at
    /// runtime, as opposed to rejecting an infeasible input.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(self, SimError::Invariant(_))
    }
}

enum MsgKind {
    /// A game event traveling to a replica. `entry` marks the client-upload
    /// leg, which the receiving replica fans out to its peers on apply.
    Event {
        service: ServiceId,
        event: GameEvent,
        entry: bool,
    },
    /// A state update flowing down the dissemination tree of `replica`.
    Update { service: ServiceId, replica: NodeId },
    /// A full state snapshot for a replacement replica.
    Transfer { service: ServiceId, snapshot: GameState },
}

struct Msg {
    kind: MsgKind,
    /// Receiver of this leg.
    to: NodeId,
    /// Final destination.
    dest: NodeId,
}

#[derive(Clone, Copy)]
struct DrRecord {
    pos: Position,
    vel: (f64, f64),
    tick: u64,
}

#[derive(Default)]
struct Counters {
    sent: BTreeMap<NodeId, u64>,
    received: BTreeMap<NodeId, u64>,
    relayed: BTreeMap<NodeId, u64>,
    work: BTreeMap<NodeId, u64>,
    debited: BTreeMap<NodeId, u64>,
    /// Intended receivers registered by all ops so far.
    targets: u64,
    /// Arrivals so far.
    arrivals: u64,
    /// Op targets that will never arrive (receiver failed or drained).
    lost: u64,
    /// Deliveries terminated midway: no route onward, relay drained, or an
    /// emission that could not be routed at all.
    dead_ends: u64,
    player_sent: u64,
    player_suppressed: u64,
    bot_sent: u64,
    checks: u64,
    consistent: u64,
    reconfigurations: u64,
}

/// Full simulation state; see the module docs for the step semantics.
pub struct SimState {
    scenario: Scenario,
    arch: Architecture,
    seed: u64,
    tick: u64,
    rng: SplitMix64,
    overlay: OverlayGraph,
    plan: PlacementPlan,
    assignment: AssignmentMap,
    base_profiles: BTreeMap<NodeId, crate::model::NodeProfile>,
    player_order: Vec<NodeId>,
    speeds: BTreeMap<NodeId, f64>,
    rates: BTreeMap<NodeId, f64>,
    positions: BTreeMap<NodeId, Position>,
    waypoints: BTreeMap<NodeId, Option<Position>>,
    batteries: BTreeMap<NodeId, u64>,
    failed: BTreeMap<NodeId, u64>,
    actors: Vec<ActorId>,
    /// State-bearing service ids, ascending.
    state_services: Vec<ServiceId>,
    replicas: BTreeMap<(ServiceId, NodeId), GameState>,
    inboxes: BTreeMap<(ServiceId, NodeId), Vec<(GameEvent, bool)>>,
    /// Replacement replicas still waiting for their state snapshot.
    awaiting: BTreeSet<(ServiceId, NodeId)>,
    trees: BTreeMap<(ServiceId, NodeId), BroadcastTree>,
    /// Services whose clients could not be assigned; retried after every
    /// reconfiguration.
    dormant: BTreeSet<ServiceId>,
    queue: BTreeMap<(u64, u64), Msg>,
    next_msg: u64,
    seqs: BTreeMap<NodeId, u64>,
    dr: BTreeMap<NodeId, DrRecord>,
    m: Counters,
    init_mean_hops: f64,
    init_max_load: u64,
}

/// Builds the initial state: PANs are already aggregated by the scenario,
/// so this builds the mesh, fixes the placement plan per architecture,
/// associates clients, and seeds replicas and batteries.
pub fn init(scenario: &Scenario, arch: Architecture, seed: u64) -> Result<SimState, SimError> {
    let profiles = scenario.profiles();
    let overlay = build_mesh_with(&profiles, scenario.mesh_params)?;

    let plan = match arch {
        Architecture::ClientServerDirect | Architecture::ClientServerOverlay => {
            let server = scenario
                .server
                .as_ref()
                .or(scenario.external.as_ref())
                .ok_or(SimError::MissingServer(arch))?;
            if arch == Architecture::ClientServerDirect {
                for p in &scenario.players {
                    let d = crate::overlay::hop_distance(&overlay, &p.node.node_id, &server.node_id)?;
                    if d != Some(1) {
                        return Err(SimError::NotAdjacent(
                            p.node.node_id.clone(),
                            server.node_id.clone(),
                        ));
                    }
                }
            }
            let mut plan = PlacementPlan::new();
            for spec in &scenario.services {
                plan.insert(spec.clone(), BTreeSet::from([server.node_id.clone()]));
            }
            plan
        }
        Architecture::PureP2P => {
            let mut plan = PlacementPlan::new();
            for spec in &scenario.services {
                let hosts: BTreeSet<NodeId> = scenario
                    .players
                    .iter()
                    .filter(|p| spec.class() != PlacementClass::TrustedNode || p.node.trusted)
                    .map(|p| p.node.node_id.clone())
                    .collect();
                if hosts.is_empty() {
                    return Err(PlacementError::NoTrustedNode(spec.id.clone()).into());
                }
                plan.insert(spec.clone(), hosts);
            }
            plan
        }
        Architecture::HybridDistributed => {
            let client_count = profiles.iter().filter(|p| !p.external).count() as u64;
            let clients: BTreeMap<ServiceId, u64> = scenario
                .services
                .iter()
                .map(|s| (s.id.clone(), client_count))
                .collect();
            match scenario.allocator {
                AllocatorKind::Heuristic => allocate_heuristic(
                    &scenario.services,
                    &overlay,
                    &clients,
                    HeuristicParams {
                        weights: scenario.rank_weights,
                    },
                    scenario.core_affinity,
                )?,
                AllocatorKind::Auction => allocate_auction(
                    &scenario.services,
                    &overlay,
                    &clients,
                    AuctionParams {
                        weights: scenario.rank_weights,
                        price_increment: scenario.price_increment,
                    },
                    scenario.core_affinity,
                )?,
            }
        }
    };
    plan.validate(&overlay, arch == Architecture::PureP2P)?;

    let caps = arch_caps(scenario, arch);
    let assignment = assign_clients(&plan, &overlay, &caps)?;
    let cost = plan_cost(&plan, &overlay, &assignment);

    let mut actors: Vec<ActorId> = scenario
        .players
        .iter()
        .map(|p| ActorId(p.node.node_id.0.clone()))
        .collect();
    actors.extend(scenario.bots.iter().map(|b| ActorId(b.actor.clone())));

    let mut state_services: Vec<ServiceId> = scenario
        .services
        .iter()
        .filter(|s| s.state_bearing)
        .map(|s| s.id.clone())
        .collect();
    state_services.sort();

    let mut replicas = BTreeMap::new();
    for sid in &state_services {
        for host in plan.hosts(sid).into_iter().flatten() {
            replicas.insert(
                (sid.clone(), host.clone()),
                GameState::with_actors(actors.iter().cloned()),
            );
        }
    }

    let mut state = SimState {
        scenario: scenario.clone(),
        arch,
        seed,
        tick: 0,
        rng: SplitMix64::new(seed),
        overlay,
        plan,
        assignment,
        base_profiles: profiles
            .iter()
            .map(|p| (p.node_id.clone(), p.clone()))
            .collect(),
        player_order: {
            let mut ids: Vec<NodeId> = scenario
                .players
                .iter()
                .map(|p| p.node.node_id.clone())
                .collect();
            ids.sort();
            ids
        },
        speeds: scenario
            .players
            .iter()
            .map(|p| (p.node.node_id.clone(), p.speed))
            .collect(),
        rates: scenario
            .players
            .iter()
            .map(|p| (p.node.node_id.clone(), p.event_rate))
            .collect(),
        positions: profiles.iter().map(|p| (p.node_id.clone(), p.position)).collect(),
        waypoints: profiles.iter().map(|p| (p.node_id.clone(), None)).collect(),
        batteries: profiles.iter().map(|p| (p.node_id.clone(), p.battery)).collect(),
        failed: BTreeMap::new(),
        actors,
        state_services,
        replicas,
        inboxes: BTreeMap::new(),
        awaiting: BTreeSet::new(),
        trees: BTreeMap::new(),
        dormant: BTreeSet::new(),
        queue: BTreeMap::new(),
        next_msg: 0,
        seqs: BTreeMap::new(),
        dr: BTreeMap::new(),
        m: Counters::default(),
        init_mean_hops: cost.mean_client_hops,
        init_max_load: cost.max_node_load,
    };
    state.rebuild_trees();
    Ok(state)
}

/// Runs `ticks` full steps, drains in-flight messages, and reports.
pub fn run(
    scenario: &Scenario,
    arch: Architecture,
    seed: u64,
    ticks: u64,
) -> Result<MetricsReport, SimError> {
    let mut s = init(scenario, arch, seed)?;
    for _ in 0..ticks {
        s.step()?;
    }
    let mut drained = 0u64;
    while !s.queue.is_empty() {
        drained += 1;
        if drained > DRAIN_LIMIT {
            return Err(SimError::Invariant(
                "message queue did not drain after the run".to_owned(),
            ));
        }
        s.step_phases(false)?;
    }
    Ok(s.report(ticks))
}

fn arch_caps(scenario: &Scenario, arch: Architecture) -> BTreeMap<NodeId, u64> {
    // Capacity caps model voluntary per-node limits; the fixed-plan
    // architectures ignore them because their single-host (or all-host)
    // overload is the phenomenon under measurement.
    if arch != Architecture::HybridDistributed {
        return BTreeMap::new();
    }
    scenario
        .profiles()
        .into_iter()
        .filter_map(|p| p.capacity_cap.map(|c| (p.node_id, c)))
        .collect()
}

impl SimState {
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn overlay(&self) -> &OverlayGraph {
        &self.overlay
    }

    pub fn plan(&self) -> &PlacementPlan {
        &self.plan
    }

    pub fn assignment(&self) -> &AssignmentMap {
        &self.assignment
    }

    pub fn battery(&self, node: &NodeId) -> Option<u64> {
        self.batteries.get(node).copied()
    }

    pub fn is_failed(&self, node: &NodeId) -> bool {
        self.failed.contains_key(node)
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }

    /// Digest of one replica's game state, if that replica exists.
    pub fn replica_digest(&self, service: &ServiceId, host: &NodeId) -> Option<u64> {
        self.replicas
            .get(&(service.clone(), host.clone()))
            .map(state_digest)
    }

    /// Advances the simulation by one tick.
    pub fn step(&mut self) -> Result<(), SimError> {
        self.step_phases(true)
    }

    fn step_phases(&mut self, active: bool) -> Result<(), SimError> {
        self.tick += 1;
        if active {
            self.charge_mandatory_workload();
            let moved = self.mobility();
            if moved && self.rebuild_overlay() {
                self.after_reconfiguration();
            }
            self.emissions();
        }
        self.deliver_due()?;
        let applied = self.apply_batches()?;
        self.multicast_updates(&applied);
        self.observe_consistency();
        self.process_failures();
        self.check_conservation()
    }

    // ----- energy ---------------------------------------------------------

    /// Debits `cost` if the node is alive and can afford it and returns
    /// true. Otherwise the node spends what it has, performs nothing, and
    /// fails. A node reaching exactly zero acts first, then fails.
    fn spend(&mut self, node: &NodeId, cost: u64) -> bool {
        if self.failed.contains_key(node) {
            return false;
        }
        let battery = self.batteries.get_mut(node).expect("known node");
        let debit = cost.min(*battery);
        *battery -= debit;
        let emptied = *battery == 0;
        *self.m.debited.entry(node.clone()).or_default() += debit;
        if emptied {
            self.failed.insert(node.clone(), self.tick);
        }
        debit == cost
    }

    fn charge_mandatory_workload(&mut self) {
        let work = self.scenario.mandatory_workload;
        if work == 0 {
            return;
        }
        let cost = work * self.scenario.energy.e_compute;
        let ids: Vec<NodeId> = self
            .base_profiles
            .values()
            .filter(|p| !p.external)
            .map(|p| p.node_id.clone())
            .collect();
        for id in ids {
            if self.spend(&id, cost) {
                *self.m.work.entry(id).or_default() += work;
            }
        }
    }

    // ----- mobility and reconfiguration -----------------------------------

    fn mobility(&mut self) -> bool {
        let mut moved = false;
        for id in self.player_order.clone() {
            if self.failed.contains_key(&id) {
                continue;
            }
            let speed = self.speeds[&id];
            if speed <= 0.0 {
                continue;
            }
            let pos = self.positions[&id];
            let waypoint = match self.waypoints[&id] {
                Some(w) => w,
                None => {
                    let w = Position::new(
                        self.rng.next_f64() * self.scenario.arena_width,
                        self.rng.next_f64() * self.scenario.arena_height,
                    );
                    self.waypoints.insert(id.clone(), Some(w));
                    w
                }
            };
            let dist = euclidean_distance(pos, waypoint);
            let next = if dist <= speed {
                self.waypoints.insert(id.clone(), None);
                waypoint
            } else {
                Position::new(
                    pos.x + (waypoint.x - pos.x) / dist * speed,
                    pos.y + (waypoint.y - pos.y) / dist * speed,
                )
            };
            if next != pos {
                self.positions.insert(id.clone(), next);
                moved = true;
            }
        }
        moved
    }

    /// The player's current velocity in units per tick.
    fn velocity_of(&self, id: &NodeId) -> (f64, f64) {
        let speed = self.speeds.get(id).copied().unwrap_or(0.0);
        if speed <= 0.0 {
            return (0.0, 0.0);
        }
        let Some(Some(waypoint)) = self.waypoints.get(id) else {
            return (0.0, 0.0);
        };
        let pos = self.positions[id];
        let dist = euclidean_distance(pos, *waypoint);
        if dist == 0.0 {
            return (0.0, 0.0);
        }
        ((waypoint.x - pos.x) / dist * speed, (waypoint.y - pos.y) / dist * speed)
    }

    fn live_profiles(&self) -> Vec<crate::model::NodeProfile> {
        self.base_profiles
            .values()
            .filter(|p| !self.failed.contains_key(&p.node_id))
            .map(|p| {
                let mut p = (*p).clone();
                p.position = self.positions[&p.node_id];
                p
            })
            .collect()
    }

    /// Rebuilds the mesh from live profiles; adopts it and returns true only
    /// if the edge set changed.
    fn rebuild_overlay(&mut self) -> bool {
        let rebuilt = build_mesh_with(&self.live_profiles(), self.scenario.mesh_params)
            .expect("live profiles have unique ids");
        if rebuilt.edges() == self.overlay.edges() && rebuilt.len() == self.overlay.len() {
            return false;
        }
        self.overlay = rebuilt;
        self.m.reconfigurations += 1;
        true
    }

    fn after_reconfiguration(&mut self) {
        self.rebuild_trees();
        self.retry_dormant();
    }

    fn rebuild_trees(&mut self) {
        self.trees.clear();
        for sid in self.state_services.clone() {
            for host in self.live_hosts(&sid) {
                let clients: BTreeSet<NodeId> = self
                    .assignment
                    .clients_of(&sid, &host)
                    .iter()
                    .filter(|c| {
                        crate::overlay::hop_distance(&self.overlay, &host, c)
                            .ok()
                            .flatten()
                            .is_some()
                    })
                    .cloned()
                    .collect();
                if let Ok(tree) = build_dissemination_tree(&self.overlay, &host, &clients) {
                    self.trees.insert((sid.clone(), host), tree);
                }
            }
        }
    }

    fn retry_dormant(&mut self) {
        for sid in self.dormant.clone() {
            if self.reassign_service(&sid).is_ok() {
                self.dormant.remove(&sid);
                self.rebuild_trees();
            }
        }
    }

    fn live_hosts(&self, sid: &ServiceId) -> Vec<NodeId> {
        self.plan
            .hosts(sid)
            .into_iter()
            .flatten()
            .filter(|h| !self.failed.contains_key(*h) && self.overlay.contains(h))
            .cloned()
            .collect()
    }

    /// Re-runs client association for one service over the current mesh.
    fn reassign_service(&mut self, sid: &ServiceId) -> Result<(), AssociationError> {
        self.assignment.clear_service(sid);
        let hosts: BTreeSet<NodeId> = self.live_hosts(sid).into_iter().collect();
        if hosts.is_empty() {
            return Err(AssociationError::UnreachableReplicas(
                sid.clone(),
                NodeId::from(""),
            ));
        }
        let spec = self.plan.spec(sid).expect("service exists").clone();
        let mut mini = PlacementPlan::new();
        mini.insert(spec, hosts);
        let caps = arch_caps(&self.scenario, self.arch);
        let map = assign_clients(&mini, &self.overlay, &caps)?;
        for (client, replica) in map.pairs_of(sid) {
            self.assignment.assign(sid, client.clone(), replica.clone());
        }
        Ok(())
    }

    // ----- message transport ----------------------------------------------

    fn enqueue(&mut self, at: u64, msg: Msg) {
        self.queue.insert((at, self.next_msg), msg);
        self.next_msg += 1;
        self.m.targets += 1;
    }

    /// Originates a unicast toward `dest` (which must differ from `origin`).
    /// Returns false when the message could not leave the origin.
    fn unicast(&mut self, origin: &NodeId, dest: &NodeId, kind: MsgKind) -> bool {
        let Some(next) = self.overlay.next_hop(origin, dest).cloned() else {
            self.m.dead_ends += 1;
            return false;
        };
        let cost = u64::from(self.overlay.edge_cost(origin, &next).expect("adjacent"));
        if !self.spend(origin, self.scenario.energy.e_send) {
            self.m.dead_ends += 1;
            return false;
        }
        *self.m.sent.entry(origin.clone()).or_default() += 1;
        self.enqueue(
            self.tick + cost,
            Msg {
                kind,
                to: next,
                dest: dest.clone(),
            },
        );
        true
    }

    fn deliver_due(&mut self) -> Result<(), SimError> {
        let due: Vec<(u64, u64)> = self
            .queue
            .range((self.tick, 0)..=(self.tick, u64::MAX))
            .map(|(k, _)| *k)
            .collect();
        for key in due {
            let msg = self.queue.remove(&key).expect("key just listed");
            if self.failed.contains_key(&msg.to) || !self.overlay.contains(&msg.to) {
                self.m.lost += 1;
                continue;
            }
            if !self.spend(&msg.to, self.scenario.energy.e_receive) {
                self.m.lost += 1;
                continue;
            }
            *self.m.received.entry(msg.to.clone()).or_default() += 1;
            self.m.arrivals += 1;
            if msg.to == msg.dest {
                self.consume(msg);
            } else {
                self.relay(msg);
            }
        }
        Ok(())
    }

    fn relay(&mut self, msg: Msg) {
        let Some(next) = self.overlay.next_hop(&msg.to, &msg.dest).cloned() else {
            self.m.dead_ends += 1;
            return;
        };
        let cost = u64::from(self.overlay.edge_cost(&msg.to, &next).expect("adjacent"));
        if !self.spend(&msg.to, self.scenario.energy.e_relay) {
            self.m.dead_ends += 1;
            return;
        }
        *self.m.relayed.entry(msg.to.clone()).or_default() += 1;
        self.enqueue(
            self.tick + cost,
            Msg {
                kind: msg.kind,
                to: next,
                dest: msg.dest,
            },
        );
    }

    fn consume(&mut self, msg: Msg) {
        let node = msg.to;
        match msg.kind {
            MsgKind::Event { service, event, entry } => {
                // The host set may have changed while the event was in
                // flight; an event landing on a non-host dies here, which is
                // consistent across replicas because it was never applied.
                if self.plan.is_host(&service, &node) {
                    self.inboxes
                        .entry((service, node))
                        .or_default()
                        .push((event, entry));
                }
            }
            MsgKind::Update { service, replica } => {
                self.forward_update(&node, &service, &replica);
            }
            MsgKind::Transfer { service, snapshot } => {
                let key = (service, node);
                if self.awaiting.remove(&key) {
                    self.replicas.insert(key, snapshot);
                }
            }
        }
    }

    /// Sends an update to a tree node's children: one op per child, or one
    /// op for all of them under wireless multicast. `originate` selects
    /// send vs relay accounting.
    fn send_down_tree(
        &mut self,
        node: &NodeId,
        service: &ServiceId,
        replica: &NodeId,
        originate: bool,
    ) {
        let key = (service.clone(), replica.clone());
        let children: Vec<NodeId> = match self.trees.get(&key) {
            Some(tree) => tree.children_of(node).to_vec(),
            None => return,
        };
        if children.is_empty() {
            return;
        }
        let energy = if originate {
            self.scenario.energy.e_send
        } else {
            self.scenario.energy.e_relay
        };
        let bump = |s: &mut SimState| {
            let counter = if originate { &mut s.m.sent } else { &mut s.m.relayed };
            *counter.entry(node.clone()).or_default() += 1;
        };
        if self.scenario.energy.wireless_multicast {
            if !self.spend(node, energy) {
                self.m.dead_ends += 1;
                return;
            }
            bump(self);
        }
        for child in children {
            let Some(cost) = self.overlay.edge_cost(node, &child) else {
                self.m.dead_ends += 1;
                continue;
            };
            if !self.scenario.energy.wireless_multicast {
                if !self.spend(node, energy) {
                    self.m.dead_ends += 1;
                    return;
                }
                bump(self);
            }
            self.enqueue(
                self.tick + u64::from(cost),
                Msg {
                    kind: MsgKind::Update {
                        service: service.clone(),
                        replica: replica.clone(),
                    },
                    to: child.clone(),
                    dest: child,
                },
            );
        }
    }

    fn forward_update(&mut self, node: &NodeId, service: &ServiceId, replica: &NodeId) {
        self.send_down_tree(node, service, replica, false);
    }

    // ----- event generation -----------------------------------------------

    fn emission_count(&mut self, rate: f64) -> u64 {
        if rate <= 0.0 {
            return 0;
        }
        let whole = rate.floor();
        let frac = rate - whole;
        let mut n = whole as u64;
        if frac > 0.0 && self.rng.next_f64() < frac {
            n += 1;
        }
        n
    }

    fn next_seq(&mut self, node: &NodeId) -> u64 {
        let seq = self.seqs.entry(node.clone()).or_default();
        let value = *seq;
        *seq += 1;
        value
    }

    fn emissions(&mut self) {
        for id in self.player_order.clone() {
            if self.failed.contains_key(&id) {
                continue;
            }
            let rate = self.rates[&id];
            let count = self.emission_count(rate);
            for _ in 0..count {
                let pos = self.positions[&id];
                let send = match self.dr.get(&id) {
                    None => true,
                    Some(rec) => dr_should_send(
                        pos,
                        rec.pos,
                        rec.vel,
                        self.tick - rec.tick,
                        self.scenario.dr_threshold,
                    ),
                };
                if !send {
                    self.m.player_suppressed += 1;
                    continue;
                }
                let payload = self.rng.next_i64();
                let event = GameEvent {
                    source: id.clone(),
                    seq: self.next_seq(&id),
                    tick: self.tick,
                    actor: ActorId(id.0.clone()),
                    payload,
                };
                self.m.player_sent += 1;
                self.dr.insert(
                    id.clone(),
                    DrRecord {
                        pos,
                        vel: self.velocity_of(&id),
                        tick: self.tick,
                    },
                );
                self.dispatch_event(&id, event);
            }
        }

        for bot in self.scenario.bots.clone() {
            let Some(emitter) = self.live_hosts(&bot.service).into_iter().next() else {
                continue;
            };
            let count = self.emission_count(bot.event_rate);
            if count == 0 {
                continue;
            }
            let work = self
                .plan
                .spec(&bot.service)
                .map(|s| s.workload_per_client)
                .unwrap_or(1);
            for _ in 0..count {
                if !self.spend(&emitter, work * self.scenario.energy.e_compute) {
                    break;
                }
                *self.m.work.entry(emitter.clone()).or_default() += work;
                let payload = self.rng.next_i64();
                let event = GameEvent {
                    source: emitter.clone(),
                    seq: self.next_seq(&emitter),
                    tick: self.tick,
                    actor: ActorId(bot.actor.clone()),
                    payload,
                };
                self.m.bot_sent += 1;
                self.dispatch_event(&emitter, event);
            }
        }
    }

    /// Routes one event to the origin's entry replica of every state-bearing
    /// service: the local replica when the origin hosts one, the assigned
    /// replica otherwise.
    fn dispatch_event(&mut self, origin: &NodeId, event: GameEvent) {
        for sid in self.state_services.clone() {
            let key = (sid.clone(), origin.clone());
            if self.replicas.contains_key(&key) {
                self.inboxes.entry(key).or_default().push((event.clone(), true));
            } else if let Some(replica) = self.assignment.replica_of(&sid, origin).cloned() {
                self.unicast(
                    origin,
                    &replica,
                    MsgKind::Event {
                        service: sid,
                        event: event.clone(),
                        entry: true,
                    },
                );
            } else {
                // No replica is reachable (dormant service); the update is
                // never transmitted.
                self.m.dead_ends += 1;
            }
        }
    }

    // ----- replica processing ----------------------------------------------

    fn apply_batches(&mut self) -> Result<Vec<(ServiceId, NodeId)>, SimError> {
        let mut applied = Vec::new();
        for key in self.replicas.keys().cloned().collect::<Vec<_>>() {
            let (sid, host) = &key;
            if self.failed.contains_key(host) || self.awaiting.contains(&key) {
                continue;
            }
            let batch = match self.inboxes.remove(&key) {
                Some(b) if !b.is_empty() => b,
                _ => continue,
            };
            let workload = self
                .plan
                .spec(sid)
                .map(|s| s.workload_per_client)
                .unwrap_or(1);
            let work = workload * batch.len() as u64;
            if !self.spend(host, work * self.scenario.energy.e_compute) {
                continue;
            }
            *self.m.work.entry(host.clone()).or_default() += work;

            let events: Vec<GameEvent> = batch.iter().map(|(e, _)| e.clone()).collect();
            let ordered = order_events(&events)
                .map_err(|e| SimError::Invariant(format!("replica batch at {host}: {e}")))?;
            let state = self.replicas.get(&key).expect("replica exists");
            let next = apply_events(state, &ordered)
                .map_err(|e| SimError::Invariant(format!("replica apply at {host}: {e}")))?;
            self.replicas.insert(key.clone(), next);

            let peers: Vec<NodeId> = self
                .live_hosts(sid)
                .into_iter()
                .filter(|h| h != host)
                .collect();
            'fanout: for (event, entry) in &batch {
                if !*entry {
                    continue;
                }
                for peer in &peers {
                    let ok = self.unicast(
                        host,
                        peer,
                        MsgKind::Event {
                            service: sid.clone(),
                            event: event.clone(),
                            entry: false,
                        },
                    );
                    if !ok && self.failed.contains_key(host) {
                        break 'fanout;
                    }
                }
            }
            applied.push(key);
        }
        Ok(applied)
    }

    fn multicast_updates(&mut self, applied: &[(ServiceId, NodeId)]) {
        for (sid, host) in applied {
            if self.failed.contains_key(host) {
                continue;
            }
            self.send_down_tree(&host.clone(), sid, host, true);
        }
    }

    // ----- observations and churn ------------------------------------------

    fn consistency_groups(&self) -> Vec<Vec<u64>> {
        self.state_services
            .iter()
            .map(|sid| {
                self.live_hosts(sid)
                    .into_iter()
                    .filter(|h| !self.awaiting.contains(&(sid.clone(), h.clone())))
                    .filter_map(|h| self.replicas.get(&(sid.clone(), h)).map(state_digest))
                    .collect()
            })
            .collect()
    }

    fn observe_consistency(&mut self) {
        for digests in self.consistency_groups() {
            if digests.len() >= 2 {
                self.m.checks += 1;
                if digests.iter().all(|d| *d == digests[0]) {
                    self.m.consistent += 1;
                }
            }
        }
    }

    fn final_consistency(&self) -> bool {
        for sid in &self.state_services {
            if self
                .live_hosts(sid)
                .iter()
                .any(|h| self.awaiting.contains(&(sid.clone(), h.clone())))
            {
                return false;
            }
        }
        self.consistency_groups()
            .iter()
            .all(|d| d.windows(2).all(|w| w[0] == w[1]))
    }

    fn process_failures(&mut self) {
        let newly: Vec<NodeId> = self
            .failed
            .iter()
            .filter(|(id, t)| **t == self.tick && self.overlay.contains(id))
            .map(|(id, _)| id.clone())
            .collect();
        if newly.is_empty() {
            return;
        }
        // A node leaving is a reconfiguration: rebuild the mesh without it.
        self.rebuild_overlay();

        let mut affected: BTreeSet<ServiceId> = BTreeSet::new();
        for f in &newly {
            for (spec, hosts) in self.plan.services() {
                if hosts.contains(f) {
                    affected.insert(spec.id.clone());
                }
            }
            for sid in &affected {
                let key = (sid.clone(), f.clone());
                self.replicas.remove(&key);
                self.inboxes.remove(&key);
                self.awaiting.remove(&key);
            }
        }
        for f in &newly {
            for sid in affected.clone() {
                if let Some(hosts) = self.plan.hosts_mut(&sid) {
                    hosts.remove(f);
                }
            }
        }

        for sid in affected {
            if self.live_hosts(&sid).is_empty() {
                self.replace_service(&sid);
            }
            match self.reassign_service(&sid) {
                Ok(()) => {
                    self.dormant.remove(&sid);
                }
                Err(AssociationError::CapacityExhausted(..))
                    if self.arch == Architecture::HybridDistributed =>
                {
                    self.replace_service(&sid);
                    if self.reassign_service(&sid).is_ok() {
                        self.dormant.remove(&sid);
                    } else {
                        self.dormant.insert(sid);
                    }
                }
                Err(_) => {
                    self.dormant.insert(sid);
                }
            }
        }
        self.rebuild_trees();
        self.retry_dormant();
    }

    /// Re-places a service after churn. Survivor replicas are kept; any
    /// newly added state-bearing replica starts cold and waits for a
    /// snapshot from the lowest-id survivor (or starts fresh when no
    /// survivor exists).
    fn replace_service(&mut self, sid: &ServiceId) {
        let Some(spec) = self.plan.spec(sid).cloned() else {
            return;
        };
        let old_hosts: BTreeSet<NodeId> = self.live_hosts(sid).into_iter().collect();
        let new_hosts: BTreeSet<NodeId> = match self.arch {
            Architecture::ClientServerDirect | Architecture::ClientServerOverlay => {
                // The only host was the server; nothing can replace it.
                old_hosts.clone()
            }
            Architecture::PureP2P => self
                .overlay
                .nodes()
                .filter(|n| !n.external)
                .filter(|n| spec.class() != PlacementClass::TrustedNode || n.trusted)
                .map(|n| n.node_id.clone())
                .collect(),
            Architecture::HybridDistributed => {
                let client_count = self.overlay.nodes().filter(|n| !n.external).count() as u64;
                let clients = BTreeMap::from([(sid.clone(), client_count)]);
                let services = [spec.clone()];
                let result = match self.scenario.allocator {
                    AllocatorKind::Heuristic => allocate_heuristic(
                        &services,
                        &self.overlay,
                        &clients,
                        HeuristicParams {
                            weights: self.scenario.rank_weights,
                        },
                        self.scenario.core_affinity,
                    ),
                    AllocatorKind::Auction => allocate_auction(
                        &services,
                        &self.overlay,
                        &clients,
                        AuctionParams {
                            weights: self.scenario.rank_weights,
                            price_increment: self.scenario.price_increment,
                        },
                        self.scenario.core_affinity,
                    ),
                };
                match result {
                    Ok(p) => p.hosts(sid).cloned().unwrap_or_default(),
                    Err(_) => old_hosts.clone(),
                }
            }
        };
        if new_hosts == old_hosts {
            return;
        }

        let state_bearing = self.state_services.contains(sid);
        let survivor = old_hosts.intersection(&new_hosts).next().cloned();
        for host in new_hosts.difference(&old_hosts) {
            if !state_bearing {
                continue;
            }
            let key = (sid.clone(), host.clone());
            self.replicas
                .insert(key.clone(), GameState::with_actors(self.actors.iter().cloned()));
            if let Some(src) = &survivor {
                let snapshot = self.replicas[&(sid.clone(), src.clone())].clone();
                self.awaiting.insert(key);
                self.unicast(
                    &src.clone(),
                    host,
                    MsgKind::Transfer {
                        service: sid.clone(),
                        snapshot,
                    },
                );
            }
        }
        for host in old_hosts.difference(&new_hosts) {
            let key = (sid.clone(), host.clone());
            self.replicas.remove(&key);
            self.inboxes.remove(&key);
            self.awaiting.remove(&key);
        }
        self.plan.insert(spec, new_hosts);
    }

    fn check_conservation(&self) -> Result<(), SimError> {
        let in_flight = self.queue.len() as u64;
        let balance = self.m.arrivals + self.m.lost + in_flight;
        if balance != self.m.targets {
            return Err(SimError::Invariant(format!(
                "message conservation broken at tick {}: {} targets registered but \
                 {} arrived + {} lost + {} in flight",
                self.tick, self.m.targets, self.m.arrivals, self.m.lost, in_flight
            )));
        }
        Ok(())
    }

    // ----- reporting --------------------------------------------------------

    fn report(&self, requested_ticks: u64) -> MetricsReport {
        let nodes: Vec<NodeMetrics> = self
            .base_profiles
            .values()
            .map(|p| {
                let id = &p.node_id;
                NodeMetrics {
                    node_id: id.0.clone(),
                    sent: self.m.sent.get(id).copied().unwrap_or(0),
                    received: self.m.received.get(id).copied().unwrap_or(0),
                    relayed: self.m.relayed.get(id).copied().unwrap_or(0),
                    work_units: self.m.work.get(id).copied().unwrap_or(0),
                    final_battery: self.batteries[id],
                    failure_tick: self.failed.get(id).copied(),
                    initial_battery: p.battery,
                    energy_debited: self.m.debited.get(id).copied().unwrap_or(0),
                }
            })
            .collect();
        let total_messages = nodes.iter().map(|n| n.sent + n.relayed).sum();
        let candidates = self.m.player_sent + self.m.player_suppressed;
        MetricsReport {
            meta: RunMeta {
                seed: self.seed,
                arch: self.arch.to_string(),
                ticks: requested_ticks,
                scenario_digest: format!("{:016x}", self.scenario.source_digest),
            },
            nodes,
            global: GlobalMetrics {
                mean_hops: self.init_mean_hops,
                max_load: self.init_max_load,
                total_messages,
                consistency_rate: if self.m.checks == 0 {
                    1.0
                } else {
                    self.m.consistent as f64 / self.m.checks as f64
                },
                dr_suppression: if candidates == 0 {
                    0.0
                } else {
                    self.m.player_suppressed as f64 / candidates as f64
                },
                final_consistent: self.final_consistency(),
                reconfigurations: self.m.reconfigurations,
                messages_lost: self.m.lost + self.m.dead_ends,
                events_emitted: self.m.player_sent + self.m.bot_sent,
                events_suppressed: self.m.player_suppressed,
            },
        }
    }
}

//! Service placement: how many replicas to run and on which nodes.
//!
//! Two allocators produce plans. The heuristic one ranks nodes by a weighted
//! resource score and spreads replicas with a greedy farthest-point pass so
//! they do not cluster. The auction one runs an ascending clock: nodes offer
//! hosting slots, services demand replica slots, the price climbs until
//! demand fits supply, and the surviving demand is matched to slots exactly.
//! Both are deterministic: identical inputs give identical plans.
//!
//! A disconnected mesh is handled per connected component, each component
//! receiving a share of the client population proportional to its size.

use crate::association::AssignmentMap;
use crate::model::{classify, ModuleKind, NodeId, NodeProfile, PlacementClass};
use crate::overlay::{hop_distance, OverlayGraph};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use thiserror::Error;

/// Identifier of one placeable service instance.
///
/// Usually the module kind name, but e.g. per-bot AI instances get one id
/// each, so instances are keyed separately from kinds.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ServiceId(pub String);

impl fmt::Display for ServiceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<&str> for ServiceId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// One service instance to place on the mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceSpec {
    pub id: ServiceId,
    pub kind: ModuleKind,
    /// Work units per assigned client per tick; must be positive.
    pub workload_per_client: u64,
    /// Whether the service maintains replicated game state.
    pub state_bearing: bool,
}

impl ServiceSpec {
    /// Placement class of the service's module kind.
    pub fn class(&self) -> PlacementClass {
        classify(self.kind)
    }
}

/// Weights of the node-ranking score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankWeights {
    pub compute: f64,
    pub battery: f64,
    pub bandwidth: f64,
}

impl Default for RankWeights {
    fn default() -> Self {
        Self {
            compute: 1.0,
            battery: 1.0,
            bandwidth: 1.0,
        }
    }
}

/// Knobs of the auction allocator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuctionParams {
    pub weights: RankWeights,
    /// Price step of the ascending clock; must be positive.
    pub price_increment: f64,
}

impl Default for AuctionParams {
    fn default() -> Self {
        Self {
            weights: RankWeights::default(),
            price_increment: 1.0,
        }
    }
}

/// Knobs of the heuristic allocator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicParams {
    pub weights: RankWeights,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        Self {
            weights: RankWeights::default(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlacementError {
    #[error("no trusted node available for service {0}")]
    NoTrustedNode(ServiceId),
    #[error("no eligible host for service {0}")]
    NoEligibleHost(ServiceId),
    #[error("service {0} has placement class {1:?} and cannot be allocated")]
    NotAllocatable(ServiceId, PlacementClass),
    #[error("service {0} has zero workload per client")]
    ZeroWorkload(ServiceId),
    #[error("duplicate service id {0}")]
    DuplicateService(ServiceId),
}

/// A placement decision: which nodes host each service instance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlacementPlan {
    entries: BTreeMap<ServiceId, (ServiceSpec, BTreeSet<NodeId>)>,
}

impl PlacementPlan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, spec: ServiceSpec, hosts: BTreeSet<NodeId>) {
        self.entries.insert(spec.id.clone(), (spec, hosts));
    }

    pub fn remove(&mut self, id: &ServiceId) {
        self.entries.remove(id);
    }

    pub fn spec(&self, id: &ServiceId) -> Option<&ServiceSpec> {
        self.entries.get(id).map(|(s, _)| s)
    }

    pub fn hosts(&self, id: &ServiceId) -> Option<&BTreeSet<NodeId>> {
        self.entries.get(id).map(|(_, h)| h)
    }

    pub fn hosts_mut(&mut self, id: &ServiceId) -> Option<&mut BTreeSet<NodeId>> {
        self.entries.get_mut(id).map(|(_, h)| h)
    }

    /// Services in ascending id order.
    pub fn services(&self) -> impl Iterator<Item = (&ServiceSpec, &BTreeSet<NodeId>)> {
        self.entries.values().map(|(s, h)| (s, h))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_host(&self, id: &ServiceId, node: &NodeId) -> bool {
        self.hosts(id).is_some_and(|h| h.contains(node))
    }

    /// Checks structural soundness: hosts exist, every service has at least
    /// one host, single-host classes have exactly one, trusted services sit
    /// on trusted nodes.
    ///
    /// `allow_universal_replication` relaxes the single-host rule for
    /// architecture-imposed plans that run a copy everywhere.
    pub fn validate(
        &self,
        g: &OverlayGraph,
        allow_universal_replication: bool,
    ) -> Result<(), PlanViolation> {
        for (spec, hosts) in self.services() {
            if hosts.is_empty() {
                return Err(PlanViolation::Unhosted(spec.id.clone()));
            }
            let replicable = spec.class() == PlacementClass::DistributableReplicable;
            if hosts.len() > 1 && !replicable && !allow_universal_replication {
                return Err(PlanViolation::MultipleHosts(spec.id.clone()));
            }
            for host in hosts {
                let node = g
                    .node(host)
                    .ok_or_else(|| PlanViolation::UnknownHost(spec.id.clone(), host.clone()))?;
                if spec.class() == PlacementClass::TrustedNode && !node.trusted {
                    return Err(PlanViolation::UntrustedHost(spec.id.clone(), host.clone()));
                }
                if spec.class() == PlacementClass::ExternalServer && !node.external {
                    return Err(PlanViolation::NotExternal(spec.id.clone(), host.clone()));
                }
            }
        }
        Ok(())
    }
}

/// A structural defect found when validating a plan.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanViolation {
    #[error("service {0} has no host")]
    Unhosted(ServiceId),
    #[error("service {0} is not replicable but has several hosts")]
    MultipleHosts(ServiceId),
    #[error("service {0} hosted on unknown node {1}")]
    UnknownHost(ServiceId, NodeId),
    #[error("trusted service {0} hosted on untrusted node {1}")]
    UntrustedHost(ServiceId, NodeId),
    #[error("external service {0} hosted on non-external node {1}")]
    NotExternal(ServiceId, NodeId),
}

/// Number of replicas a service needs to serve `clients` clients when a
/// representative node executes `node_compute` work units per tick.
///
/// Non-replicable services always get one replica. Replicable services get
/// `ceil(clients * workload / node_compute)`, at least one.
///
/// # Panics
///
/// Panics if `node_compute` is zero.
pub fn estimate_replicas(spec: &ServiceSpec, clients: u64, node_compute: u64) -> u64 {
    assert!(node_compute > 0, "node_compute must be positive");
    if spec.class() != PlacementClass::DistributableReplicable {
        return 1;
    }
    let total = u128::from(clients) * u128::from(spec.workload_per_client);
    let per_node = u128::from(node_compute);
    let replicas = total.div_ceil(per_node).max(1);
    u64::try_from(replicas).unwrap_or(u64::MAX)
}

/// Ranking score of one node.
pub fn rank_score(node: &NodeProfile, weights: RankWeights) -> f64 {
    weights.compute * node.compute as f64
        + weights.battery * node.battery as f64
        + weights.bandwidth * node.best_bandwidth()
}

/// Ranks nodes by descending score, breaking ties by ascending node id.
pub fn rank_nodes(profiles: &[&NodeProfile], weights: RankWeights) -> Vec<NodeId> {
    let mut ranked: Vec<(&NodeProfile, f64)> = profiles
        .iter()
        .map(|p| (*p, rank_score(p, weights)))
        .collect();
    ranked.sort_by(|(a, sa), (b, sb)| {
        sb.total_cmp(sa).then_with(|| a.node_id.cmp(&b.node_id))
    });
    ranked.into_iter().map(|(p, _)| p.node_id.clone()).collect()
}

// ---------------------------------------------------------------------------
// Shared allocator scaffolding
// ---------------------------------------------------------------------------

/// A unit of allocation: either one service or the co-placed core group
/// (physics, collision detection, game state) treated as a single item.
struct AllocItem {
    /// Smallest member service id; used for ordering and error reporting.
    rep: ServiceId,
    members: Vec<ServiceSpec>,
    clients: u64,
    /// Summed workload per client over members.
    workload: u64,
    replicable: bool,
    trusted_only: bool,
}

impl AllocItem {
    fn total_workload(&self) -> u128 {
        u128::from(self.clients) * u128::from(self.workload)
    }
}

const CORE_AFFINITY_KINDS: [ModuleKind; 3] = [
    ModuleKind::PhysicsSystem,
    ModuleKind::CollisionDetection,
    ModuleKind::GameStateManagement,
];

fn check_services(services: &[ServiceSpec]) -> Result<(), PlacementError> {
    let mut seen = BTreeSet::new();
    for spec in services {
        if !seen.insert(spec.id.clone()) {
            return Err(PlacementError::DuplicateService(spec.id.clone()));
        }
        if spec.workload_per_client == 0 {
            return Err(PlacementError::ZeroWorkload(spec.id.clone()));
        }
        match spec.class() {
            PlacementClass::Distributable
            | PlacementClass::DistributableReplicable
            | PlacementClass::TrustedNode => {}
            class => return Err(PlacementError::NotAllocatable(spec.id.clone(), class)),
        }
    }
    Ok(())
}

/// Groups services into allocation items, merging the core trio when
/// `core_affinity` is set, and orders items by descending total workload
/// (ties by ascending representative id).
fn build_items(
    services: &[ServiceSpec],
    clients: &BTreeMap<ServiceId, u64>,
    core_affinity: bool,
) -> Vec<AllocItem> {
    let client_count = |id: &ServiceId| clients.get(id).copied().unwrap_or(0);
    let mut items: Vec<AllocItem> = Vec::new();
    let mut grouped: Vec<&ServiceSpec> = Vec::new();
    if core_affinity {
        grouped = services
            .iter()
            .filter(|s| CORE_AFFINITY_KINDS.contains(&s.kind))
            .collect();
        if grouped.len() > 1 {
            let mut members: Vec<ServiceSpec> = grouped.iter().map(|s| (*s).clone()).collect();
            members.sort_by(|a, b| a.id.cmp(&b.id));
            items.push(AllocItem {
                rep: members[0].id.clone(),
                clients: members.iter().map(|m| client_count(&m.id)).max().unwrap(),
                workload: members.iter().map(|m| m.workload_per_client).sum(),
                replicable: true,
                trusted_only: false,
                members,
            });
        } else {
            grouped.clear();
        }
    }
    for spec in services {
        if grouped.iter().any(|g| g.id == spec.id) {
            continue;
        }
        items.push(AllocItem {
            rep: spec.id.clone(),
            clients: client_count(&spec.id),
            workload: spec.workload_per_client,
            replicable: spec.class() == PlacementClass::DistributableReplicable,
            trusted_only: spec.class() == PlacementClass::TrustedNode,
            members: vec![spec.clone()],
        });
    }
    items.sort_by(|a, b| {
        b.total_workload()
            .cmp(&a.total_workload())
            .then_with(|| a.rep.cmp(&b.rep))
    });
    items
}

/// Connected components of the mesh, each sorted, ordered by smallest member.
fn components(g: &OverlayGraph) -> Vec<BTreeSet<NodeId>> {
    let mut seen: BTreeSet<NodeId> = BTreeSet::new();
    let mut out = Vec::new();
    for start in g.node_ids() {
        if seen.contains(start) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut queue = VecDeque::from([start.clone()]);
        seen.insert(start.clone());
        comp.insert(start.clone());
        while let Some(u) = queue.pop_front() {
            for v in g.neighbors(&u) {
                if seen.insert(v.clone()) {
                    comp.insert(v.clone());
                    queue.push_back(v.clone());
                }
            }
        }
        out.push(comp);
    }
    out
}

fn ceil_div(num: u128, den: u128) -> u64 {
    u64::try_from(num.div_ceil(den)).unwrap_or(u64::MAX)
}

/// Expected per-replica load assuming clients split evenly across replicas.
fn per_replica_load(clients: u64, workload: u64, replicas: u64) -> u64 {
    ceil_div(
        u128::from(clients) * u128::from(workload),
        u128::from(replicas.max(1)),
    )
}

/// Replica count for an item, sized against the mean compute of the
/// eligible nodes.
fn item_replicas(item: &AllocItem, eligible: &[&NodeProfile]) -> u64 {
    if !item.replicable {
        return 1;
    }
    let total: u128 = eligible.iter().map(|n| u128::from(n.compute)).sum();
    let mean = u64::try_from(total / eligible.len() as u128)
        .unwrap_or(u64::MAX)
        .max(1);
    let probe = &item.members[0];
    debug_assert!(probe.class() == PlacementClass::DistributableReplicable);
    estimate_replicas(
        &ServiceSpec {
            workload_per_client: item.workload,
            ..probe.clone()
        },
        item.clients,
        mean,
    )
}

fn scale_clients(total: u64, comp_players: usize, all_players: usize) -> u64 {
    if all_players == 0 || comp_players == all_players {
        return total;
    }
    ceil_div(
        u128::from(total) * comp_players as u128,
        all_players as u128,
    )
}

fn eligibility_error(item: &AllocItem) -> PlacementError {
    if item.trusted_only {
        PlacementError::NoTrustedNode(item.rep.clone())
    } else {
        PlacementError::NoEligibleHost(item.rep.clone())
    }
}

// ---------------------------------------------------------------------------
// Heuristic allocator
// ---------------------------------------------------------------------------

/// Greedy rank-and-spread allocation.
///
/// Services are processed in descending total-workload order. Each gets its
/// replica count from [`estimate_replicas`]; the first host is the highest
/// ranked eligible node, and each further host maximizes the minimum hop
/// distance to the hosts already chosen (ties by rank). A node's residual
/// compute shrinks by the expected per-replica load as it is chosen, and
/// nodes without enough residual are skipped.
pub fn allocate_heuristic(
    services: &[ServiceSpec],
    g: &OverlayGraph,
    clients: &BTreeMap<ServiceId, u64>,
    params: HeuristicParams,
    core_affinity: bool,
) -> Result<PlacementPlan, PlacementError> {
    check_services(services)?;
    let items = build_items(services, clients, core_affinity);
    let all_players = g.nodes().filter(|n| !n.external).count();
    let mut plan = PlacementPlan::new();
    for comp in components(g) {
        let players: Vec<&NodeProfile> = comp
            .iter()
            .filter_map(|id| g.node(id))
            .filter(|n| !n.external)
            .collect();
        if players.is_empty() {
            continue;
        }
        let mut residual: BTreeMap<NodeId, u64> = players
            .iter()
            .map(|n| (n.node_id.clone(), n.compute))
            .collect();
        for item in &items {
            let eligible: Vec<&NodeProfile> = players
                .iter()
                .copied()
                .filter(|n| !item.trusted_only || n.trusted)
                .collect();
            if eligible.is_empty() {
                return Err(eligibility_error(item));
            }
            let comp_clients = scale_clients(item.clients, players.len(), all_players);
            let scaled = AllocItem {
                clients: comp_clients,
                rep: item.rep.clone(),
                members: item.members.clone(),
                workload: item.workload,
                replicable: item.replicable,
                trusted_only: item.trusted_only,
            };
            let replicas = item_replicas(&scaled, &eligible);
            let load = per_replica_load(comp_clients, item.workload, replicas);
            let ranked = rank_nodes(&eligible, params.weights);
            let mut chosen: Vec<NodeId> = Vec::new();
            while (chosen.len() as u64) < replicas {
                let candidates: Vec<&NodeId> = ranked
                    .iter()
                    .filter(|id| !chosen.contains(id) && residual[*id] >= load)
                    .collect();
                if candidates.is_empty() {
                    break;
                }
                let pick = if chosen.is_empty() {
                    candidates[0].clone()
                } else {
                    // Farthest-point step: maximize the minimum hop distance
                    // to the hosts picked so far; rank order breaks ties.
                    let mut best: Option<(u64, &NodeId)> = None;
                    for cand in &candidates {
                        let spread = chosen
                            .iter()
                            .map(|c| {
                                hop_distance(g, cand, c)
                                    .expect("nodes exist")
                                    .unwrap_or(0)
                            })
                            .min()
                            .unwrap_or(0);
                        if best.is_none_or(|(s, _)| spread > s) {
                            best = Some((spread, cand));
                        }
                    }
                    best.expect("candidates non-empty").1.clone()
                };
                *residual.get_mut(&pick).unwrap() -= load;
                chosen.push(pick);
            }
            if chosen.is_empty() {
                return Err(eligibility_error(item));
            }
            let hosts: BTreeSet<NodeId> = chosen.into_iter().collect();
            for member in &item.members {
                let mut all = plan
                    .hosts(&member.id)
                    .cloned()
                    .unwrap_or_default();
                all.extend(hosts.iter().cloned());
                plan.insert(member.clone(), all);
            }
        }
    }
    if plan.is_empty() && !services.is_empty() {
        return Err(PlacementError::NoEligibleHost(services[0].id.clone()));
    }
    Ok(plan)
}

// ---------------------------------------------------------------------------
// Auction allocator
// ---------------------------------------------------------------------------

/// Ascending-clock auction allocation.
///
/// Every node offers `floor(compute / max_per_replica_load)` hosting slots;
/// every service demands its replica count. While demand exceeds supply the
/// clock price rises by `price_increment`, and a service drops any demanded
/// slot whose candidate host scores below the price (never dropping its last
/// slot). The surviving demand is then matched to slots by a
/// maximum-cardinality assignment that tries higher-scoring hosts first.
pub fn allocate_auction(
    services: &[ServiceSpec],
    g: &OverlayGraph,
    clients: &BTreeMap<ServiceId, u64>,
    params: AuctionParams,
    core_affinity: bool,
) -> Result<PlacementPlan, PlacementError> {
    assert!(params.price_increment > 0.0, "price increment must be positive");
    check_services(services)?;
    let items = build_items(services, clients, core_affinity);
    let all_players = g.nodes().filter(|n| !n.external).count();
    let mut plan = PlacementPlan::new();
    for comp in components(g) {
        let players: Vec<&NodeProfile> = comp
            .iter()
            .filter_map(|id| g.node(id))
            .filter(|n| !n.external)
            .collect();
        if players.is_empty() {
            continue;
        }
        auction_component(&items, &players, all_players, params, &mut plan)?;
    }
    if plan.is_empty() && !services.is_empty() {
        return Err(PlacementError::NoEligibleHost(services[0].id.clone()));
    }
    Ok(plan)
}

struct Bidder<'a> {
    item: &'a AllocItem,
    replicas: u64,
    /// Eligible hosts in descending score order (ties ascending id).
    candidates: Vec<(NodeId, f64)>,
}

fn auction_component(
    items: &[AllocItem],
    players: &[&NodeProfile],
    all_players: usize,
    params: AuctionParams,
    plan: &mut PlacementPlan,
) -> Result<(), PlacementError> {
    if items.is_empty() {
        return Ok(());
    }
    // Per-replica loads determine the slot size every node offers.
    let mut loads: Vec<u64> = Vec::new();
    let mut bidders: Vec<Bidder> = Vec::new();
    for item in items {
        let eligible: Vec<&NodeProfile> = players
            .iter()
            .copied()
            .filter(|n| !item.trusted_only || n.trusted)
            .collect();
        if eligible.is_empty() {
            return Err(eligibility_error(item));
        }
        let comp_clients = scale_clients(item.clients, players.len(), all_players);
        let scaled = AllocItem {
            clients: comp_clients,
            rep: item.rep.clone(),
            members: item.members.clone(),
            workload: item.workload,
            replicable: item.replicable,
            trusted_only: item.trusted_only,
        };
        let replicas = item_replicas(&scaled, &eligible);
        loads.push(per_replica_load(comp_clients, item.workload, replicas));
        let mut candidates: Vec<(NodeId, f64)> = eligible
            .iter()
            .map(|n| (n.node_id.clone(), rank_score(n, params.weights)))
            .collect();
        candidates.sort_by(|(ida, sa), (idb, sb)| sb.total_cmp(sa).then_with(|| ida.cmp(idb)));
        bidders.push(Bidder {
            item,
            replicas,
            candidates,
        });
    }
    let max_load = loads.iter().copied().max().unwrap_or(1).max(1);
    let slots: BTreeMap<NodeId, u64> = players
        .iter()
        .map(|n| (n.node_id.clone(), n.compute / max_load))
        .collect();
    let supply: u64 = slots.values().sum();

    // Candidates must still be able to host at all.
    for bidder in &mut bidders {
        bidder.candidates.retain(|(id, _)| slots[id] >= 1);
        if bidder.candidates.is_empty() {
            return Err(eligibility_error(bidder.item));
        }
    }

    // Ascending clock: demand shrinks as the price overtakes candidate
    // scores; a bidder never abandons its last slot.
    let max_score = bidders
        .iter()
        .flat_map(|b| b.candidates.iter().map(|(_, s)| *s))
        .fold(f64::MIN, f64::max);
    let mut price = 0.0;
    let demand_at = |bidder: &Bidder, price: f64| -> u64 {
        let affordable = bidder
            .candidates
            .iter()
            .filter(|(_, s)| *s >= price)
            .count() as u64;
        affordable.min(bidder.replicas).max(1)
    };
    loop {
        let demand: u64 = bidders.iter().map(|b| demand_at(b, price)).sum();
        if demand <= supply || price > max_score {
            break;
        }
        price += params.price_increment;
    }

    // Match surviving demand to slots: maximum cardinality, trying
    // higher-scoring hosts first so ample supply yields the score-greedy
    // assignment.
    let demands: Vec<u64> = bidders.iter().map(|b| demand_at(b, price)).collect();
    let mut held: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    let mut assigned: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); bidders.len()];

    fn try_place(
        who: usize,
        bidders: &[Bidder],
        slots: &BTreeMap<NodeId, u64>,
        held: &mut BTreeMap<NodeId, Vec<usize>>,
        assigned: &mut Vec<BTreeSet<NodeId>>,
        visited: &mut BTreeSet<NodeId>,
    ) -> bool {
        let candidates: Vec<NodeId> = bidders[who]
            .candidates
            .iter()
            .map(|(id, _)| id.clone())
            .filter(|id| !assigned[who].contains(id) && !visited.contains(id))
            .collect();
        for node in candidates {
            visited.insert(node.clone());
            let free = slots[&node] > held.get(&node).map_or(0, Vec::len) as u64;
            if free {
                held.entry(node.clone()).or_default().push(who);
                assigned[who].insert(node);
                return true;
            }
            let holders = held.get(&node).cloned().unwrap_or_default();
            for (pos, other) in holders.iter().enumerate() {
                if try_place(*other, bidders, slots, held, assigned, visited) {
                    assigned[*other].remove(&node);
                    let list = held.get_mut(&node).unwrap();
                    list.remove(pos);
                    list.push(who);
                    assigned[who].insert(node);
                    return true;
                }
            }
        }
        false
    }

    // One full augmenting pass per demanded slot, repeated until a whole
    // sweep places nothing more, guarantees maximum cardinality.
    loop {
        let mut progress = false;
        for (idx, demand) in demands.iter().enumerate() {
            while (assigned[idx].len() as u64) < *demand {
                let mut visited = BTreeSet::new();
                if try_place(idx, &bidders, &slots, &mut held, &mut assigned, &mut visited) {
                    progress = true;
                } else {
                    break;
                }
            }
        }
        if !progress {
            break;
        }
    }

    for (idx, bidder) in bidders.iter().enumerate() {
        if assigned[idx].is_empty() {
            return Err(eligibility_error(bidder.item));
        }
        for member in &bidder.item.members {
            let mut all = plan.hosts(&member.id).cloned().unwrap_or_default();
            all.extend(assigned[idx].iter().cloned());
            plan.insert(member.clone(), all);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Plan cost
// ---------------------------------------------------------------------------

/// Aggregate cost of a plan under an assignment: the largest per-node load
/// and the mean client-to-replica hop distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanCost {
    pub max_node_load: u64,
    pub mean_client_hops: f64,
}

/// Computes [`PlanCost`] for a plan and its client assignment.
///
/// A node's load sums, over the services it hosts, the number of clients
/// assigned to it times the service workload. The hop mean runs over every
/// (client, assigned replica) pair; it is zero when there are no clients.
pub fn plan_cost(plan: &PlacementPlan, g: &OverlayGraph, assignment: &AssignmentMap) -> PlanCost {
    let mut load: BTreeMap<NodeId, u64> = BTreeMap::new();
    let mut hops_total: u64 = 0;
    let mut pairs: u64 = 0;
    for (spec, hosts) in plan.services() {
        for host in hosts {
            let assigned = assignment.clients_of(&spec.id, host);
            let extra = assigned.len() as u64 * spec.workload_per_client;
            *load.entry(host.clone()).or_default() += extra;
            for client in assigned {
                let d = hop_distance(g, client, host)
                    .ok()
                    .flatten()
                    .unwrap_or(0);
                hops_total += d;
                pairs += 1;
            }
        }
    }
    PlanCost {
        max_node_load: load.values().copied().max().unwrap_or(0),
        mean_client_hops: if pairs == 0 {
            0.0
        } else {
            hops_total as f64 / pairs as f64
        },
    }
}

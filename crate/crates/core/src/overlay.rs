//! Geometric mesh overlay and hop routing.
//!
//! Two nodes are linked when they sit within radio range of each other; the
//! external server is linked to every node owning a long-range interface.
//! Routing tables come from a breadth-first search rooted at every node, with
//! neighbors explored in ascending node-id order so that routes, trees, and
//! therefore whole simulations are reproducible. Reconfiguration after a
//! join, leave, or move rebuilds the affected structures from scratch;
//! rebuilding is the semantics, incremental updates would just have to match
//! it.

use crate::model::{euclidean_distance, NodeId, NodeProfile, Position};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OverlayError {
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
}

/// Mesh construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeshParams {
    /// Hop-equivalent cost of the link between a long-range interface and
    /// the external server.
    pub long_range_hop_cost: u32,
}

impl Default for MeshParams {
    fn default() -> Self {
        Self {
            long_range_hop_cost: 1,
        }
    }
}

/// Membership change applied to the mesh.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshEvent {
    Join(NodeProfile),
    Leave(NodeId),
    Move(NodeId, Position),
}

type RouteEntry = (u64, NodeId); // (hop distance, next hop)

/// The mesh: node profiles, adjacency, and per-source routing tables.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlayGraph {
    params: MeshParams,
    nodes: BTreeMap<NodeId, NodeProfile>,
    /// Sorted adjacency lists with per-edge hop cost.
    adj: BTreeMap<NodeId, Vec<(NodeId, u32)>>,
    /// For each source, the reachable destinations with distance and next hop.
    routes: BTreeMap<NodeId, BTreeMap<NodeId, RouteEntry>>,
}

impl OverlayGraph {
    pub fn params(&self) -> MeshParams {
        self.params
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn node(&self, id: &NodeId) -> Option<&NodeProfile> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeProfile> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.keys()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Neighbor ids in ascending order.
    pub fn neighbors(&self, id: &NodeId) -> impl Iterator<Item = &NodeId> {
        self.adj.get(id).into_iter().flatten().map(|(n, _)| n)
    }

    pub fn is_adjacent(&self, a: &NodeId, b: &NodeId) -> bool {
        self.adj
            .get(a)
            .is_some_and(|list| list.iter().any(|(n, _)| n == b))
    }

    /// Normalized undirected edge set, for structural comparisons.
    pub fn edges(&self) -> BTreeSet<(NodeId, NodeId)> {
        let mut set = BTreeSet::new();
        for (u, list) in &self.adj {
            for (v, _) in list {
                let (a, b) = if u < v { (u, v) } else { (v, u) };
                set.insert((a.clone(), b.clone()));
            }
        }
        set
    }

    /// Next node on the minimum-hop route from `from` towards `to`.
    pub fn next_hop(&self, from: &NodeId, to: &NodeId) -> Option<&NodeId> {
        self.routes
            .get(from)
            .and_then(|t| t.get(to))
            .map(|(_, next)| next)
    }

    /// Hop cost of the edge between two adjacent nodes.
    pub fn edge_cost(&self, a: &NodeId, b: &NodeId) -> Option<u32> {
        self.adj
            .get(a)
            .and_then(|list| list.iter().find(|(n, _)| n == b).map(|(_, c)| *c))
    }
}

fn linked(a: &NodeProfile, b: &NodeProfile, params: MeshParams) -> Option<u32> {
    match (a.external, b.external) {
        (false, false) => {
            let reach = a.radio_range.min(b.radio_range);
            (euclidean_distance(a.position, b.position) <= reach).then_some(1)
        }
        (true, false) => b.has_long_range().then_some(params.long_range_hop_cost),
        (false, true) => a.has_long_range().then_some(params.long_range_hop_cost),
        (true, true) => None,
    }
}

/// Builds the mesh for a set of node profiles with default parameters.
pub fn build_mesh(profiles: &[NodeProfile]) -> Result<OverlayGraph, OverlayError> {
    build_mesh_with(profiles, MeshParams::default())
}

/// Builds the mesh for a set of node profiles.
///
/// Fails on duplicate node ids. Node order does not matter: the graph is a
/// pure function of the profile set.
pub fn build_mesh_with(
    profiles: &[NodeProfile],
    params: MeshParams,
) -> Result<OverlayGraph, OverlayError> {
    let mut nodes: BTreeMap<NodeId, NodeProfile> = BTreeMap::new();
    for p in profiles {
        if nodes.insert(p.node_id.clone(), p.clone()).is_some() {
            return Err(OverlayError::DuplicateNode(p.node_id.clone()));
        }
    }

    let mut adj: BTreeMap<NodeId, Vec<(NodeId, u32)>> = BTreeMap::new();
    for id in nodes.keys() {
        adj.insert(id.clone(), Vec::new());
    }
    let ids: Vec<&NodeId> = nodes.keys().collect();
    for (i, u) in ids.iter().enumerate() {
        for v in &ids[i + 1..] {
            if let Some(cost) = linked(&nodes[*u], &nodes[*v], params) {
                adj.get_mut(*u).unwrap().push(((*v).clone(), cost));
                adj.get_mut(*v).unwrap().push(((*u).clone(), cost));
            }
        }
    }
    for list in adj.values_mut() {
        list.sort();
    }

    let mut graph = OverlayGraph {
        params,
        nodes,
        adj,
        routes: BTreeMap::new(),
    };
    graph.routes = compute_routes(&graph);
    Ok(graph)
}

/// Shortest-path tree from `root`: discovery-ordered node list plus parent
/// and distance maps.
struct SourceTree {
    order: Vec<NodeId>,
    parent: BTreeMap<NodeId, NodeId>,
    dist: BTreeMap<NodeId, u64>,
}

fn source_tree(g: &OverlayGraph, root: &NodeId) -> SourceTree {
    let unit_costs = g
        .adj
        .values()
        .flatten()
        .all(|(_, c)| *c == 1);
    if unit_costs {
        bfs_tree(g, root)
    } else {
        dijkstra_tree(g, root)
    }
}

fn bfs_tree(g: &OverlayGraph, root: &NodeId) -> SourceTree {
    let mut order = vec![root.clone()];
    let mut parent = BTreeMap::new();
    let mut dist = BTreeMap::from([(root.clone(), 0u64)]);
    let mut queue = VecDeque::from([root.clone()]);
    while let Some(u) = queue.pop_front() {
        let du = dist[&u];
        for (v, _) in g.adj.get(&u).into_iter().flatten() {
            if !dist.contains_key(v) {
                dist.insert(v.clone(), du + 1);
                parent.insert(v.clone(), u.clone());
                order.push(v.clone());
                queue.push_back(v.clone());
            }
        }
    }
    SourceTree {
        order,
        parent,
        dist,
    }
}

fn dijkstra_tree(g: &OverlayGraph, root: &NodeId) -> SourceTree {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let mut dist: BTreeMap<NodeId, u64> = BTreeMap::from([(root.clone(), 0)]);
    let mut parent: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut settled: BTreeSet<NodeId> = BTreeSet::new();
    let mut order = Vec::new();
    let mut heap = BinaryHeap::from([Reverse((0u64, root.clone()))]);
    while let Some(Reverse((du, u))) = heap.pop() {
        if !settled.insert(u.clone()) {
            continue;
        }
        order.push(u.clone());
        for (v, cost) in g.adj.get(&u).into_iter().flatten() {
            if settled.contains(v) {
                continue;
            }
            let nd = du + u64::from(*cost);
            let better = match dist.get(v) {
                None => true,
                Some(&old) => nd < old || (nd == old && parent.get(v).is_some_and(|p| u < *p)),
            };
            if better {
                dist.insert(v.clone(), nd);
                parent.insert(v.clone(), u.clone());
                heap.push(Reverse((nd, v.clone())));
            }
        }
    }
    SourceTree {
        order,
        parent,
        dist,
    }
}

fn compute_routes(g: &OverlayGraph) -> BTreeMap<NodeId, BTreeMap<NodeId, RouteEntry>> {
    let mut routes = BTreeMap::new();
    for root in g.nodes.keys() {
        let tree = source_tree(g, root);
        let mut table: BTreeMap<NodeId, RouteEntry> = BTreeMap::new();
        let mut first_step: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        for v in &tree.order {
            if v == root {
                continue;
            }
            let p = &tree.parent[v];
            let step = if p == root {
                v.clone()
            } else {
                first_step[p].clone()
            };
            first_step.insert(v.clone(), step.clone());
            table.insert(v.clone(), (tree.dist[v], step));
        }
        routes.insert(root.clone(), table);
    }
    routes
}

/// Minimum hop count between two nodes, `None` when unreachable.
pub fn hop_distance(
    g: &OverlayGraph,
    a: &NodeId,
    b: &NodeId,
) -> Result<Option<u64>, OverlayError> {
    if !g.contains(a) {
        return Err(OverlayError::UnknownNode(a.clone()));
    }
    if !g.contains(b) {
        return Err(OverlayError::UnknownNode(b.clone()));
    }
    if a == b {
        return Ok(Some(0));
    }
    Ok(g.routes[a].get(b).map(|(d, _)| *d))
}

/// Applies a membership event and returns the resulting mesh.
///
/// The result is identical to rebuilding from the updated profile set.
pub fn reconfigure(g: &OverlayGraph, event: MeshEvent) -> Result<OverlayGraph, OverlayError> {
    let mut profiles: Vec<NodeProfile> = g.nodes.values().cloned().collect();
    match event {
        MeshEvent::Join(profile) => {
            if g.contains(&profile.node_id) {
                return Err(OverlayError::DuplicateNode(profile.node_id));
            }
            profiles.push(profile);
        }
        MeshEvent::Leave(id) => {
            if !g.contains(&id) {
                return Err(OverlayError::UnknownNode(id));
            }
            profiles.retain(|p| p.node_id != id);
        }
        MeshEvent::Move(id, position) => {
            let profile = profiles
                .iter_mut()
                .find(|p| p.node_id == id)
                .ok_or(OverlayError::UnknownNode(id))?;
            profile.position = position;
        }
    }
    build_mesh_with(&profiles, g.params)
}

/// Breadth-first broadcast tree rooted at `root`, covering its component.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastTree {
    pub root: NodeId,
    /// Parent of every non-root tree node.
    pub parent: BTreeMap<NodeId, NodeId>,
    /// Children in ascending id order; present for every tree node.
    pub children: BTreeMap<NodeId, Vec<NodeId>>,
    /// Hop depth of every tree node; the root has depth zero.
    pub depth: BTreeMap<NodeId, u64>,
}

impl BroadcastTree {
    pub fn contains(&self, id: &NodeId) -> bool {
        self.depth.contains_key(id)
    }

    pub fn children_of(&self, id: &NodeId) -> &[NodeId] {
        self.children.get(id).map_or(&[], Vec::as_slice)
    }

    /// Keeps only the branches leading to `keep` nodes (plus the root).
    pub fn pruned_to(&self, keep: &BTreeSet<NodeId>) -> BroadcastTree {
        let mut needed: BTreeSet<NodeId> = BTreeSet::from([self.root.clone()]);
        for id in keep {
            let mut cur = id;
            while !needed.contains(cur) {
                needed.insert(cur.clone());
                match self.parent.get(cur) {
                    Some(p) => cur = p,
                    None => break,
                }
            }
        }
        let parent: BTreeMap<NodeId, NodeId> = self
            .parent
            .iter()
            .filter(|(v, _)| needed.contains(*v))
            .map(|(v, p)| (v.clone(), p.clone()))
            .collect();
        let mut children: BTreeMap<NodeId, Vec<NodeId>> =
            needed.iter().map(|id| (id.clone(), Vec::new())).collect();
        for (v, p) in &parent {
            children.get_mut(p).unwrap().push(v.clone());
        }
        for list in children.values_mut() {
            list.sort();
        }
        let depth = self
            .depth
            .iter()
            .filter(|(v, _)| needed.contains(*v))
            .map(|(v, d)| (v.clone(), *d))
            .collect();
        BroadcastTree {
            root: self.root.clone(),
            parent,
            children,
            depth,
        }
    }
}

/// Builds the broadcast tree rooted at `root`.
///
/// Every node in the root's connected component appears exactly once, and
/// its depth equals its hop distance from the root.
pub fn broadcast_cover(g: &OverlayGraph, root: &NodeId) -> Result<BroadcastTree, OverlayError> {
    if !g.contains(root) {
        return Err(OverlayError::UnknownNode(root.clone()));
    }
    let tree = source_tree(g, root);
    let mut children: BTreeMap<NodeId, Vec<NodeId>> = tree
        .order
        .iter()
        .map(|id| (id.clone(), Vec::new()))
        .collect();
    for (v, p) in &tree.parent {
        children.get_mut(p).unwrap().push(v.clone());
    }
    for list in children.values_mut() {
        list.sort();
    }
    Ok(BroadcastTree {
        root: root.clone(),
        parent: tree.parent,
        children,
        depth: tree.dist,
    })
}

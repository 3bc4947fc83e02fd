//! Client-to-replica association and dissemination trees.
//!
//! Once services are placed, every node that does not host a service becomes
//! a client of exactly one of its replicas. Clients are processed in
//! ascending id order and greedily take the closest replica that still has
//! capacity, ties going to the smaller replica id. Each replica then gets a
//! dissemination tree: its broadcast tree pruned to the branches that lead
//! to its clients.

use crate::model::NodeId;
use crate::overlay::{broadcast_cover, hop_distance, BroadcastTree, OverlayGraph};
use crate::placement::{PlacementPlan, ServiceId};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssociationError {
    #[error("capacity of service {0} exhausted; client {1} cannot be assigned")]
    CapacityExhausted(ServiceId, NodeId),
    #[error("client {1} cannot reach any replica of service {0}")]
    UnreachableReplicas(ServiceId, NodeId),
    #[error("client {1} is not covered by the tree rooted at {0}")]
    ClientNotCovered(NodeId, NodeId),
}

/// Which replica serves each client, per service.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssignmentMap {
    /// service -> client -> serving replica
    by_client: BTreeMap<ServiceId, BTreeMap<NodeId, NodeId>>,
    /// service -> replica -> served clients
    by_replica: BTreeMap<ServiceId, BTreeMap<NodeId, BTreeSet<NodeId>>>,
}

static NO_CLIENTS: BTreeSet<NodeId> = BTreeSet::new();

impl AssignmentMap {
    pub fn assign(&mut self, service: &ServiceId, client: NodeId, replica: NodeId) {
        self.by_client
            .entry(service.clone())
            .or_default()
            .insert(client.clone(), replica.clone());
        self.by_replica
            .entry(service.clone())
            .or_default()
            .entry(replica)
            .or_default()
            .insert(client);
    }

    /// Replica serving `client` for `service`, if any.
    pub fn replica_of(&self, service: &ServiceId, client: &NodeId) -> Option<&NodeId> {
        self.by_client.get(service)?.get(client)
    }

    /// Clients served by `replica` for `service`, in ascending order.
    pub fn clients_of(&self, service: &ServiceId, replica: &NodeId) -> &BTreeSet<NodeId> {
        self.by_replica
            .get(service)
            .and_then(|m| m.get(replica))
            .unwrap_or(&NO_CLIENTS)
    }

    /// All (client, replica) pairs of a service, ascending by client.
    pub fn pairs_of(&self, service: &ServiceId) -> impl Iterator<Item = (&NodeId, &NodeId)> {
        self.by_client.get(service).into_iter().flatten()
    }

    /// Services present in the map, ascending.
    pub fn services(&self) -> impl Iterator<Item = &ServiceId> {
        self.by_client.keys()
    }

    /// Removes a service's assignments entirely.
    pub fn clear_service(&mut self, service: &ServiceId) {
        self.by_client.remove(service);
        self.by_replica.remove(service);
    }
}

/// Default per-service client cap of a replica: an even share of the client
/// population plus one slack slot.
pub fn default_capacity_cap(clients: u64, replicas: u64) -> u64 {
    clients.div_ceil(replicas.max(1)) + 1
}

/// The nodes that consume a service: every non-external mesh node that does
/// not host it.
fn clients_of_service(g: &OverlayGraph, hosts: &BTreeSet<NodeId>) -> Vec<NodeId> {
    g.nodes()
        .filter(|n| !n.external && !hosts.contains(&n.node_id))
        .map(|n| n.node_id.clone())
        .collect()
}

/// Assigns every client of every planned service to a replica.
///
/// Clients are taken in ascending id order; each picks the minimum-hop
/// replica that still has spare capacity, ties broken by the smaller replica
/// id. `caps` overrides the per-service default cap for the nodes it names
/// (a node's cap bounds the clients it serves for each hosted service;
/// hosting itself does not consume capacity).
pub fn assign_clients(
    plan: &PlacementPlan,
    g: &OverlayGraph,
    caps: &BTreeMap<NodeId, u64>,
) -> Result<AssignmentMap, AssociationError> {
    let mut map = AssignmentMap::default();
    for (spec, hosts) in plan.services() {
        let clients = clients_of_service(g, hosts);
        let default_cap = default_capacity_cap(clients.len() as u64, hosts.len() as u64);
        let mut residual: BTreeMap<&NodeId, u64> = hosts
            .iter()
            .map(|h| (h, caps.get(h).copied().unwrap_or(default_cap)))
            .collect();
        for client in &clients {
            let mut best: Option<(u64, &NodeId)> = None;
            let mut any_reachable = false;
            for host in hosts {
                let Some(d) = hop_distance(g, client, host).expect("nodes exist") else {
                    continue;
                };
                any_reachable = true;
                if residual[host] == 0 {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bd, bh)) => d < bd || (d == bd && host < bh),
                };
                if better {
                    best = Some((d, host));
                }
            }
            match best {
                Some((_, host)) => {
                    *residual.get_mut(host).unwrap() -= 1;
                    map.assign(&spec.id, client.clone(), host.clone());
                }
                None if any_reachable => {
                    return Err(AssociationError::CapacityExhausted(
                        spec.id.clone(),
                        client.clone(),
                    ));
                }
                None => {
                    return Err(AssociationError::UnreachableReplicas(
                        spec.id.clone(),
                        client.clone(),
                    ));
                }
            }
        }
    }
    Ok(map)
}

/// Builds the update-dissemination tree of one replica: its broadcast tree
/// pruned to the branches containing its clients.
///
/// Every client keeps its minimum-hop depth. Fails if some client is not in
/// the replica's component.
pub fn build_dissemination_tree(
    g: &OverlayGraph,
    replica: &NodeId,
    clients: &BTreeSet<NodeId>,
) -> Result<BroadcastTree, AssociationError> {
    let full = broadcast_cover(g, replica)
        .map_err(|_| AssociationError::ClientNotCovered(replica.clone(), replica.clone()))?;
    for client in clients {
        if !full.contains(client) {
            return Err(AssociationError::ClientNotCovered(
                replica.clone(),
                client.clone(),
            ));
        }
    }
    Ok(full.pruned_to(clients))
}

//! Deterministic simulation of multiplayer online games hosted on meshes of
//! shared mobile devices.
//!
//! The crate models a game session in which the players' own devices, pooled
//! into per-player personal area networks (PANs), provide the compute,
//! battery, and radio resources that run the game. Game software is split
//! into modules with different placement constraints: some must run on every
//! node, some can be delegated to any node, some can be replicated, and a
//! couple need an external server or a trusted node. The simulator places
//! those services on the mesh, associates clients with replicas, routes
//! messages hop by hop, keeps replicated state consistent through a
//! deterministic event order, and accounts for every unit of energy spent.
//!
//! Everything is deterministic: a scenario, an architecture, and a seed fully
//! determine the output report, byte for byte.
//!
//! Module map:
//! - [`model`]: vocabulary types (module catalog, placement classes, devices,
//!   nodes, links, geometry).
//! - [`pan`]: per-player device aggregation (coordinator election, gateway
//!   selection, PAN profile).
//! - [`overlay`]: geometric mesh graph, hop routing, broadcast trees.
//! - [`placement`]: replica estimation, node ranking, heuristic and auction
//!   allocators.
//! - [`association`]: client-to-replica assignment and dissemination trees.
//! - [`sync`]: event ordering, deterministic state transitions, digests,
//!   dead reckoning.
//! - [`scenario`]: scenario file schema, parsing, validation.
//! - [`sim`]: the discrete-event simulator itself.
//! - [`metrics`]: run report types and their CSV/JSON encodings.
//! - [`rng`]: the SplitMix64 generator used for all simulation randomness.
//! - [`batch`]: running independent (seed, architecture) combinations,
//!   in parallel when the `parallel` feature is enabled.

pub mod association;
pub mod batch;
pub mod metrics;
pub mod model;
pub mod overlay;
pub mod pan;
pub mod placement;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod sync;

pub use association::{assign_clients, build_dissemination_tree, AssignmentMap, AssociationError};
pub use batch::{run_batch, run_batch_sequential, RunJob};
pub use metrics::{GlobalMetrics, MetricsReport, NodeMetrics};
pub use model::{
    classify, euclidean_distance, DeviceId, DeviceProfile, LinkClass, LinkSpec, ModuleKind,
    NodeId, NodeProfile, PlacementClass, Position,
};
pub use overlay::{
    broadcast_cover, build_mesh, hop_distance, reconfigure, BroadcastTree, MeshEvent, MeshParams,
    OverlayError, OverlayGraph,
};
pub use pan::{aggregate_pan, elect_coordinator, score_link, select_gateway, PanConfig, PanError};
pub use placement::{
    allocate_auction, allocate_heuristic, estimate_replicas, plan_cost, rank_nodes, AuctionParams,
    PlacementError, PlacementPlan, RankWeights, ServiceId, ServiceSpec,
};
pub use rng::SplitMix64;
pub use scenario::{parse_scenario, Scenario, ScenarioError};
pub use sim::{init, run, Architecture, EnergyModel, SimError, SimState};
pub use sync::{
    apply_events, check_consistency, dr_should_send, order_events, state_digest, ActorId,
    ActorState, GameEvent, GameState, SyncError,
};

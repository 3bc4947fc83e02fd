//! Core vocabulary: the game-module catalog, placement classes, device and
//! node profiles, link descriptions, and plane geometry.
//!
//! Identifiers are strings ordered lexicographically by their UTF-8 bytes.
//! Every deterministic tie-break in the crate ("smallest id first") refers to
//! that ordering.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Identifier of a single physical device inside a player's PAN.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(pub String);

/// Identifier of a mesh node (one aggregated PAN or the external server).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<&str> for DeviceId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// The software modules a game session is made of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleKind {
    InputManagement,
    AudioSound,
    SceneGraph,
    PhysicsSystem,
    CollisionDetection,
    GameStateManagement,
    VirtualMapStore,
    ArtificialIntelligence,
    FiniteStateMachine,
    DeadReckoning,
    AccountingScore,
    Networking,
    OverlayManagement,
}

impl ModuleKind {
    /// All thirteen module kinds, in declaration order.
    pub const ALL: [ModuleKind; 13] = [
        ModuleKind::InputManagement,
        ModuleKind::AudioSound,
        ModuleKind::SceneGraph,
        ModuleKind::PhysicsSystem,
        ModuleKind::CollisionDetection,
        ModuleKind::GameStateManagement,
        ModuleKind::VirtualMapStore,
        ModuleKind::ArtificialIntelligence,
        ModuleKind::FiniteStateMachine,
        ModuleKind::DeadReckoning,
        ModuleKind::AccountingScore,
        ModuleKind::Networking,
        ModuleKind::OverlayManagement,
    ];
}

impl fmt::Display for ModuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ModuleKind::InputManagement => "input_management",
            ModuleKind::AudioSound => "audio_sound",
            ModuleKind::SceneGraph => "scene_graph",
            ModuleKind::PhysicsSystem => "physics_system",
            ModuleKind::CollisionDetection => "collision_detection",
            ModuleKind::GameStateManagement => "game_state_management",
            ModuleKind::VirtualMapStore => "virtual_map_store",
            ModuleKind::ArtificialIntelligence => "artificial_intelligence",
            ModuleKind::FiniteStateMachine => "finite_state_machine",
            ModuleKind::DeadReckoning => "dead_reckoning",
            ModuleKind::AccountingScore => "accounting_score",
            ModuleKind::Networking => "networking",
            ModuleKind::OverlayManagement => "overlay_management",
        };
        f.write_str(name)
    }
}

/// Where a module kind is allowed to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementClass {
    /// Must run on every node; never appears in a placement plan.
    MandatoryEverywhere,
    /// Can be delegated to a single node anywhere in the mesh.
    Distributable,
    /// Can be delegated and replicated across several nodes.
    DistributableReplicable,
    /// Lives on the distinguished external server.
    ExternalServer,
    /// Must run on a node flagged as trusted.
    TrustedNode,
}

/// Returns the placement class of a module kind.
///
/// The mapping is total and fixed: input handling, audio, scene graph,
/// dead reckoning, and networking run on every node; physics, collision
/// detection, and game state can be delegated and replicated; AI, finite
/// state machines, and overlay management can be delegated; the virtual map
/// store needs the external server; score accounting needs a trusted node.
pub fn classify(kind: ModuleKind) -> PlacementClass {
    match kind {
        ModuleKind::InputManagement
        | ModuleKind::AudioSound
        | ModuleKind::SceneGraph
        | ModuleKind::DeadReckoning
        | ModuleKind::Networking => PlacementClass::MandatoryEverywhere,
        ModuleKind::PhysicsSystem
        | ModuleKind::CollisionDetection
        | ModuleKind::GameStateManagement => PlacementClass::DistributableReplicable,
        ModuleKind::ArtificialIntelligence
        | ModuleKind::FiniteStateMachine
        | ModuleKind::OverlayManagement => PlacementClass::Distributable,
        ModuleKind::VirtualMapStore => PlacementClass::ExternalServer,
        ModuleKind::AccountingScore => PlacementClass::TrustedNode,
    }
}

/// A point in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Straight-line distance between two positions.
pub fn euclidean_distance(a: Position, b: Position) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}

/// Radio technology class of a network interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkClass {
    /// Local radio (Bluetooth, ad-hoc Wi-Fi); forms the geometric mesh.
    ShortRange,
    /// Wide-area radio (cellular); reaches the external server.
    LongRange,
}

/// One network interface with its cost parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub class: LinkClass,
    /// Transferable units per tick; must be positive.
    pub bandwidth: f64,
    /// Abstract monetary cost per message.
    pub cost_per_message: f64,
    /// Energy units drawn per message.
    pub energy_per_message: u64,
}

/// One physical device contributed to a player's PAN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device_id: DeviceId,
    /// Work units the device can execute per tick.
    pub compute: u64,
    /// Energy units currently stored.
    pub battery: u64,
    pub interfaces: Vec<LinkSpec>,
    /// Identifier of the player owning the device.
    pub owner: String,
}

/// A mesh node: one player's aggregated PAN, or the external server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeProfile {
    pub node_id: NodeId,
    pub position: Position,
    /// Short-range radio reach in meters; must be positive.
    pub radio_range: f64,
    /// Work units per tick (sum over member devices for a PAN).
    pub compute: u64,
    /// Energy units (minimum over member devices for a PAN).
    pub battery: u64,
    /// Union of the member devices' interfaces.
    pub interfaces: Vec<LinkSpec>,
    /// Per-service client limit; `None` means use the derived default.
    pub capacity_cap: Option<u64>,
    /// Whether the node may host trusted-only services.
    pub trusted: bool,
    /// Whether this is the distinguished external server.
    pub external: bool,
}

impl NodeProfile {
    /// Highest bandwidth over the node's interfaces, zero if it has none.
    pub fn best_bandwidth(&self) -> f64 {
        self.interfaces
            .iter()
            .map(|l| l.bandwidth)
            .fold(0.0, f64::max)
    }

    /// Whether any interface is long-range.
    pub fn has_long_range(&self) -> bool {
        self.interfaces
            .iter()
            .any(|l| l.class == LinkClass::LongRange)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_is_total_and_matches_catalog() {
        assert_eq!(ModuleKind::ALL.len(), 13);
        for kind in ModuleKind::ALL {
            let _ = classify(kind);
        }
        assert_eq!(
            classify(ModuleKind::DeadReckoning),
            PlacementClass::MandatoryEverywhere
        );
        assert_eq!(
            classify(ModuleKind::GameStateManagement),
            PlacementClass::DistributableReplicable
        );
        assert_eq!(
            classify(ModuleKind::VirtualMapStore),
            PlacementClass::ExternalServer
        );
        assert_eq!(
            classify(ModuleKind::AccountingScore),
            PlacementClass::TrustedNode
        );
        assert_eq!(
            classify(ModuleKind::Networking),
            PlacementClass::MandatoryEverywhere
        );
    }

    #[test]
    fn exactly_five_modules_are_mandatory() {
        let mandatory = ModuleKind::ALL
            .iter()
            .filter(|k| classify(**k) == PlacementClass::MandatoryEverywhere)
            .count();
        assert_eq!(mandatory, 5);
    }

    #[test]
    fn three_four_five_rule_for_remaining_classes() {
        let count = |class: PlacementClass| {
            ModuleKind::ALL
                .iter()
                .filter(|k| classify(**k) == class)
                .count()
        };
        assert_eq!(count(PlacementClass::DistributableReplicable), 3);
        assert_eq!(count(PlacementClass::Distributable), 3);
        assert_eq!(count(PlacementClass::ExternalServer), 1);
        assert_eq!(count(PlacementClass::TrustedNode), 1);
    }

    #[test]
    fn distance_of_three_four_five_triangle() {
        let d = euclidean_distance(Position::new(0.0, 0.0), Position::new(3.0, 4.0));
        assert_eq!(d, 5.0);
    }

    #[test]
    fn distance_is_symmetric() {
        let a = Position::new(1.5, -2.0);
        let b = Position::new(-7.25, 3.0);
        assert_eq!(euclidean_distance(a, b), euclidean_distance(b, a));
    }

    #[test]
    fn identical_points_have_zero_distance() {
        let a = Position::new(12.0, 9.5);
        assert_eq!(euclidean_distance(a, a), 0.0);
    }

    #[test]
    fn node_ids_order_lexicographically() {
        let mut ids = vec![NodeId::from("n10"), NodeId::from("n2"), NodeId::from("n1")];
        ids.sort();
        assert_eq!(
            ids,
            vec![NodeId::from("n1"), NodeId::from("n10"), NodeId::from("n2")]
        );
    }

    #[test]
    fn best_bandwidth_takes_maximum_over_interfaces() {
        let node = NodeProfile {
            node_id: NodeId::from("a"),
            position: Position::new(0.0, 0.0),
            radio_range: 10.0,
            compute: 1,
            battery: 1,
            interfaces: vec![
                LinkSpec {
                    class: LinkClass::ShortRange,
                    bandwidth: 4.0,
                    cost_per_message: 0.0,
                    energy_per_message: 1,
                },
                LinkSpec {
                    class: LinkClass::LongRange,
                    bandwidth: 9.0,
                    cost_per_message: 2.0,
                    energy_per_message: 3,
                },
            ],
            capacity_cap: None,
            trusted: false,
            external: false,
        };
        assert_eq!(node.best_bandwidth(), 9.0);
        assert!(node.has_long_range());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn triangle_inequality(
                ax in -1e4f64..1e4, ay in -1e4f64..1e4,
                bx in -1e4f64..1e4, by in -1e4f64..1e4,
                cx in -1e4f64..1e4, cy in -1e4f64..1e4,
            ) {
                let a = Position::new(ax, ay);
                let b = Position::new(bx, by);
                let c = Position::new(cx, cy);
                let direct = euclidean_distance(a, c);
                let via = euclidean_distance(a, b) + euclidean_distance(b, c);
                prop_assert!(direct <= via + 1e-9);
            }

            #[test]
            fn distance_is_nonnegative(
                ax in -1e4f64..1e4, ay in -1e4f64..1e4,
                bx in -1e4f64..1e4, by in -1e4f64..1e4,
            ) {
                prop_assert!(euclidean_distance(Position::new(ax, ay), Position::new(bx, by)) >= 0.0);
            }
        }
    }
}

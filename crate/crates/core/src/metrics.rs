//! Run reports: per-node and global metrics with CSV and JSON encodings.
//!
//! Both encodings are byte-deterministic for a fixed report: maps are
//! ordered, floats print with the shortest round-trip representation, and no
//! timestamps appear anywhere. Run metadata identifies a run by seed,
//! architecture, tick count, and the scenario digest instead.
//!
//! The CSV layout is the plotting contract: one fixed 12-column header, one
//! row per node filling the first seven columns, and one final row keyed
//! `GLOBAL` filling the last five.

use serde::{Deserialize, Serialize};

/// Fixed CSV header.
pub const CSV_HEADER: &str = "node_id,sent,received,relayed,work_units,final_battery,\
failure_tick,mean_hops,max_load,total_messages,consistency_rate,dr_suppression";

/// Counters of one node over a whole run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub node_id: String,
    /// Transmissions this node originated.
    pub sent: u64,
    /// Arrivals at this node, relay hops included.
    pub received: u64,
    /// Transmissions this node forwarded for others.
    pub relayed: u64,
    /// Work units executed (mandatory load, replica batches, bot control).
    pub work_units: u64,
    pub final_battery: u64,
    /// Tick at which the battery reached zero, if it did.
    pub failure_tick: Option<u64>,
    pub initial_battery: u64,
    /// Total energy drawn over the run; the ledger guarantees
    /// `final_battery = initial_battery - energy_debited` exactly.
    pub energy_debited: u64,
}

/// Whole-run aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMetrics {
    /// Mean client-to-replica hop distance of the initial association.
    pub mean_hops: f64,
    /// Highest planned per-node service load of the initial placement.
    pub max_load: u64,
    /// All transmissions: originations plus relays.
    pub total_messages: u64,
    /// Share of per-tick replica digest comparisons that agreed; 1.0 when
    /// nothing was there to compare.
    pub consistency_rate: f64,
    /// Share of player update slots suppressed by dead reckoning; 0.0 when
    /// players never emitted.
    pub dr_suppression: f64,
    /// Whether every replica group agreed after the drain phase.
    pub final_consistent: bool,
    /// Mesh rebuilds triggered by movement or node failure.
    pub reconfigurations: u64,
    /// Deliveries that never completed: receiver failed or route vanished.
    pub messages_lost: u64,
    /// Game events emitted by players and bots.
    pub events_emitted: u64,
    /// Player update slots suppressed by dead reckoning.
    pub events_suppressed: u64,
}

/// Identification of the run that produced a report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: u64,
    pub arch: String,
    pub ticks: u64,
    /// FNV-1a digest of the scenario text, as 16 hex digits.
    pub scenario_digest: String,
}

/// The full outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub meta: RunMeta,
    /// Per-node rows in ascending node-id order.
    pub nodes: Vec<NodeMetrics>,
    pub global: GlobalMetrics,
}

impl MetricsReport {
    /// Renders the fixed-layout CSV table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for n in &self.nodes {
            let failure = n.failure_tick.map(|t| t.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},,,,,\n",
                n.node_id, n.sent, n.received, n.relayed, n.work_units, n.final_battery, failure,
            ));
        }
        let g = &self.global;
        out.push_str(&format!(
            "GLOBAL,,,,,,,{},{},{},{},{}\n",
            g.mean_hops, g.max_load, g.total_messages, g.consistency_rate, g.dr_suppression,
        ));
        out
    }

    /// Renders the JSON document (same values as the CSV, plus the ledger
    /// fields and the run metadata).
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }
}

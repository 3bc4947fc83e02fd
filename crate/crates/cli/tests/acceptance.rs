//! Acceptance suite: one test per acceptance criterion, each checked against
//! an independent oracle or a pinned constant. Every test prints a single
//! `acceptance <n> (<name>): PASS|FAIL` line; run with
//! `cargo test -p mogsim-cli --test acceptance -- --nocapture` to see them.

use mogsim_core::scenario::parse_scenario;
use mogsim_core::sync::fnv1a_64;
use mogsim_core::{
    allocate_auction, apply_events, assign_clients, build_mesh, check_consistency, dr_should_send,
    estimate_replicas, hop_distance, order_events, reconfigure, run, state_digest, ActorId,
    ActorState, Architecture, AuctionParams, GameEvent, GameState, LinkClass, LinkSpec, MeshEvent,
    ModuleKind, NodeId, NodeProfile, PlacementClass, PlacementPlan, Position, ServiceId,
    ServiceSpec, SplitMix64,
};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};

fn criterion(n: usize, name: &str, f: impl FnOnce()) {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(()) => println!("acceptance {n} ({name}): PASS"),
        Err(cause) => {
            println!("acceptance {n} ({name}): FAIL");
            resume_unwind(cause);
        }
    }
}

fn profile(id: &str, x: f64, y: f64, range: f64, compute: u64, battery: u64) -> NodeProfile {
    NodeProfile {
        node_id: NodeId::from(id),
        position: Position::new(x, y),
        radio_range: range,
        compute,
        battery,
        interfaces: vec![LinkSpec {
            class: LinkClass::ShortRange,
            bandwidth: 10.0,
            cost_per_message: 0.0,
            energy_per_message: 0,
        }],
        capacity_cap: None,
        trusted: false,
        external: false,
    }
}

/// Criterion 1: on 200 random geometric graphs, `hop_distance` agrees with
/// an all-pairs breadth-first-search oracle computed straight from the
/// positions and ranges.
#[test]
fn acceptance_1() {
    criterion(1, "routing oracle", || {
        let mut rng = SplitMix64::new(0xAC01);
        for _ in 0..200 {
            let n = 2 + rng.next_below(49) as usize;
            let profiles: Vec<NodeProfile> = (0..n)
                .map(|i| {
                    profile(
                        &format!("n{i:02}"),
                        rng.next_f64() * 100.0,
                        rng.next_f64() * 100.0,
                        8.0 + rng.next_f64() * 27.0,
                        10,
                        100,
                    )
                })
                .collect();
            let g = build_mesh(&profiles).unwrap();

            let mut adj = vec![Vec::new(); n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let dx = profiles[i].position.x - profiles[j].position.x;
                    let dy = profiles[i].position.y - profiles[j].position.y;
                    let d = (dx * dx + dy * dy).sqrt();
                    if d <= profiles[i].radio_range.min(profiles[j].radio_range) {
                        adj[i].push(j);
                        adj[j].push(i);
                    }
                }
            }
            for s in 0..n {
                let mut dist: Vec<Option<u64>> = vec![None; n];
                dist[s] = Some(0);
                let mut queue = VecDeque::from([s]);
                while let Some(u) = queue.pop_front() {
                    for &v in &adj[u] {
                        if dist[v].is_none() {
                            dist[v] = Some(dist[u].unwrap() + 1);
                            queue.push_back(v);
                        }
                    }
                }
                for t in 0..n {
                    let got =
                        hop_distance(&g, &profiles[s].node_id, &profiles[t].node_id).unwrap();
                    assert_eq!(got, dist[t], "pair {s}->{t}");
                }
            }
        }
    });
}

/// Criterion 2: iterating `reconfigure` over 100 random join/leave/move
/// sequences ends in exactly the graph `build_mesh` produces from the final
/// profile set.
#[test]
fn acceptance_2() {
    criterion(2, "reconfigure equals rebuild", || {
        let mut rng = SplitMix64::new(0xAC02);
        for _ in 0..100 {
            let n = 3 + rng.next_below(6) as usize;
            let draw = |rng: &mut SplitMix64| (rng.next_f64() * 60.0, rng.next_f64() * 60.0);
            let mut shadow: Vec<NodeProfile> = (0..n)
                .map(|i| {
                    let (x, y) = draw(&mut rng);
                    profile(
                        &format!("n{i:02}"),
                        x,
                        y,
                        10.0 + rng.next_f64() * 20.0,
                        10,
                        100,
                    )
                })
                .collect();
            let mut g = build_mesh(&shadow).unwrap();
            let mut fresh = 0;
            for _ in 0..rng.next_below(31) {
                let kind = rng.next_below(3);
                let event = if kind == 0 {
                    let (x, y) = draw(&mut rng);
                    let p = profile(&format!("j{fresh:02}"), x, y, 10.0 + rng.next_f64() * 20.0, 10, 100);
                    fresh += 1;
                    shadow.push(p.clone());
                    MeshEvent::Join(p)
                } else if kind == 1 && shadow.len() > 1 {
                    let idx = rng.next_below(shadow.len() as u64) as usize;
                    MeshEvent::Leave(shadow.remove(idx).node_id)
                } else {
                    let idx = rng.next_below(shadow.len() as u64) as usize;
                    let (x, y) = draw(&mut rng);
                    let pos = Position::new(x, y);
                    shadow[idx].position = pos;
                    MeshEvent::Move(shadow[idx].node_id.clone(), pos)
                };
                g = reconfigure(&g, event).unwrap();
            }
            assert_eq!(g, build_mesh(&shadow).unwrap());
        }
    });
}

/// Criterion 3: on 100 random instances, every client's assignment matches a
/// replayed greedy oracle: the minimum-hop replica with residual capacity at
/// the client's turn, ties to the smaller replica id.
#[test]
fn acceptance_3() {
    criterion(3, "greedy association replay", || {
        let mut rng = SplitMix64::new(0xAC03);
        let service = ServiceId::from("world");
        for _ in 0..100 {
            let n = 4 + rng.next_below(9) as usize;
            let profiles: Vec<NodeProfile> = (0..n)
                .map(|i| {
                    profile(
                        &format!("n{i:02}"),
                        i as f64 * 7.0 + rng.next_f64() * 3.0,
                        rng.next_f64() * 2.0,
                        25.0,
                        20,
                        100,
                    )
                })
                .collect();
            let g = build_mesh(&profiles).unwrap();

            let replica_count = 1 + rng.next_below(3) as usize;
            let mut hosts = BTreeSet::new();
            while hosts.len() < replica_count {
                let idx = rng.next_below(n as u64) as usize;
                hosts.insert(profiles[idx].node_id.clone());
            }
            let mut plan = PlacementPlan::new();
            plan.insert(
                ServiceSpec {
                    id: service.clone(),
                    kind: ModuleKind::GameStateManagement,
                    workload_per_client: 1,
                    state_bearing: true,
                },
                hosts.clone(),
            );
            let client_count = (n - hosts.len()) as u64;
            let mut caps: BTreeMap<NodeId, u64> = hosts
                .iter()
                .map(|h| (h.clone(), 1 + rng.next_below(4)))
                .collect();
            let total: u64 = caps.values().sum();
            if total < client_count {
                let first = hosts.iter().next().unwrap().clone();
                *caps.get_mut(&first).unwrap() += client_count - total;
            }

            let map = assign_clients(&plan, &g, &caps).unwrap();

            let mut residual = caps.clone();
            let clients: Vec<NodeId> = profiles
                .iter()
                .map(|p| p.node_id.clone())
                .filter(|id| !hosts.contains(id))
                .collect();
            for client in clients {
                let mut best: Option<(u64, NodeId)> = None;
                for host in &hosts {
                    if residual[host] == 0 {
                        continue;
                    }
                    let d = hop_distance(&g, &client, host).unwrap().expect("connected");
                    let better = match &best {
                        None => true,
                        Some((bd, bh)) => d < *bd || (d == *bd && host < bh),
                    };
                    if better {
                        best = Some((d, host.clone()));
                    }
                }
                let (oracle_hop, oracle_host) = best.expect("capacity suffices");
                let assigned = map.replica_of(&service, &client).unwrap();
                assert_eq!(assigned, &oracle_host);
                let hop = hop_distance(&g, &client, assigned).unwrap().unwrap();
                assert_eq!(hop, oracle_hop);
                *residual.get_mut(&oracle_host).unwrap() -= 1;
            }
        }
    });
}

/// Criterion 4: on 100 ample-supply instances (≤ 5 services, 6 nodes), the
/// auction's matched-slot count equals an exhaustive maximum-cardinality
/// bipartite matching computed independently.
#[test]
fn acceptance_4() {
    criterion(4, "auction matches exact matching", || {
        let mut rng = SplitMix64::new(0xAC04);
        let mut done = 0;
        let mut attempts = 0;
        while done < 100 {
            attempts += 1;
            assert!(attempts < 10_000, "generator family starved");

            let profiles: Vec<NodeProfile> = (0..6)
                .map(|i| {
                    let mut p = profile(
                        &format!("n{i}"),
                        i as f64 * 8.0,
                        0.0,
                        20.0,
                        15 + rng.next_below(31),
                        20 + rng.next_below(41),
                    );
                    p.trusted = i == 0;
                    p
                })
                .collect();
            let g = build_mesh(&profiles).unwrap();

            let service_count = 1 + rng.next_below(5) as usize;
            let mut services = Vec::new();
            let mut clients = BTreeMap::new();
            let mut used_trusted = false;
            for s in 0..service_count {
                let kind = match rng.next_below(7) {
                    0 => ModuleKind::GameStateManagement,
                    1 => ModuleKind::PhysicsSystem,
                    2 => ModuleKind::CollisionDetection,
                    3 => ModuleKind::ArtificialIntelligence,
                    4 => ModuleKind::FiniteStateMachine,
                    5 => ModuleKind::OverlayManagement,
                    _ if !used_trusted => {
                        used_trusted = true;
                        ModuleKind::AccountingScore
                    }
                    _ => ModuleKind::FiniteStateMachine,
                };
                let spec = ServiceSpec {
                    id: ServiceId::from(format!("s{s}").as_str()),
                    kind,
                    workload_per_client: 1 + rng.next_below(2),
                    state_bearing: kind == ModuleKind::GameStateManagement,
                };
                // Replicable services get larger populations so replica
                // counts above one actually occur.
                let count = match spec.class() {
                    PlacementClass::DistributableReplicable => 8 + rng.next_below(13),
                    PlacementClass::TrustedNode => 2 + rng.next_below(3),
                    _ => 2 + rng.next_below(5),
                };
                clients.insert(spec.id.clone(), count);
                services.push(spec);
            }

            // Reconstruct the bipartite instance from the documented rules:
            // demand k per service, per-replica load = ceil(clients*w/k),
            // slot size = the largest per-replica load, node slots =
            // floor(compute / slot size).
            let mut demands: Vec<(Vec<usize>, u64)> = Vec::new();
            let mut loads = Vec::new();
            let mut eligibility: Vec<Vec<usize>> = Vec::new();
            for spec in &services {
                let trusted_only = spec.class() == PlacementClass::TrustedNode;
                let eligible: Vec<usize> = (0..6)
                    .filter(|&i| !trusted_only || profiles[i].trusted)
                    .collect();
                let mean = (eligible.iter().map(|&i| profiles[i].compute).sum::<u64>()
                    / eligible.len() as u64)
                    .max(1);
                let k = estimate_replicas(spec, clients[&spec.id], mean);
                let total = clients[&spec.id] * spec.workload_per_client;
                loads.push(total.div_ceil(k));
                eligibility.push(eligible);
            }
            let slot_size = loads.iter().copied().max().unwrap().max(1);
            let slots: Vec<u64> = profiles.iter().map(|p| p.compute / slot_size).collect();
            let mut feasible = true;
            for (spec, eligible) in services.iter().zip(&eligibility) {
                let candidates: Vec<usize> = eligible
                    .iter()
                    .copied()
                    .filter(|&i| slots[i] >= 1)
                    .collect();
                if candidates.is_empty() {
                    feasible = false;
                    break;
                }
                let mean = (eligible.iter().map(|&i| profiles[i].compute).sum::<u64>()
                    / eligible.len() as u64)
                    .max(1);
                let k = estimate_replicas(spec, clients[&spec.id], mean);
                demands.push((candidates.clone(), k.min(candidates.len() as u64)));
            }
            let demand_total: u64 = demands.iter().map(|(_, d)| *d).sum();
            let supply: u64 = slots.iter().sum();
            if !feasible || demand_total > supply {
                demands.clear();
                continue;
            }
            done += 1;

            let plan =
                allocate_auction(&services, &g, &clients, AuctionParams::default(), false)
                    .unwrap();
            let matched: u64 = services
                .iter()
                .map(|s| plan.hosts(&s.id).unwrap().len() as u64)
                .sum();

            assert_eq!(matched, max_matching(&demands, &slots));
        }
    });
}

/// Maximum-cardinality matching of per-service demand units to node slots
/// (Kuhn's augmenting paths over slot units).
fn max_matching(demands: &[(Vec<usize>, u64)], slots: &[u64]) -> u64 {
    // Expand nodes into individual slot units.
    let mut unit_node = Vec::new();
    for (node, &count) in slots.iter().enumerate() {
        for _ in 0..count {
            unit_node.push(node);
        }
    }
    // Expand services into demand units, remembering which service each
    // belongs to so one service never takes two slots on the same node.
    let mut unit_service = Vec::new();
    for (service, (_, demand)) in demands.iter().enumerate() {
        for _ in 0..*demand {
            unit_service.push(service);
        }
    }
    let mut slot_owner: Vec<Option<usize>> = vec![None; unit_node.len()];
    let mut service_nodes: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); demands.len()];

    fn augment(
        unit: usize,
        demands: &[(Vec<usize>, u64)],
        unit_service: &[usize],
        unit_node: &[usize],
        slot_owner: &mut Vec<Option<usize>>,
        service_nodes: &mut Vec<BTreeSet<usize>>,
        visited: &mut Vec<bool>,
    ) -> bool {
        let service = unit_service[unit];
        for slot in 0..unit_node.len() {
            let node = unit_node[slot];
            if visited[slot]
                || !demands[service].0.contains(&node)
                || service_nodes[service].contains(&node)
            {
                continue;
            }
            visited[slot] = true;
            let vacant = match slot_owner[slot] {
                None => true,
                Some(owner) => {
                    service_nodes[unit_service[owner]].remove(&node);
                    let moved = augment(
                        owner,
                        demands,
                        unit_service,
                        unit_node,
                        slot_owner,
                        service_nodes,
                        visited,
                    );
                    if !moved {
                        service_nodes[unit_service[owner]].insert(node);
                    }
                    moved
                }
            };
            if vacant {
                slot_owner[slot] = Some(unit);
                service_nodes[service].insert(node);
                return true;
            }
        }
        false
    }

    let mut matched = 0;
    for unit in 0..unit_service.len() {
        let mut visited = vec![false; unit_node.len()];
        if augment(
            unit,
            demands,
            &unit_service,
            &unit_node,
            &mut slot_owner,
            &mut service_nodes,
            &mut visited,
        ) {
            matched += 1;
        }
    }
    matched
}

/// Criterion 5: 1000 trials of a 200-event log applied by three replicas in
/// independent random orders and batch partitions always converge.
#[test]
fn acceptance_5() {
    criterion(5, "replica convergence", || {
        let mut rng = SplitMix64::new(0xAC05);
        let actors: Vec<ActorId> = ["a", "b", "c", "d"].iter().map(|s| ActorId::from(*s)).collect();
        let sources: Vec<NodeId> = ["s0", "s1", "s2", "s3"].iter().map(|s| NodeId::from(*s)).collect();
        for _ in 0..1000 {
            let mut seqs = [0u64; 4];
            let log: Vec<GameEvent> = (0..200)
                .map(|_| {
                    let s = rng.next_below(4) as usize;
                    let seq = seqs[s];
                    seqs[s] += 1;
                    GameEvent {
                        source: sources[s].clone(),
                        seq,
                        tick: rng.next_below(50),
                        actor: actors[rng.next_below(4) as usize].clone(),
                        payload: rng.next_i64(),
                    }
                })
                .collect();

            let mut digests = Vec::new();
            for _ in 0..3 {
                let mut order: Vec<usize> = (0..log.len()).collect();
                for i in (1..order.len()).rev() {
                    let j = rng.next_below(i as u64 + 1) as usize;
                    order.swap(i, j);
                }
                let mut state = GameState::with_actors(actors.iter().cloned());
                let mut at = 0;
                while at < order.len() {
                    let size = 1 + rng.next_below(7) as usize;
                    let batch: Vec<GameEvent> = order[at..(at + size).min(order.len())]
                        .iter()
                        .map(|&i| log[i].clone())
                        .collect();
                    at += size;
                    let ordered = order_events(&batch).unwrap();
                    state = apply_events(&state, &ordered).unwrap();
                }
                digests.push(state_digest(&state));
            }
            assert!(check_consistency(&digests).unwrap());
        }
    });
}

const DETERMINISM_SCENARIO: &str = r#"{
    "arena": {"width": 70, "height": 70},
    "players": [
        {"id": "p1", "position": {"x": 0, "y": 0}, "radio_range": 30, "speed": 1.5,
         "devices": [{"id": "d", "compute": 8, "battery": 5000,
                      "interfaces": [{"class": "short_range", "bandwidth": 10}]}]},
        {"id": "p2", "position": {"x": 15, "y": 5}, "radio_range": 30, "speed": 1.0,
         "devices": [{"id": "d", "compute": 8, "battery": 5000,
                      "interfaces": [{"class": "short_range", "bandwidth": 10}]}]},
        {"id": "p3", "position": {"x": 5, "y": 15}, "radio_range": 30,
         "devices": [{"id": "d", "compute": 8, "battery": 5000,
                      "interfaces": [{"class": "short_range", "bandwidth": 10}]}]},
        {"id": "p4", "position": {"x": 20, "y": 18}, "radio_range": 30, "speed": 0.5,
         "devices": [{"id": "d", "compute": 8, "battery": 5000,
                      "interfaces": [{"class": "short_range", "bandwidth": 10}]}]}
    ],
    "server": {"id": "srv", "position": {"x": 10, "y": 10}, "radio_range": 35,
               "compute": 50, "battery": 1000000},
    "services": [
        {"id": "world", "kind": "game_state_management", "workload_per_client": 2},
        {"id": "physics", "kind": "physics_system"}
    ],
    "bots": [{"id": "orc", "event_rate": 0.7}]
}"#;

/// Criterion 6: identical (scenario, architecture, seed, ticks) inputs give
/// bit-identical reports from `run` and bit-identical CLI output files.
#[test]
fn acceptance_6() {
    criterion(6, "determinism", || {
        let scenario = parse_scenario(DETERMINISM_SCENARIO).unwrap();
        for arch in [Architecture::ClientServerOverlay, Architecture::HybridDistributed] {
            let a = run(&scenario, arch, 5, 120).unwrap();
            let b = run(&scenario, arch, 5, 120).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.to_json(), b.to_json());
            assert_eq!(a.to_csv(), b.to_csv());
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenario.json");
        std::fs::write(&path, DETERMINISM_SCENARIO).unwrap();
        let mut files = Vec::new();
        for name in ["first", "second"] {
            let out = dir.path().join(name);
            let status = std::process::Command::new(env!("CARGO_BIN_EXE_mogsim"))
                .args([
                    "--scenario",
                    path.to_str().unwrap(),
                    "--arch",
                    "hybrid",
                    "--seed",
                    "5",
                    "--ticks",
                    "120",
                    "--out",
                    out.to_str().unwrap(),
                ])
                .status()
                .unwrap();
            assert!(status.success());
            files.push((
                std::fs::read(out.join("metrics.csv")).unwrap(),
                std::fs::read(out.join("metrics.json")).unwrap(),
            ));
        }
        assert_eq!(files[0], files[1]);
    });
}

/// Criterion 7: across 50 random runs, every node's final battery equals its
/// initial battery minus the summed debits, and a node has failed exactly
/// when that ledger reaches zero.
#[test]
fn acceptance_7() {
    criterion(7, "energy ledger", || {
        let mut rng = SplitMix64::new(0xAC07);
        let mut failures = 0;
        for seed in 0..50u64 {
            let n = 3 + rng.next_below(4);
            let players: Vec<String> = (0..n)
                .map(|i| {
                    format!(
                        r#"{{"id": "p{i}", "position": {{"x": {x:.3}, "y": {y:.3}}},
                            "radio_range": 30, "speed": {speed:.3}, "event_rate": 1.0,
                            "devices": [{{"id": "d", "compute": {compute}, "battery": {battery},
                            "interfaces": [{{"class": "short_range", "bandwidth": 10}}]}}]}}"#,
                        x = rng.next_f64() * 35.0,
                        y = rng.next_f64() * 35.0,
                        speed = rng.next_f64() * 1.5,
                        compute = 5 + rng.next_below(10),
                        battery = 40 + rng.next_below(200),
                    )
                })
                .collect();
            let text = format!(
                r#"{{
                "arena": {{"width": 40, "height": 40}},
                "players": [{players}],
                "services": [{{"id": "world", "kind": "game_state_management"}}],
                "bots": [{{"id": "orc", "event_rate": 1.0}}],
                "energy": {{"e_send": 2, "e_receive": 1, "e_relay": 1, "e_compute": 1}},
                "dr_threshold": 0.5
            }}"#,
                players = players.join(",")
            );
            let scenario = parse_scenario(&text).unwrap();
            let report = run(&scenario, Architecture::PureP2P, seed, 40).unwrap();
            for node in &report.nodes {
                assert_eq!(
                    node.final_battery,
                    node.initial_battery - node.energy_debited,
                    "ledger of {} at seed {seed}",
                    node.node_id
                );
                assert_eq!(
                    node.failure_tick.is_some(),
                    node.final_battery == 0,
                    "failure flag of {} at seed {seed}",
                    node.node_id
                );
                if node.failure_tick.is_some() {
                    failures += 1;
                }
            }
        }
        assert!(failures > 0, "family never exercised a battery failure");
    });
}

/// Criterion 8: on 100 seeded 12-player scenarios with two replicable
/// services and capacity caps, the hybrid architecture's peak per-node load
/// never exceeds the client-server overlay's.
#[test]
fn acceptance_8() {
    criterion(8, "load splitting", || {
        for seed in 0..100u64 {
            let mut rng = SplitMix64::new(0xAC08 ^ seed);
            let players: Vec<String> = (0..12)
                .map(|i| {
                    let gx = (i % 4) as f64 * 10.0;
                    let gy = (i / 4) as f64 * 10.0;
                    format!(
                        r#"{{"id": "p{i:02}", "position": {{"x": {x:.3}, "y": {y:.3}}},
                            "radio_range": 15, "event_rate": 1.0, "capacity_cap": 8,
                            "devices": [{{"id": "d", "compute": {compute}, "battery": 1000000,
                            "interfaces": [{{"class": "short_range", "bandwidth": 10}}]}}]}}"#,
                        x = gx + rng.next_f64() * 3.0 - 1.5,
                        y = gy + rng.next_f64() * 3.0 - 1.5,
                        compute = 10 + rng.next_below(5),
                    )
                })
                .collect();
            let text = format!(
                r#"{{
                "arena": {{"width": 40, "height": 30}},
                "players": [{players}],
                "server": {{"id": "srv", "position": {{"x": 15, "y": 10}}, "radio_range": 15,
                            "compute": 12, "battery": 10000000, "capacity_cap": 8}},
                "services": [
                    {{"id": "world", "kind": "game_state_management", "workload_per_client": 2}},
                    {{"id": "physics", "kind": "physics_system"}}
                ],
                "core_affinity": false,
                "allocator": "{allocator}"
            }}"#,
                players = players.join(","),
                allocator = if seed % 2 == 0 { "heuristic" } else { "auction" },
            );
            let scenario = parse_scenario(&text).unwrap();
            let cs = run(&scenario, Architecture::ClientServerOverlay, seed, 5).unwrap();
            let hybrid = run(&scenario, Architecture::HybridDistributed, seed, 5).unwrap();
            assert!(
                hybrid.global.max_load <= cs.global.max_load,
                "seed {seed}: hybrid {} > client-server {}",
                hybrid.global.max_load,
                cs.global.max_load
            );
        }
    });
}

/// Criterion 9: for 20 random piecewise-linear trajectories, the number of
/// updates dead reckoning lets through is non-increasing in the threshold,
/// and an infinite threshold sends exactly the initial update.
#[test]
fn acceptance_9() {
    criterion(9, "dead-reckoning monotonicity", || {
        let mut rng = SplitMix64::new(0xAC09);
        for _ in 0..20 {
            let mut pos = Position::new(rng.next_f64() * 50.0, rng.next_f64() * 50.0);
            let mut vel = (0.0, 0.0);
            let mut samples: Vec<(u64, Position, (f64, f64))> = Vec::new();
            for t in 0..=60u64 {
                if t % 8 == 0 {
                    vel = (rng.next_f64() * 4.0 - 2.0, rng.next_f64() * 4.0 - 2.0);
                }
                samples.push((t, pos, vel));
                pos = Position::new(pos.x + vel.0, pos.y + vel.1);
            }

            let thresholds = [0.0, 1.0, 2.0, 4.0, 8.0, f64::INFINITY];
            let mut counts = Vec::new();
            for threshold in thresholds {
                let mut sent = 0u64;
                let mut last: Option<(Position, (f64, f64), u64)> = None;
                for (t, p, v) in &samples {
                    let send = match &last {
                        None => true,
                        Some((lp, lv, lt)) => dr_should_send(*p, *lp, *lv, t - lt, threshold),
                    };
                    if send {
                        sent += 1;
                        last = Some((*p, *v, *t));
                    }
                }
                counts.push(sent);
            }
            for pair in counts.windows(2) {
                assert!(pair[1] <= pair[0], "counts not monotone: {counts:?}");
            }
            assert_eq!(*counts.last().unwrap(), 1);
        }
    });
}

/// Criterion 10: the state digests of the empty state and three fixture
/// states match their pinned constants, and the hash primitive matches its
/// published test vectors.
#[test]
fn acceptance_10() {
    criterion(10, "digest stability", || {
        assert_eq!(fnv1a_64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a_64(b"abc"), 0xe71fa2190541574b);

        assert_eq!(state_digest(&GameState::default()), 0x88201fb960ff6465);

        let mut one = GameState::with_actors([ActorId::from("a")]);
        *one.actors.get_mut(&ActorId::from("a")).unwrap() = ActorState {
            x: 1,
            y: 2,
            vx: 3,
            vy: 4,
            score: 5,
        };
        one.event_count = 1;
        assert_eq!(state_digest(&one), 0xf34a77d5635e924c);

        let mut two = one.clone();
        two.actors.insert(
            ActorId::from("b"),
            ActorState {
                x: -1,
                y: -2,
                vx: -3,
                vy: -4,
                score: -5,
            },
        );
        two.event_count = 7;
        assert_eq!(state_digest(&two), 0x797e3cc71d9e9e1e);

        let mut three = GameState::with_actors([ActorId::from("player-1")]);
        *three.actors.get_mut(&ActorId::from("player-1")).unwrap() = ActorState {
            x: -10,
            y: 22,
            vx: 0,
            vy: -3,
            score: 100,
        };
        three.event_count = 42;
        assert_eq!(state_digest(&three), 0x1d0a0ef95592e72c);
    });
}

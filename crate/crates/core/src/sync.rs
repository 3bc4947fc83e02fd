//! Replica synchronization: event ordering, state transitions, digests, and
//! dead reckoning.
//!
//! Replicas converge because everything here is a pure function of the event
//! set: events carry a total order, the transition per event is fixed and
//! commutative per actor field, and states hash to a digest over a canonical
//! byte serialization. No sequencer is needed.
//!
//! The digest recurrence and the serialization layout are normative; they
//! must produce identical values in any implementation:
//! - FNV-1a over the canonical bytes, 64-bit: offset basis
//!   `14695981039346656037`, prime `1099511628211`, all arithmetic mod 2^64.
//! - Canonical bytes: actor count (u64 LE); then per actor in ascending id
//!   order its id length (u64 LE), id bytes, and x, y, vx, vy, score
//!   (each i64 LE); then the applied-event count (u64 LE).

use crate::model::{NodeId, Position};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SyncError {
    #[error("duplicate event ({emitter}, {seq})")]
    DuplicateEvent { emitter: NodeId, seq: u64 },
    #[error("event references unknown actor {0}")]
    UnknownActor(ActorId),
    #[error("cannot check consistency of an empty digest list")]
    NoDigests,
}

/// Identifier of a game actor (a player avatar or a bot).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActorId(pub String);

impl fmt::Display for ActorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<&str> for ActorId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// One game event emitted by a node on behalf of an actor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameEvent {
    /// Emitting node.
    pub source: NodeId,
    /// Per-source sequence number; (source, seq) is unique.
    pub seq: u64,
    /// Tick at which the event was emitted.
    pub tick: u64,
    /// Actor the event acts upon.
    pub actor: ActorId,
    /// Encoded action; see [`decode_action`].
    pub payload: i64,
}

/// Kinematic record and score of one actor.
///
/// Game-world coordinates are integers so that replicas agree bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ActorState {
    pub x: i64,
    pub y: i64,
    pub vx: i64,
    pub vy: i64,
    pub score: i64,
}

/// Replicated game state: per-actor records plus the applied-event count.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GameState {
    pub actors: BTreeMap<ActorId, ActorState>,
    pub event_count: u64,
}

impl GameState {
    /// Initial state: the given actors, all fields zero.
    pub fn with_actors<I: IntoIterator<Item = ActorId>>(ids: I) -> Self {
        Self {
            actors: ids.into_iter().map(|id| (id, ActorState::default())).collect(),
            event_count: 0,
        }
    }
}

/// The action encoded in an event payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Move { dx: i64, dy: i64 },
    Accelerate { dvx: i64, dvy: i64 },
    Score { delta: i64 },
    Noop,
}

/// Decodes a payload into its action. The codec is fixed:
/// `payload mod 4` selects the action (0 move, 1 accelerate, 2 score,
/// 3 no-op) and `q = payload div 4` carries the deltas, with
/// `dx = q mod 21 - 10`, `dy = (q div 21) mod 21 - 10` for the kinematic
/// actions and `delta = q mod 201 - 100` for score. `mod`/`div` are the
/// euclidean forms, so every i64 decodes.
pub fn decode_action(payload: i64) -> Action {
    let q = payload.div_euclid(4);
    match payload.rem_euclid(4) {
        0 => Action::Move {
            dx: q.rem_euclid(21) - 10,
            dy: q.div_euclid(21).rem_euclid(21) - 10,
        },
        1 => Action::Accelerate {
            dvx: q.rem_euclid(21) - 10,
            dvy: q.div_euclid(21).rem_euclid(21) - 10,
        },
        2 => Action::Score {
            delta: q.rem_euclid(201) - 100,
        },
        _ => Action::Noop,
    }
}

/// Sorts events into the replica-wide total order (tick, source, seq).
///
/// Fails if two events share a (source, seq) pair.
pub fn order_events(events: &[GameEvent]) -> Result<Vec<GameEvent>, SyncError> {
    let mut seen: BTreeSet<(&NodeId, u64)> = BTreeSet::new();
    for e in events {
        if !seen.insert((&e.source, e.seq)) {
            return Err(SyncError::DuplicateEvent {
                emitter: e.source.clone(),
                seq: e.seq,
            });
        }
    }
    let mut ordered = events.to_vec();
    ordered.sort_by(|a, b| {
        (a.tick, &a.source, a.seq).cmp(&(b.tick, &b.source, b.seq))
    });
    Ok(ordered)
}

/// Folds ordered events into a state, returning the new state.
///
/// Each event applies its decoded action to its actor with wrapping integer
/// arithmetic and bumps the event count. Fails on an unknown actor.
pub fn apply_events(state: &GameState, events: &[GameEvent]) -> Result<GameState, SyncError> {
    let mut next = state.clone();
    for event in events {
        let actor = next
            .actors
            .get_mut(&event.actor)
            .ok_or_else(|| SyncError::UnknownActor(event.actor.clone()))?;
        match decode_action(event.payload) {
            Action::Move { dx, dy } => {
                actor.x = actor.x.wrapping_add(dx);
                actor.y = actor.y.wrapping_add(dy);
            }
            Action::Accelerate { dvx, dvy } => {
                actor.vx = actor.vx.wrapping_add(dvx);
                actor.vy = actor.vy.wrapping_add(dvy);
            }
            Action::Score { delta } => {
                actor.score = actor.score.wrapping_add(delta);
            }
            Action::Noop => {}
        }
        next.event_count += 1;
    }
    Ok(next)
}

/// 64-bit FNV-1a hash.
pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 14_695_981_039_346_656_037;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(1_099_511_628_211);
    }
    hash
}

/// Digest of a game state over its canonical serialization.
pub fn state_digest(state: &GameState) -> u64 {
    let mut bytes: Vec<u8> =
        Vec::with_capacity(16 + state.actors.len() * 56);
    bytes.extend_from_slice(&(state.actors.len() as u64).to_le_bytes());
    for (id, actor) in &state.actors {
        let raw = id.0.as_bytes();
        bytes.extend_from_slice(&(raw.len() as u64).to_le_bytes());
        bytes.extend_from_slice(raw);
        for field in [actor.x, actor.y, actor.vx, actor.vy, actor.score] {
            bytes.extend_from_slice(&field.to_le_bytes());
        }
    }
    bytes.extend_from_slice(&state.event_count.to_le_bytes());
    fnv1a_64(&bytes)
}

/// Whether all replica digests agree. Fails on an empty list.
pub fn check_consistency(digests: &[u64]) -> Result<bool, SyncError> {
    match digests.split_first() {
        None => Err(SyncError::NoDigests),
        Some((first, rest)) => Ok(rest.iter().all(|d| d == first)),
    }
}

/// Dead-reckoning send decision.
///
/// The receiver extrapolates `last_sent + last_sent_velocity * elapsed`; a
/// new update is due only when the actual position has drifted from that
/// prediction by strictly more than `threshold`.
pub fn dr_should_send(
    actual: Position,
    last_sent: Position,
    last_sent_velocity: (f64, f64),
    elapsed: u64,
    threshold: f64,
) -> bool {
    let t = elapsed as f64;
    let predicted = Position::new(
        last_sent.x + last_sent_velocity.0 * t,
        last_sent.y + last_sent_velocity.1 * t,
    );
    crate::model::euclidean_distance(actual, predicted) > threshold
}

//! Event extraction, causal graphs and intentions.

use std::collections::{BTreeMap, BTreeSet};

use causim_physics::{Aabb, SceneSpec, SimulationTrace, StaticKind};
use serde::{Deserialize, Serialize};

/// Speed above which an object counts as moving, m/s.
pub const MOTION_EPSILON: f64 = 1e-3;

/// Relative normal approach speed separating a collision from a touch, m/s.
pub const COLLISION_SPEED: f64 = 0.5;

/// Declaration order is the tie-break rank within one tick.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Start,
    TouchStart,
    Collision,
    EnterBasket,
    TouchEnd,
    End,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind::Start,
        EventKind::TouchStart,
        EventKind::Collision,
        EventKind::EnterBasket,
        EventKind::TouchEnd,
        EventKind::End,
    ];
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub id: u32,
    pub kind: EventKind,
    pub tick: usize,
    /// Empty for Start/End, one object for EnterBasket, an ordered pair for contacts.
    pub participants: Vec<u32>,
}

impl Event {
    pub fn involves(&self, object: u32) -> bool {
        self.participants.contains(&object)
    }

    /// Sort key: tick, then kind rank, then participants.
    pub fn order_key(&self) -> (usize, EventKind, &[u32]) {
        (self.tick, self.kind, &self.participants)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalGraph {
    pub events: Vec<Event>,
    /// `(cause_event_id, effect_event_id)`, sorted.
    pub edges: Vec<(u32, u32)>,
}

/// Basket interiors of a scene.
fn basket_regions(scene: &SceneSpec) -> Vec<Aabb> {
    scene.statics.iter().filter(|s| s.kind == StaticKind::Basket).filter_map(|s| s.region).collect()
}

/// Scans a trace for the six event types, returned in canonical order with
/// ids equal to their index.
pub fn extract_events(scene: &SceneSpec, trace: &SimulationTrace) -> Vec<Event> {
    let ticks = trace.tick_count();
    let mut events = Vec::new();
    let mut push = |kind, tick, participants| events.push(Event { id: 0, kind, tick, participants });
    push(EventKind::Start, 0, vec![]);

    let mut previous: BTreeSet<(u32, u32)> = BTreeSet::new();
    for (tick, records) in trace.contacts.iter().enumerate() {
        let mut current = BTreeSet::new();
        for r in records {
            let pair = (r.a.min(r.b), r.a.max(r.b));
            current.insert(pair);
            if !previous.contains(&pair) {
                push(EventKind::TouchStart, tick, vec![pair.0, pair.1]);
                if r.approach_speed > COLLISION_SPEED {
                    push(EventKind::Collision, tick, vec![pair.0, pair.1]);
                }
            }
        }
        for pair in previous.difference(&current) {
            push(EventKind::TouchEnd, tick, vec![pair.0, pair.1]);
        }
        previous = current;
    }

    let regions = basket_regions(scene);
    if !regions.is_empty() && ticks > 0 {
        let inside = |tick: usize, idx: usize| regions.iter().any(|r| r.contains(trace.states[tick][idx].position));
        for (idx, state) in trace.states[0].iter().enumerate() {
            let mut was_inside = inside(0, idx);
            for tick in 1..ticks {
                let now = inside(tick, idx);
                if now && !was_inside {
                    push(EventKind::EnterBasket, tick, vec![state.id]);
                    break;
                }
                was_inside = now;
            }
        }
    }

    push(EventKind::End, ticks.saturating_sub(1), vec![]);
    canonicalize(&mut events);
    events
}

/// Sorts events into canonical order and renumbers ids.
pub fn canonicalize(events: &mut [Event]) {
    events.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
    for (i, e) in events.iter_mut().enumerate() {
        e.id = i as u32;
    }
}

/// Links each event to the latest earlier event of each dynamic participant
/// (or Start), and each object's last event to End. Static elements are
/// shared by everything and never link events.
pub fn build_causal_graph(events: &[Event], dynamic_ids: &BTreeSet<u32>) -> CausalGraph {
    let mut ordered: Vec<&Event> = events.iter().collect();
    ordered.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
    let start = ordered.iter().find(|e| e.kind == EventKind::Start).map(|e| e.id);
    let end = ordered.iter().find(|e| e.kind == EventKind::End).map(|e| e.id);

    let mut edges = BTreeSet::new();
    let mut last: BTreeMap<u32, u32> = BTreeMap::new();
    for e in &ordered {
        if matches!(e.kind, EventKind::Start | EventKind::End) {
            continue;
        }
        for o in e.participants.iter().filter(|o| dynamic_ids.contains(o)) {
            if let Some(src) = last.get(o).copied().or(start) {
                edges.insert((src, e.id));
            }
            last.insert(*o, e.id);
        }
    }
    if let Some(end) = end {
        for src in last.values() {
            edges.insert((*src, end));
        }
        if let (Some(start), true) = (start, last.is_empty()) {
            edges.insert((start, end));
        }
    }
    CausalGraph { events: events.to_vec(), edges: edges.into_iter().collect() }
}

/// Object id → whether it starts with a velocity.
pub fn intentions(trace: &SimulationTrace) -> BTreeMap<u32, bool> {
    trace.initial_state().iter().map(|s| (s.id, s.linear_velocity.length() > MOTION_EPSILON)).collect()
}

impl CausalGraph {
    /// True when every edge goes forward in canonical order.
    pub fn is_acyclic(&self) -> bool {
        let pos: BTreeMap<u32, (usize, EventKind, Vec<u32>)> =
            self.events.iter().map(|e| (e.id, (e.tick, e.kind, e.participants.clone()))).collect();
        self.edges.iter().all(|(a, b)| match (pos.get(a), pos.get(b)) {
            (Some(x), Some(y)) => x < y,
            _ => false,
        })
    }

    pub fn event(&self, id: u32) -> Option<&Event> {
        self.events.iter().find(|e| e.id == id)
    }
}

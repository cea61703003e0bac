use std::collections::BTreeSet;

use causim_core::catalog::Catalog;
use causim_core::counterfactual::counterfact_trace;
use causim_core::events::{build_causal_graph, extract_events, intentions, Event, EventKind};
use causim_physics::scene::{resting_height, BORDER};
use causim_physics::{simulate, Color, DynamicObject, SceneSpec, ShapeKind, SimConfig, SizeKind, StaticElement, Vec2};

const G: f64 = 9.8;
const DT: f64 = 1.0 / 120.0;

fn scene(dynamics: Vec<DynamicObject>, extra: Vec<StaticElement>) -> SceneSpec {
    let mut statics = SceneSpec::arena_statics();
    statics.extend(extra);
    SceneSpec { scene_id: "micro".into(), layout_id: 0, statics, dynamics, rng_seed: 0 }
}

fn ball(id: u32, pos: Vec2) -> DynamicObject {
    DynamicObject::new(id, ShapeKind::Circle, SizeKind::Small, Color::Red, pos)
}

fn events_of(s: &SceneSpec) -> Vec<Event> {
    extract_events(s, &simulate(s, &SimConfig::default()).unwrap())
}

fn of_kind(events: &[Event], kind: EventKind) -> Vec<&Event> {
    events.iter().filter(|e| e.kind == kind).collect()
}

/// First tick at which a body released from rest has fallen more than
/// `gap`, under semi-implicit Euler.
fn fall_tick(gap: f64) -> usize {
    (1..).find(|&n| G * DT * DT * (n * (n + 1)) as f64 / 2.0 > gap).unwrap()
}

#[test]
fn drop_on_ground_is_touch_and_collision() {
    let extent = SizeKind::Small.extent();
    let y0 = 3.0;
    let events = events_of(&scene(vec![ball(10, Vec2::new(5.0, y0))], vec![]));
    assert_eq!(events.first().unwrap().kind, EventKind::Start);
    assert_eq!(events.last().unwrap().kind, EventKind::End);
    assert_eq!(events.last().unwrap().tick, 1199);

    let hits = of_kind(&events, EventKind::Collision);
    let first = hits[0];
    assert_eq!(first.participants, vec![1, 10]);
    let expected = fall_tick(y0 - extent - BORDER);
    assert!(first.tick.abs_diff(expected) <= 2, "impact at tick {}, free fall predicts {expected}", first.tick);
    assert!(of_kind(&events, EventKind::TouchStart)
        .iter()
        .any(|t| t.tick == first.tick && t.participants == first.participants));
    assert!(of_kind(&events, EventKind::EnterBasket).is_empty());
}

#[test]
fn ball_dropped_into_basket_enters_once() {
    let basket = StaticElement::basket(4, 7.0, BORDER, 1.6, 1.0);
    let top = basket.region.unwrap().max.y;
    let y0 = 4.0;
    let events = events_of(&scene(vec![ball(10, Vec2::new(7.0, y0))], vec![basket]));
    let entries = of_kind(&events, EventKind::EnterBasket);
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].participants, vec![10]);
    // Strictly inside once the center drops below the rim.
    assert_eq!(entries[0].tick, fall_tick(y0 - top));
    assert!(of_kind(&events, EventKind::Collision).iter().any(|e| e.participants == vec![4, 10]));
}

#[test]
fn object_starting_in_basket_never_enters() {
    let basket = StaticElement::basket(4, 7.0, BORDER, 1.6, 1.0);
    let y = resting_height(ShapeKind::Circle, SizeKind::Small, BORDER + 0.1);
    let events = events_of(&scene(vec![ball(10, Vec2::new(7.0, y))], vec![basket]));
    assert!(of_kind(&events, EventKind::EnterBasket).is_empty());
}

#[test]
fn resting_contact_is_a_touch_without_collision() {
    let y = resting_height(ShapeKind::Cube, SizeKind::Large, BORDER);
    let cube = DynamicObject::new(10, ShapeKind::Cube, SizeKind::Large, Color::Blue, Vec2::new(4.0, y));
    let events = events_of(&scene(vec![cube], vec![]));
    assert!(of_kind(&events, EventKind::TouchStart).iter().any(|e| e.participants == vec![1, 10]));
    assert!(of_kind(&events, EventKind::Collision).is_empty());
}

#[test]
fn billiard_striker_removal_leaves_target_untouched() {
    let y = resting_height(ShapeKind::Circle, SizeKind::Small, BORDER);
    let striker = ball(10, Vec2::new(2.0, y)).with_velocity(Vec2::new(4.0, 0.0));
    let target = DynamicObject::new(11, ShapeKind::Circle, SizeKind::Small, Color::Green, Vec2::new(5.0, y));
    let s = scene(vec![striker, target], vec![]);
    let events = events_of(&s);
    let pair: Vec<_> =
        of_kind(&events, EventKind::Collision).into_iter().filter(|e| e.participants == vec![10, 11]).collect();
    assert!(!pair.is_empty(), "striker never hit the target");

    let v = counterfact_trace(&s, 10, &SimConfig::default()).unwrap();
    let (trace, graph) = (v.trace, v.graph);
    assert_eq!(trace.removed_object_id, Some(10));
    assert!(graph.events.iter().all(|e| !e.involves(10)));
    assert!(of_kind(&graph.events, EventKind::Collision).is_empty());
    assert!(counterfact_trace(&s, 1, &SimConfig::default()).is_err());
}

#[test]
fn intentions_follow_initial_velocity() {
    let y = resting_height(ShapeKind::Circle, SizeKind::Small, BORDER);
    let s = scene(
        vec![ball(10, Vec2::new(2.0, y)).with_velocity(Vec2::new(1.0, 0.0)), ball(11, Vec2::new(6.0, y))],
        vec![],
    );
    let i = intentions(&simulate(&s, &SimConfig::default()).unwrap());
    assert_eq!(i.get(&10), Some(&true));
    assert_eq!(i.get(&11), Some(&false));
}

#[test]
fn catalog_scene_graphs_are_well_formed() {
    let catalog = Catalog::bundled();
    for layout in [1, 5, 9, 14, 20] {
        let s = catalog.sample_scene(layout, 3).unwrap();
        let events = events_of(&s);
        let keys: Vec<_> = events.iter().map(|e| e.order_key()).collect();
        assert!(keys.windows(2).all(|w| w[0] <= w[1]), "layout {layout}: events out of order");
        assert!(events.iter().enumerate().all(|(i, e)| e.id == i as u32));

        let dynamic: BTreeSet<u32> = s.dynamics.iter().map(|d| d.id).collect();
        let graph = build_causal_graph(&events, &dynamic);
        assert!(graph.is_acyclic());
        let start = graph.events.iter().find(|e| e.kind == EventKind::Start).unwrap().id;
        let end = graph.events.iter().find(|e| e.kind == EventKind::End).unwrap().id;
        for &(a, b) in &graph.edges {
            let (ea, eb) = (graph.event(a).unwrap(), graph.event(b).unwrap());
            let shared = ea.participants.iter().any(|p| dynamic.contains(p) && eb.involves(*p));
            assert!(shared || a == start || b == end, "layout {layout}: edge {a}->{b} shares no object");
        }
        // Every event with a dynamic participant has a cause; End has at least one.
        for e in &graph.events {
            let incoming = graph.edges.iter().filter(|(_, b)| *b == e.id).count();
            if e.participants.iter().any(|p| dynamic.contains(p)) || e.kind == EventKind::End {
                assert!(incoming >= 1, "layout {layout}: event {} has no cause", e.id);
            } else {
                assert_eq!(incoming, 0, "layout {layout}: static-only event {} is linked", e.id);
            }
        }
    }
}

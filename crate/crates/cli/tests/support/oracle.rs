//! Brute-force answers read straight off simulation traces, with no DSL and
//! no event extraction.

use std::collections::{BTreeMap, BTreeSet};

use causim_core::dsl::Answer;
use causim_core::video::Video;
use causim_physics::{Color, SceneSpec, ShapeKind, SimulationTrace, StaticKind};

const MOVING: f64 = 1e-3;
const IMPACT: f64 = 0.5;
const MAX_COUNT: usize = 10;

/// Contact onsets faster than the collision threshold.
#[derive(Clone, Copy, Debug)]
pub struct Hit {
    pub tick: usize,
    pub a: u32,
    pub b: u32,
}

/// Outcome facts of one trace.
#[derive(Clone, Debug, Default)]
pub struct Facts {
    pub dynamic: BTreeSet<u32>,
    pub hits: Vec<Hit>,
    pub entry_tick: BTreeMap<u32, usize>,
    pub start_moving: BTreeSet<u32>,
    pub end_moving: BTreeSet<u32>,
    statics: BTreeMap<u32, StaticKind>,
}

impl Facts {
    pub fn scan(scene: &SceneSpec, trace: &SimulationTrace) -> Facts {
        let statics: BTreeMap<u32, StaticKind> = scene.statics.iter().map(|s| (s.id, s.kind)).collect();
        let mut dynamic = BTreeSet::new();
        let mut start_moving = BTreeSet::new();
        let mut end_moving = BTreeSet::new();
        for s in &trace.states[0] {
            dynamic.insert(s.id);
            if s.linear_velocity.length() > MOVING {
                start_moving.insert(s.id);
            }
        }
        for s in trace.states.last().unwrap() {
            if s.linear_velocity.length() > MOVING {
                end_moving.insert(s.id);
            }
        }

        let mut hits = Vec::new();
        let mut touching: BTreeSet<(u32, u32)> = BTreeSet::new();
        for (tick, contacts) in trace.contacts.iter().enumerate() {
            let mut now = BTreeSet::new();
            for c in contacts {
                let pair = if c.a < c.b { (c.a, c.b) } else { (c.b, c.a) };
                if now.insert(pair) && !touching.contains(&pair) && c.approach_speed > IMPACT {
                    hits.push(Hit { tick, a: pair.0, b: pair.1 });
                }
            }
            touching = now;
        }
        hits.sort_by_key(|h| (h.tick, h.a, h.b));

        let regions: Vec<_> =
            scene.statics.iter().filter(|s| s.kind == StaticKind::Basket).filter_map(|s| s.region).collect();
        let mut entry_tick = BTreeMap::new();
        for &id in &dynamic {
            let inside = |tick: usize| {
                let st = trace.states[tick].iter().find(|s| s.id == id).unwrap();
                regions.iter().any(|r| r.contains(st.position))
            };
            for tick in 1..trace.states.len() {
                if inside(tick) && !inside(tick - 1) {
                    entry_tick.insert(id, tick);
                    break;
                }
            }
            // `inside(0)` objects count only once they leave and come back.
        }
        Facts { dynamic, hits, entry_tick, start_moving, end_moving, statics }
    }

    fn is_static(&self, id: u32, kind: StaticKind) -> bool {
        self.statics.get(&id) == Some(&kind)
    }

    pub fn entered(&self) -> BTreeSet<u32> {
        self.entry_tick.keys().copied().collect()
    }

    fn hits_with(&self, kind: StaticKind) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.hits.iter().filter_map(move |h| {
            if self.is_static(h.a, kind) && self.dynamic.contains(&h.b) {
                Some((h.tick, h.b))
            } else if self.is_static(h.b, kind) && self.dynamic.contains(&h.a) {
                Some((h.tick, h.a))
            } else {
                None
            }
        })
    }

    pub fn grounded(&self) -> BTreeSet<u32> {
        self.hits_with(StaticKind::Ground).map(|(_, id)| id).collect()
    }

    pub fn basket_hit(&self) -> BTreeSet<u32> {
        self.hits_with(StaticKind::Basket).map(|(_, id)| id).collect()
    }

    pub fn first_ground(&self, id: u32) -> Option<usize> {
        self.hits_with(StaticKind::Ground).filter(|(_, o)| *o == id).map(|(t, _)| t).min()
    }

    /// Hits between two dynamic objects.
    pub fn dynamic_hits(&self) -> impl Iterator<Item = &Hit> + '_ {
        self.hits.iter().filter(|h| self.dynamic.contains(&h.a) && self.dynamic.contains(&h.b))
    }

    pub fn colliders(&self) -> BTreeSet<u32> {
        self.dynamic_hits().flat_map(|h| [h.a, h.b]).collect()
    }

    /// (tick, partner) of every dynamic hit of `id`, in time order.
    pub fn partner_hits(&self, id: u32) -> Vec<(usize, u32)> {
        self.dynamic_hits()
            .filter_map(|h| {
                if h.a == id {
                    Some((h.tick, h.b))
                } else if h.b == id {
                    Some((h.tick, h.a))
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn partners(&self, id: u32) -> BTreeSet<u32> {
        self.partner_hits(id).into_iter().map(|(_, p)| p).collect()
    }
}

/// Facts of the real run and of every single-object removal.
pub struct World {
    pub scene: SceneSpec,
    pub real: Facts,
    pub without: BTreeMap<u32, Facts>,
}

impl World {
    pub fn of(video: &Video) -> World {
        let real = Facts::scan(&video.scene, &video.trace);
        let mut without = BTreeMap::new();
        for d in &video.scene.dynamics {
            let v = video.variations.get(d.id).expect("variation simulates");
            let mut scene = video.scene.clone();
            scene.dynamics.retain(|o| o.id != d.id);
            without.insert(d.id, Facts::scan(&scene, &v.trace));
        }
        World { scene: video.scene.clone(), real, without }
    }

    fn color(&self, id: u32) -> Option<Color> {
        self.scene.dynamic(id).map(|d| d.color)
    }

    fn shape(&self, id: u32) -> Option<ShapeKind> {
        self.scene.dynamic(id).map(|d| d.shape)
    }
}

fn count(n: usize) -> Option<Answer> {
    (n <= MAX_COUNT).then_some(Answer::Count(n as u32))
}

fn yes(b: bool) -> Option<Answer> {
    Some(Answer::Bool(b))
}

/// The single object entering at the extreme entry tick.
fn extreme_entrant(f: &Facts, last: bool) -> Option<u32> {
    let t = if last { f.entry_tick.values().max()? } else { f.entry_tick.values().min()? };
    let at: Vec<u32> = f.entry_tick.iter().filter(|(_, v)| *v == t).map(|(k, _)| *k).collect();
    (at.len() == 1).then(|| at[0])
}

/// Partner of the first or last dynamic hit of `x`; simultaneous hits break
/// ties by the lower id pair.
fn extreme_partner(f: &Facts, x: u32, last: bool) -> Option<u32> {
    let hits: Vec<&Hit> = f.dynamic_hits().filter(|h| h.a == x || h.b == x).collect();
    let h = if last { hits.last()? } else { hits.first()? };
    Some(if h.a == x { h.b } else { h.a })
}

/// Answer of template `template` for objects `objs` (slot order), or `None`
/// when the question has no valid answer.
pub fn answer(template: &str, objs: &[u32], w: &World) -> Option<Answer> {
    let f = &w.real;
    let x = objs.first().copied().unwrap_or(0);
    let y = objs.get(1).copied().unwrap_or(0);
    let cf = |id: u32| &w.without[&id];
    // Made to enter only because of x, excluding x itself.
    let gained = |id: u32| -> BTreeSet<u32> {
        let c = cf(id).entered();
        f.entered().into_iter().filter(|o| !c.contains(o) && *o != id).collect()
    };
    let lost = |id: u32| -> BTreeSet<u32> {
        let real = f.entered();
        cf(id).entered().into_iter().filter(|o| !real.contains(o)).collect()
    };
    let moving = |o: &u32| f.start_moving.contains(o);
    let others = || f.dynamic.iter().copied().filter(move |o| *o != x);
    match template {
        "ca_cause" => yes(gained(x).contains(&y) && !moving(&y)),
        "ca_enable" => yes(gained(x).contains(&y) && moving(&y)),
        "ca_prevent" => yes(lost(x).contains(&y) && moving(&y)),
        "ca_cause_any" => yes(gained(x).iter().any(|o| !moving(o))),
        "ca_enable_any" => yes(gained(x).iter().any(moving)),
        "ca_prevent_any" => yes(lost(x).iter().any(moving)),
        "cn_cause" => count(gained(x).iter().filter(|o| !moving(o)).count()),
        "cn_enable" => count(gained(x).iter().filter(|o| moving(o)).count()),
        "cn_prevent" => count(lost(x).iter().filter(|o| moving(o)).count()),
        "cn_depend" => count(gained(x).len()),

        "cfn_enter" => count(cf(x).entered().len()),
        "cfn_ground" => count(cf(x).grounded().len()),
        "cfn_collide" => count(cf(x).colliders().len()),
        "cfn_partners" => count(cf(x).partners(y).len()),
        "cfn_basket" => count(cf(x).basket_hit().len()),
        "cfo_enter" => yes(cf(x).entered().contains(&y)),
        "cfo_ground" => yes(cf(x).grounded().contains(&y)),
        "cfo_collide" => yes(cf(x).colliders().contains(&y)),
        "cfo_basket" => yes(cf(x).basket_hit().contains(&y)),
        "cfo_any_enter" => yes(others().any(|o| cf(o).entered().contains(&x))),
        "cfo_any_ground" => yes(others().any(|o| cf(o).grounded().contains(&x))),
        "cfo_any_miss" => yes(others().any(|o| !cf(o).entered().contains(&x))),

        "d2q_moving" => count(f.end_moving.len()),
        "d2q_stationary" => count(f.dynamic.len() - f.end_moving.len()),
        "d2q_came_to_rest" => count(f.dynamic.iter().filter(|o| moving(o) && !f.end_moving.contains(o)).count()),

        "dc_first_partner" => extreme_partner(f, x, false).and_then(|p| w.color(p)).map(Answer::Color),
        "dc_last_partner" => extreme_partner(f, x, true).and_then(|p| w.color(p)).map(Answer::Color),
        "ds_first_partner" => extreme_partner(f, x, false).and_then(|p| w.shape(p)).map(Answer::Shape),
        "ds_last_partner" => extreme_partner(f, x, true).and_then(|p| w.shape(p)).map(Answer::Shape),
        "dc_first_in" => extreme_entrant(f, false).and_then(|p| w.color(p)).map(Answer::Color),
        "dc_last_in" => extreme_entrant(f, true).and_then(|p| w.color(p)).map(Answer::Color),
        "ds_first_in" => extreme_entrant(f, false).and_then(|p| w.shape(p)).map(Answer::Shape),
        "ds_last_in" => extreme_entrant(f, true).and_then(|p| w.shape(p)).map(Answer::Shape),

        "dct_before_ground" => f.first_ground(x).map(|t| f.partner_hits(x).iter().any(|(h, _)| *h < t)).and_then(yes),
        "dct_after_ground" => f.first_ground(x).map(|t| f.partner_hits(x).iter().any(|(h, _)| *h > t)).and_then(yes),
        "dct_before_basket" => f.entry_tick.get(&x).map(|t| f.partner_hits(x).iter().any(|(h, _)| h < t)).and_then(yes),
        "dct_after_basket" => f.entry_tick.get(&x).map(|t| f.partner_hits(x).iter().any(|(h, _)| h > t)).and_then(yes),
        "dnt_partners_before_ground" => f.first_ground(x).and_then(|t| {
            count(f.partner_hits(x).iter().filter(|(h, _)| *h < t).map(|(_, p)| *p).collect::<BTreeSet<_>>().len())
        }),
        "dnt_partners_before_basket" => f.entry_tick.get(&x).and_then(|t| {
            count(f.partner_hits(x).iter().filter(|(h, _)| h < t).map(|(_, p)| *p).collect::<BTreeSet<_>>().len())
        }),
        "dnt_enter_before" => {
            f.entry_tick.get(&x).and_then(|t| count(f.entry_tick.values().filter(|v| *v < t).count()))
        }
        "dnt_enter_after" => f.entry_tick.get(&x).and_then(|t| count(f.entry_tick.values().filter(|v| *v > t).count())),

        "dnv_ground" => count(f.grounded().len()),
        "dnv_basket" => count(f.entered().len()),
        "dnv_collide" => count(f.colliders().len()),
        "dnv_partners" => count(f.partners(x).len()),

        "dto_basket_before" => Some((*f.entry_tick.get(&x)?, *f.entry_tick.get(&y)?)).and_then(|(a, b)| yes(a < b)),
        "dto_basket_after" => Some((*f.entry_tick.get(&x)?, *f.entry_tick.get(&y)?)).and_then(|(a, b)| yes(a > b)),
        "dto_ground_before" => Some((f.first_ground(x)?, f.first_ground(y)?)).and_then(|(a, b)| yes(a < b)),
        other => panic!("no oracle for template {other}"),
    }
}

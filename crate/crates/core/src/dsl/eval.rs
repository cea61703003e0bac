//! Program evaluation against one simulated scene.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use causim_physics::{Color, SceneSpec, ShapeKind, SimulationTrace, SizeKind, StaticKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{Literal, Node, Program};
use crate::counterfactual::CounterfactualSource;
use crate::events::{Event, EventKind, MOTION_EPSILON};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectKind {
    Static(StaticKind),
    Dynamic { size: SizeKind, color: Color, shape: ShapeKind },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectInfo {
    pub id: u32,
    pub kind: ObjectKind,
    pub start_speed: f64,
    pub end_speed: f64,
}

impl ObjectInfo {
    pub fn is_dynamic(&self) -> bool {
        matches!(self.kind, ObjectKind::Dynamic { .. })
    }

    pub fn moving_at(&self, end: bool) -> bool {
        let v = if end { self.end_speed } else { self.start_speed };
        self.is_dynamic() && v > MOTION_EPSILON
    }
}

/// Everything a program can observe about one simulation.
#[derive(Clone)]
pub struct SimContext {
    objects: BTreeMap<u32, ObjectInfo>,
    events: Arc<Vec<Event>>,
    counterfactuals: Arc<dyn CounterfactualSource>,
}

impl fmt::Debug for SimContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SimContext").field("objects", &self.objects).field("events", &self.events).finish()
    }
}

impl SimContext {
    pub fn new(
        scene: &SceneSpec,
        trace: &SimulationTrace,
        events: Arc<Vec<Event>>,
        counterfactuals: Arc<dyn CounterfactualSource>,
    ) -> Self {
        let mut objects = BTreeMap::new();
        for s in &scene.statics {
            objects.insert(
                s.id,
                ObjectInfo { id: s.id, kind: ObjectKind::Static(s.kind), start_speed: 0.0, end_speed: 0.0 },
            );
        }
        for d in &scene.dynamics {
            let speed = |states: &[causim_physics::BodyState]| {
                states.iter().find(|s| s.id == d.id).map_or(0.0, |s| s.linear_velocity.length())
            };
            objects.insert(
                d.id,
                ObjectInfo {
                    id: d.id,
                    kind: ObjectKind::Dynamic { size: d.size, color: d.color, shape: d.shape },
                    start_speed: speed(trace.initial_state()),
                    end_speed: speed(trace.final_state()),
                },
            );
        }
        SimContext { objects, events, counterfactuals }
    }

    /// Context from explicit parts, for hand-built cases.
    pub fn from_parts(
        objects: Vec<ObjectInfo>,
        events: Vec<Event>,
        counterfactuals: Arc<dyn CounterfactualSource>,
    ) -> Self {
        SimContext {
            objects: objects.into_iter().map(|o| (o.id, o)).collect(),
            events: Arc::new(events),
            counterfactuals,
        }
    }

    pub fn object(&self, id: u32) -> Option<&ObjectInfo> {
        self.objects.get(&id)
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectInfo> {
        self.objects.values()
    }

    pub fn events(&self) -> &Arc<Vec<Event>> {
        &self.events
    }

    pub fn counterfactuals(&self) -> &Arc<dyn CounterfactualSource> {
        &self.counterfactuals
    }

    /// Dynamic object id → starts moving.
    pub fn intentions(&self) -> BTreeMap<u32, bool> {
        self.objects.values().filter(|o| o.is_dynamic()).map(|o| (o.id, o.moving_at(false))).collect()
    }

    pub fn dynamic_ids(&self) -> Vec<u32> {
        self.objects.values().filter(|o| o.is_dynamic()).map(|o| o.id).collect()
    }

    pub fn attributes(&self, id: u32) -> Option<(SizeKind, Color, ShapeKind)> {
        self.attrs(id)
    }

    fn is_kind(&self, id: u32, kind: StaticKind) -> bool {
        matches!(self.objects.get(&id), Some(ObjectInfo { kind: ObjectKind::Static(k), .. }) if *k == kind)
    }

    fn is_dynamic(&self, id: u32) -> bool {
        self.objects.get(&id).is_some_and(|o| o.is_dynamic())
    }

    fn attrs(&self, id: u32) -> Option<(SizeKind, Color, ShapeKind)> {
        match self.objects.get(&id)?.kind {
            ObjectKind::Dynamic { size, color, shape } => Some((size, color, shape)),
            ObjectKind::Static(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Object(u32),
    ObjectSet(Vec<u32>),
    ObjectSetList(Vec<Vec<u32>>),
    Event(Event),
    EventSet(Vec<Event>),
    EventSetList(Vec<Vec<Event>>),
    Size(SizeKind),
    Color(Color),
    Shape(ShapeKind),
    Integer(i64),
    Bool(bool),
    BoolList(Vec<bool>),
    Invalid,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("evaluation error at {path}: {message}")]
pub struct EvalError {
    pub path: String,
    pub message: String,
}

/// Largest count an answer may carry.
pub const MAX_COUNT_ANSWER: u32 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerType {
    Color,
    Shape,
    Count,
    Boolean,
}

impl AnswerType {
    pub const ALL: [AnswerType; 4] = [AnswerType::Color, AnswerType::Shape, AnswerType::Count, AnswerType::Boolean];

    pub fn name(self) -> &'static str {
        match self {
            AnswerType::Color => "color",
            AnswerType::Shape => "shape",
            AnswerType::Count => "count",
            AnswerType::Boolean => "boolean",
        }
    }

    /// Every answer of this type.
    pub fn vocabulary(self) -> Vec<Answer> {
        match self {
            AnswerType::Color => Color::ALL.into_iter().map(Answer::Color).collect(),
            AnswerType::Shape => ShapeKind::ALL.into_iter().map(Answer::Shape).collect(),
            AnswerType::Count => (0..=MAX_COUNT_ANSWER).map(Answer::Count).collect(),
            AnswerType::Boolean => vec![Answer::Bool(true), Answer::Bool(false)],
        }
    }
}

impl fmt::Display for AnswerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Answer {
    Color(Color),
    Shape(ShapeKind),
    Count(u32),
    Bool(bool),
}

impl Answer {
    pub fn answer_type(self) -> AnswerType {
        match self {
            Answer::Color(_) => AnswerType::Color,
            Answer::Shape(_) => AnswerType::Shape,
            Answer::Count(_) => AnswerType::Count,
            Answer::Bool(_) => AnswerType::Boolean,
        }
    }

    /// Answer for a root value; `None` for Invalid and counts off the vocabulary.
    pub fn from_value(v: &Value) -> Option<Answer> {
        match v {
            Value::Color(c) => Some(Answer::Color(*c)),
            Value::Shape(s) => Some(Answer::Shape(*s)),
            Value::Bool(b) => Some(Answer::Bool(*b)),
            Value::Integer(i) => u32::try_from(*i).ok().filter(|n| *n <= MAX_COUNT_ANSWER).map(Answer::Count),
            _ => None,
        }
    }
}

/// The full answer vocabulary in a fixed order.
pub fn answer_vocabulary() -> Vec<Answer> {
    AnswerType::ALL.into_iter().flat_map(|t| t.vocabulary()).collect()
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Color(c) => f.write_str(c.name()),
            Answer::Shape(s) => f.write_str(s.name()),
            Answer::Count(n) => write!(f, "{n}"),
            Answer::Bool(true) => f.write_str("True"),
            Answer::Bool(false) => f.write_str("False"),
        }
    }
}

impl FromStr for Answer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        answer_vocabulary().into_iter().find(|a| a.to_string() == s).ok_or_else(|| format!("`{s}` is not an answer"))
    }
}

impl Serialize for Answer {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

struct Evaluator<'a> {
    ctx: &'a SimContext,
    env: BTreeMap<&'a str, Value>,
}

fn fail(path: &str, message: impl Into<String>) -> EvalError {
    EvalError { path: path.to_string(), message: message.into() }
}

fn sorted_unique(mut ids: Vec<u32>) -> Vec<u32> {
    ids.sort_unstable();
    ids.dedup();
    ids
}

fn first_event(events: &[Event]) -> Value {
    events.iter().min_by(|a, b| a.order_key().cmp(&b.order_key())).cloned().map_or(Value::Invalid, Value::Event)
}

fn last_event(events: &[Event]) -> Value {
    events.iter().max_by(|a, b| a.order_key().cmp(&b.order_key())).cloned().map_or(Value::Invalid, Value::Event)
}

impl<'a> Evaluator<'a> {
    fn objects_from_events(&self, events: &[Event]) -> Vec<u32> {
        sorted_unique(
            events.iter().flat_map(|e| e.participants.iter().copied()).filter(|id| self.ctx.is_dynamic(*id)).collect(),
        )
    }

    fn collisions_with(&self, events: &[Event], kind: StaticKind) -> Vec<Event> {
        events
            .iter()
            .filter(|e| e.kind == EventKind::Collision && e.participants.iter().any(|p| self.ctx.is_kind(*p, kind)))
            .cloned()
            .collect()
    }

    fn counterfactual(&self, id: u32, path: &str) -> Result<Option<Vec<Event>>, EvalError> {
        if !self.ctx.is_dynamic(id) {
            return Ok(None);
        }
        let events = self.ctx.counterfactuals.events_without(id).map_err(|e| fail(path, e.to_string()))?;
        Ok(Some(events.as_ref().clone()))
    }

    fn node(&mut self, node: &'a Node, path: &str) -> Result<Value, EvalError> {
        match node {
            Node::Var(name) => {
                self.env.get(name.as_str()).cloned().ok_or_else(|| fail(path, format!("unbound variable `{name}`")))
            }
            Node::Call { module, children, args } => {
                let here = format!("{path}/{module}");
                let mut vals = Vec::with_capacity(children.len() + args.len());
                for (i, c) in children.iter().enumerate() {
                    vals.push(self.node(c, &format!("{here}[{i}]"))?);
                }
                for a in args {
                    vals.push(match a {
                        Literal::Size(s) => Value::Size(*s),
                        Literal::Color(c) => Value::Color(*c),
                        Literal::Shape(s) => Value::Shape(*s),
                        Literal::Int(i) => Value::Integer(*i),
                        Literal::Slot(s) => return Err(fail(&here, format!("unbound template slot ${}", s.name()))),
                    });
                }
                if vals.contains(&Value::Invalid) {
                    return Ok(Value::Invalid);
                }
                self.apply(module, vals, &here)
            }
        }
    }

    fn apply(&self, module: &str, vals: Vec<Value>, path: &str) -> Result<Value, EvalError> {
        use Value as V;
        let ctx = self.ctx;
        let mismatch = || fail(path, format!("argument values do not fit {module}"));
        let mut it = vals.into_iter();
        let mut arg = || it.next().ok_or_else(mismatch);

        macro_rules! take {
            ($pat:pat => $out:expr) => {
                match arg()? {
                    $pat => $out,
                    _ => return Err(mismatch()),
                }
            };
        }
        let step_is_end = |step: i64| match step {
            0 => Ok(false),
            -1 => Ok(true),
            other => Err(fail(path, format!("scene step {other} is not 0 (start) or -1 (end)"))),
        };

        Ok(match module {
            "SceneAtStart" | "SceneAtEnd" => V::ObjectSet(ctx.objects.keys().copied().collect()),
            "StartSceneStep" => V::Integer(0),
            "EndSceneStep" => V::Integer(-1),
            "Events" => V::EventSet(ctx.events.as_ref().clone()),

            "QueryColor" => {
                let id = take!(V::Object(id) => id);
                ctx.attrs(id).map_or(V::Invalid, |a| V::Color(a.1))
            }
            "QueryShape" => {
                let id = take!(V::Object(id) => id);
                ctx.attrs(id).map_or(V::Invalid, |a| V::Shape(a.2))
            }
            "Count" => V::Integer(take!(V::ObjectSet(s) => s.len() as i64)),
            "Exist" => match arg()? {
                V::ObjectSet(s) => V::Bool(!s.is_empty()),
                V::EventSet(s) => V::Bool(!s.is_empty()),
                _ => return Err(mismatch()),
            },
            "AnyFalse" => V::Bool(take!(V::BoolList(b) => b.iter().any(|x| !x))),
            "AnyTrue" => V::Bool(take!(V::BoolList(b) => b.iter().any(|x| *x))),
            "IsBefore" | "IsAfter" => {
                let a = take!(V::Event(e) => e);
                let b = take!(V::Event(e) => e);
                V::Bool(if module == "IsBefore" { a.tick < b.tick } else { a.tick > b.tick })
            }

            "FilterColor" => {
                let s = take!(V::ObjectSet(s) => s);
                let c = take!(V::Color(c) => c);
                V::ObjectSet(s.into_iter().filter(|id| ctx.attrs(*id).is_some_and(|a| a.1 == c)).collect())
            }
            "FilterShape" => {
                let s = take!(V::ObjectSet(s) => s);
                let sh = take!(V::Shape(x) => x);
                V::ObjectSet(s.into_iter().filter(|id| ctx.attrs(*id).is_some_and(|a| a.2 == sh)).collect())
            }
            "FilterSize" => {
                let s = take!(V::ObjectSet(s) => s);
                let z = take!(V::Size(x) => x);
                V::ObjectSet(s.into_iter().filter(|id| ctx.attrs(*id).is_some_and(|a| a.0 == z)).collect())
            }
            "FilterDynamic" => {
                V::ObjectSet(take!(V::ObjectSet(s) => s).into_iter().filter(|id| ctx.is_dynamic(*id)).collect())
            }
            "FilterMoving" | "FilterStationary" => {
                let s = take!(V::ObjectSet(s) => s);
                let end = step_is_end(take!(V::Integer(i) => i))?;
                let want = module == "FilterMoving";
                V::ObjectSet(
                    s.into_iter().filter(|id| ctx.objects.get(id).is_some_and(|o| o.moving_at(end) == want)).collect(),
                )
            }

            "FilterEvents" => {
                let evs = take!(V::EventSet(s) => s);
                let id = take!(V::Object(id) => id);
                V::EventSet(evs.into_iter().filter(|e| e.involves(id)).collect())
            }
            "FilterCollision" => {
                V::EventSet(take!(V::EventSet(s) => s).into_iter().filter(|e| e.kind == EventKind::Collision).collect())
            }
            "FilterCollisionWithDynamics" => V::EventSet(
                take!(V::EventSet(s) => s)
                    .into_iter()
                    .filter(|e| e.kind == EventKind::Collision && e.participants.iter().all(|p| ctx.is_dynamic(*p)))
                    .collect(),
            ),
            "FilterCollideGround" => V::EventSet(self.collisions_with(&take!(V::EventSet(s) => s), StaticKind::Ground)),
            "FilterCollideBasket" => V::EventSet(self.collisions_with(&take!(V::EventSet(s) => s), StaticKind::Basket)),
            "FilterEnterBasket" => V::EventSet(
                take!(V::EventSet(s) => s).into_iter().filter(|e| e.kind == EventKind::EnterBasket).collect(),
            ),
            "FilterCollideGroundList" => V::EventSetList(
                take!(V::EventSetList(l) => l).iter().map(|s| self.collisions_with(s, StaticKind::Ground)).collect(),
            ),
            "FilterCollideBasketList" => V::EventSetList(
                take!(V::EventSetList(l) => l).iter().map(|s| self.collisions_with(s, StaticKind::Basket)).collect(),
            ),
            "FilterEnterBasketList" => V::EventSetList(
                take!(V::EventSetList(l) => l)
                    .into_iter()
                    .map(|s| s.into_iter().filter(|e| e.kind == EventKind::EnterBasket).collect())
                    .collect(),
            ),
            "FilterBefore" | "FilterAfter" => {
                let evs = take!(V::EventSet(s) => s);
                let pivot = take!(V::Event(e) => e);
                let before = module == "FilterBefore";
                V::EventSet(
                    evs.into_iter()
                        .filter(|e| if before { e.tick < pivot.tick } else { e.tick > pivot.tick })
                        .collect(),
                )
            }
            "FilterFirst" => first_event(&take!(V::EventSet(s) => s)),
            "FilterLast" => last_event(&take!(V::EventSet(s) => s)),
            "EventPartner" => {
                let e = take!(V::Event(e) => e);
                let id = take!(V::Object(id) => id);
                match e.participants.as_slice() {
                    [a, b] if *a == id => V::Object(*b),
                    [a, b] if *b == id => V::Object(*a),
                    _ => V::Invalid,
                }
            }
            "FilterObjectsFromEvents" => V::ObjectSet(self.objects_from_events(&take!(V::EventSet(s) => s))),
            "FilterObjectsFromEventsList" => {
                V::ObjectSetList(take!(V::EventSetList(l) => l).iter().map(|s| self.objects_from_events(s)).collect())
            }
            "GetCounterfactEvents" => {
                let id = take!(V::Object(id) => id);
                self.counterfactual(id, path)?.map_or(V::Invalid, V::EventSet)
            }
            "GetCounterfactEventsList" => {
                let s = take!(V::ObjectSet(s) => s);
                let mut out = Vec::with_capacity(s.len());
                for id in s {
                    match self.counterfactual(id, path)? {
                        Some(evs) => out.push(evs),
                        None => return Ok(V::Invalid),
                    }
                }
                V::EventSetList(out)
            }

            "Unique" => match take!(V::ObjectSet(s) => s).as_slice() {
                [only] => V::Object(*only),
                _ => V::Invalid,
            },
            "Intersect" | "Difference" => {
                let a = take!(V::ObjectSet(s) => s);
                let b: BTreeSet<u32> = take!(V::ObjectSet(s) => s).into_iter().collect();
                let keep = module == "Intersect";
                V::ObjectSet(a.into_iter().filter(|id| b.contains(id) == keep).collect())
            }
            "IntersectList" => {
                let l = take!(V::ObjectSetList(l) => l);
                let b: BTreeSet<u32> = take!(V::ObjectSet(s) => s).into_iter().collect();
                V::ObjectSetList(l.into_iter().map(|s| s.into_iter().filter(|id| b.contains(id)).collect()).collect())
            }
            "ExistList" => match arg()? {
                V::ObjectSetList(l) => V::BoolList(l.iter().map(|s| !s.is_empty()).collect()),
                V::EventSetList(l) => V::BoolList(l.iter().map(|s| !s.is_empty()).collect()),
                _ => return Err(mismatch()),
            },
            "AsList" => V::ObjectSet(vec![take!(V::Object(id) => id)]),
            other => return Err(fail(path, format!("unknown module `{other}`"))),
        })
    }
}

/// Evaluates bindings in order, then the root.
pub fn evaluate(program: &Program, ctx: &SimContext) -> Result<Value, EvalError> {
    let mut ev = Evaluator { ctx, env: BTreeMap::new() };
    for b in &program.lets {
        let v = ev.node(&b.value, &format!("let {}", b.name))?;
        ev.env.insert(b.name.as_str(), v);
    }
    ev.node(&program.root, "root")
}

/// Evaluates and maps the root to the answer vocabulary.
pub fn answer(program: &Program, ctx: &SimContext) -> Result<Option<Answer>, EvalError> {
    evaluate(program, ctx).map(|v| Answer::from_value(&v))
}

//! Object-removal variations and cause / enable / prevent classification.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use causim_physics::{simulate, PhysicsError, SceneSpec, SimConfig, SimulationTrace, ENGINE_VERSION};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{build_causal_graph, extract_events, CausalGraph, Event, EventKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CounterfactualError {
    #[error("object {0} is not a dynamic object of the scene")]
    NotDynamic(u32),
    #[error("affector and patient are both object {0}")]
    SameObject(u32),
    #[error("re-simulation without object {removed} failed: {source}")]
    Simulation { removed: u32, source: PhysicsError },
}

/// One re-simulation of a scene with a single object removed.
#[derive(Clone, Debug)]
pub struct Variation {
    pub removed_object_id: u32,
    pub trace: SimulationTrace,
    pub graph: CausalGraph,
    pub events: Arc<Vec<Event>>,
}

/// Simulates the scene without `removed_id`.
pub fn counterfact_trace(
    scene: &SceneSpec,
    removed_id: u32,
    config: &SimConfig,
) -> Result<Variation, CounterfactualError> {
    let reduced = scene.without_object(removed_id).ok_or(CounterfactualError::NotDynamic(removed_id))?;
    let mut trace =
        simulate(&reduced, config).map_err(|source| CounterfactualError::Simulation { removed: removed_id, source })?;
    trace.removed_object_id = Some(removed_id);
    let events = extract_events(&reduced, &trace);
    let dynamic: BTreeSet<u32> = reduced.dynamics.iter().map(|d| d.id).collect();
    let graph = build_causal_graph(&events, &dynamic);
    Ok(Variation { removed_object_id: removed_id, trace, graph, events: Arc::new(events) })
}

/// Source of counterfactual event lists for the program evaluator.
pub trait CounterfactualSource: Send + Sync {
    fn events_without(&self, object_id: u32) -> Result<Arc<Vec<Event>>, CounterfactualError>;
}

/// Lazily computed, memoized variations of one scene.
pub struct VariationCache {
    scene: SceneSpec,
    config: SimConfig,
    cache: Mutex<BTreeMap<u32, Arc<Variation>>>,
}

impl VariationCache {
    pub fn new(scene: SceneSpec, config: SimConfig) -> Self {
        VariationCache { scene, config, cache: Mutex::new(BTreeMap::new()) }
    }

    pub fn scene(&self) -> &SceneSpec {
        &self.scene
    }

    /// Cache key of a variation.
    pub fn key(&self, removed_id: u32) -> (String, u32, &'static str) {
        (self.scene.scene_id.clone(), removed_id, ENGINE_VERSION)
    }

    pub fn get(&self, removed_id: u32) -> Result<Arc<Variation>, CounterfactualError> {
        if let Some(v) = self.cache.lock().expect("variation cache poisoned").get(&removed_id) {
            return Ok(v.clone());
        }
        // Simulate outside the lock; a concurrent duplicate computes the same value.
        let v = Arc::new(counterfact_trace(&self.scene, removed_id, &self.config)?);
        let mut guard = self.cache.lock().expect("variation cache poisoned");
        Ok(guard.entry(removed_id).or_insert(v).clone())
    }

    /// Every variation of the scene, one per dynamic object, by removed id.
    pub fn all(&self) -> Result<BTreeMap<u32, Arc<Variation>>, CounterfactualError> {
        self.scene.dynamics.iter().map(|d| Ok((d.id, self.get(d.id)?))).collect()
    }

    /// Variations computed so far.
    pub fn computed(&self) -> BTreeMap<u32, Arc<Variation>> {
        self.cache.lock().expect("variation cache poisoned").clone()
    }
}

impl CounterfactualSource for VariationCache {
    fn events_without(&self, object_id: u32) -> Result<Arc<Vec<Event>>, CounterfactualError> {
        Ok(self.get(object_id)?.events.clone())
    }
}

/// Precomputed counterfactual event lists, e.g. loaded from disk.
#[derive(Clone, Debug, Default)]
pub struct FixedCounterfactuals(pub BTreeMap<u32, Arc<Vec<Event>>>);

impl CounterfactualSource for FixedCounterfactuals {
    fn events_without(&self, object_id: u32) -> Result<Arc<Vec<Event>>, CounterfactualError> {
        self.0.get(&object_id).cloned().ok_or(CounterfactualError::NotDynamic(object_id))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    EnterBasket,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Cause,
    Enable,
    Prevent,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalRelation {
    pub affector_id: u32,
    pub patient_id: u32,
    pub task: Task,
    pub relation: Relation,
}

pub fn achieves(events: &[Event], object: u32, task: Task) -> bool {
    match task {
        Task::EnterBasket => events.iter().any(|e| e.kind == EventKind::EnterBasket && e.involves(object)),
    }
}

/// The relation from actual outcome `a`, counterfactual outcome `c` and
/// patient intention `i`.
pub fn relation_from(a: bool, c: bool, i: bool) -> Relation {
    match (a, c, i) {
        (true, false, false) => Relation::Cause,
        (true, false, true) => Relation::Enable,
        (false, true, true) => Relation::Prevent,
        _ => Relation::None,
    }
}

pub fn classify_relation(
    affector_id: u32,
    patient_id: u32,
    task: Task,
    base_events: &[Event],
    source: &dyn CounterfactualSource,
    intentions: &BTreeMap<u32, bool>,
) -> Result<CausalRelation, CounterfactualError> {
    if affector_id == patient_id {
        return Err(CounterfactualError::SameObject(affector_id));
    }
    let intended = *intentions.get(&patient_id).ok_or(CounterfactualError::NotDynamic(patient_id))?;
    if !intentions.contains_key(&affector_id) {
        return Err(CounterfactualError::NotDynamic(affector_id));
    }
    let without = source.events_without(affector_id)?;
    let a = achieves(base_events, patient_id, task);
    let c = achieves(&without, patient_id, task);
    Ok(CausalRelation { affector_id, patient_id, task, relation: relation_from(a, c, intended) })
}

//! One simulated scene with everything derived from it.

use std::collections::BTreeSet;
use std::sync::Arc;

use causim_physics::{simulate, PhysicsError, SceneSpec, SimConfig, SimulationTrace};

use crate::counterfactual::VariationCache;
use crate::dsl::SimContext;
use crate::events::{build_causal_graph, extract_events, CausalGraph, Event};

pub struct Video {
    pub scene: SceneSpec,
    pub trace: SimulationTrace,
    pub events: Arc<Vec<Event>>,
    pub graph: CausalGraph,
    pub variations: Arc<VariationCache>,
    pub context: SimContext,
}

impl Video {
    pub fn simulate(scene: SceneSpec, config: &SimConfig) -> Result<Video, PhysicsError> {
        let trace = simulate(&scene, config)?;
        Ok(Video::from_trace(scene, trace, config))
    }

    /// Rebuilds derived data from a stored trace; variations are simulated on demand.
    pub fn from_trace(scene: SceneSpec, trace: SimulationTrace, config: &SimConfig) -> Video {
        let events = Arc::new(extract_events(&scene, &trace));
        let dynamic: BTreeSet<u32> = scene.dynamics.iter().map(|d| d.id).collect();
        let graph = build_causal_graph(&events, &dynamic);
        let variations = Arc::new(VariationCache::new(scene.clone(), config.clone()));
        let context = SimContext::new(&scene, &trace, events.clone(), variations.clone());
        Video { scene, trace, events, graph, variations, context }
    }

    pub fn scene_id(&self) -> &str {
        &self.scene.scene_id
    }
}

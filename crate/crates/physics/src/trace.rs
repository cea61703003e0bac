//! Full-horizon simulation traces and their JSON-lines encoding.
//!
//! Layout on disk: one header line followed by one line per tick.
//!
//! ```text
//! {"scene_id":"s0001","dt":0.008333333333333333,"tick_count":1200,"engine_version":"causim-physics/1"}
//! {"tick":0,"states":[...],"contacts":[...]}
//! ...
//! ```

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::PhysicsError;
use crate::scene::SceneSpec;
use crate::world::{BodyState, ContactRecord, World, WorldConfig};
use crate::ENGINE_VERSION;

pub const DEFAULT_DURATION: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub duration: f64,
    pub world: WorldConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { duration: DEFAULT_DURATION, world: WorldConfig::default() }
    }
}

impl SimConfig {
    pub fn tick_count(&self) -> usize {
        (self.duration / self.world.dt).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub scene_id: String,
    pub dt: f64,
    pub tick_count: usize,
    pub engine_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removed_object_id: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: usize,
    pub states: Vec<BodyState>,
    pub contacts: Vec<ContactRecord>,
}

/// Every tick of one simulation. Tick `k` samples the world after `k` steps;
/// contacts at tick `k` are those touching in that state.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationTrace {
    pub scene_id: String,
    pub dt: f64,
    pub engine_version: String,
    pub removed_object_id: Option<u32>,
    pub states: Vec<Vec<BodyState>>,
    pub contacts: Vec<Vec<ContactRecord>>,
}

impl SimulationTrace {
    pub fn tick_count(&self) -> usize {
        self.states.len()
    }

    pub fn duration(&self) -> f64 {
        self.tick_count() as f64 * self.dt
    }

    pub fn initial_state(&self) -> &[BodyState] {
        &self.states[0]
    }

    pub fn final_state(&self) -> &[BodyState] {
        self.states.last().expect("trace has at least one tick")
    }

    pub fn state_of(&self, tick: usize, id: u32) -> Option<&BodyState> {
        self.states.get(tick)?.iter().find(|s| s.id == id)
    }

    pub fn header(&self) -> TraceHeader {
        TraceHeader {
            scene_id: self.scene_id.clone(),
            dt: self.dt,
            tick_count: self.tick_count(),
            engine_version: self.engine_version.clone(),
            removed_object_id: self.removed_object_id,
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &self.header())?;
        w.write_all(b"\n")?;
        for (tick, (states, contacts)) in self.states.iter().zip(&self.contacts).enumerate() {
            let rec = TickRecordRef { tick, states, contacts };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, TraceIoError> {
        let mut lines = r.lines();
        let header_line = lines.next().ok_or(TraceIoError::Empty)??;
        let header: TraceHeader = serde_json::from_str(&header_line)?;
        let mut states = Vec::with_capacity(header.tick_count);
        let mut contacts = Vec::with_capacity(header.tick_count);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TickRecord = serde_json::from_str(&line)?;
            if rec.tick != states.len() {
                return Err(TraceIoError::TickOrder { expected: states.len(), found: rec.tick });
            }
            states.push(rec.states);
            contacts.push(rec.contacts);
        }
        if states.len() != header.tick_count {
            return Err(TraceIoError::TickCount { header: header.tick_count, found: states.len() });
        }
        Ok(SimulationTrace {
            scene_id: header.scene_id,
            dt: header.dt,
            engine_version: header.engine_version,
            removed_object_id: header.removed_object_id,
            states,
            contacts,
        })
    }
}

#[derive(Serialize)]
struct TickRecordRef<'a> {
    tick: usize,
    states: &'a [BodyState],
    contacts: &'a [ContactRecord],
}

#[derive(Debug, thiserror::Error)]
pub enum TraceIoError {
    #[error("trace file is empty")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed trace record: {0}")]
    Json(#[from] serde_json::Error),
    #[error("tick records out of order: expected {expected}, found {found}")]
    TickOrder { expected: usize, found: usize },
    #[error("header declares {header} ticks, file has {found}")]
    TickCount { header: usize, found: usize },
}

/// Runs a scene for the configured duration.
pub fn simulate(scene: &SceneSpec, config: &SimConfig) -> Result<SimulationTrace, PhysicsError> {
    let ticks = config.tick_count();
    if ticks == 0 {
        return Err(PhysicsError::InvalidArgument("duration shorter than one tick".into()));
    }
    let mut world = World::from_scene(scene, config.world.clone())?;
    let mut states = Vec::with_capacity(ticks);
    let mut contacts = Vec::with_capacity(ticks);
    for tick in 0..ticks {
        states.push(world.snapshot());
        let records = if tick + 1 < ticks { world.step(config.world.dt)? } else { world.probe_contacts() };
        contacts.push(records);
    }
    Ok(SimulationTrace {
        scene_id: scene.scene_id.clone(),
        dt: config.world.dt,
        engine_version: ENGINE_VERSION.to_string(),
        removed_object_id: None,
        states,
        contacts,
    })
}

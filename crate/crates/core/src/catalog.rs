//! Parameterized scene layouts and scene sampling.

use std::collections::BTreeSet;
use std::path::Path;

use causim_physics::scene::{ARENA_SIZE, BORDER};
use causim_physics::{
    Color, DynamicObject, PhysicsError, SceneSpec, ShapeKind, SizeKind, StaticElement, StaticKind, Vec2,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::rng_for;
use crate::seed_key;

pub const BUNDLED_CATALOG: &str = include_str!("../data/catalog.toml");

/// Placement attempts per object before sampling gives up.
pub const PLACEMENT_RETRIES: usize = 200;

/// Closed interval `[min, max]`.
pub type Interval = [f64; 2];

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read catalog {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("catalog does not parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid catalog: {0}")]
    Invalid(String),
    #[error("layout {0} is not in the catalog")]
    UnknownLayout(u32),
    #[error("layout {layout}, seed {seed}: {reason}")]
    Sampling { layout: u32, seed: u64, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpawnMode {
    /// Starts with zero velocity.
    Resting,
    /// Starts moving in the slot's direction.
    Intender,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticSlot {
    pub kind: StaticKind,
    pub x: Interval,
    pub y: Interval,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_length: Option<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<Interval>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnSlot {
    pub mode: SpawnMode,
    pub x: Interval,
    pub y: Interval,
    /// m/s, intenders only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<Interval>,
    /// Heading of the initial velocity in radians, intenders only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Interval>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutTemplate {
    pub id: u32,
    pub name: String,
    pub dynamic_count: [u32; 2],
    #[serde(rename = "static", default)]
    pub statics: Vec<StaticSlot>,
    #[serde(rename = "spawn", default)]
    pub spawns: Vec<SpawnSlot>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catalog {
    pub catalog_version: String,
    #[serde(rename = "layout", default)]
    pub layouts: Vec<LayoutTemplate>,
}

fn check_interval(what: &str, iv: Interval) -> Result<(), String> {
    if !iv[0].is_finite() || !iv[1].is_finite() {
        return Err(format!("`{what}` is not finite"));
    }
    if iv[0] > iv[1] {
        return Err(format!("`{what}` has min {} > max {}", iv[0], iv[1]));
    }
    Ok(())
}

fn within(what: &str, iv: Interval, lo: f64, hi: f64) -> Result<(), String> {
    if iv[0] < lo || iv[1] > hi {
        return Err(format!("`{what}` {:?} leaves [{lo}, {hi}]", iv));
    }
    Ok(())
}

impl StaticSlot {
    fn validate(&self) -> Result<(), String> {
        check_interval("x", self.x)?;
        check_interval("y", self.y)?;
        let optional =
            [("half_length", self.half_length), ("angle", self.angle), ("width", self.width), ("height", self.height)];
        for (name, iv) in optional {
            if let Some(iv) = iv {
                check_interval(name, iv)?;
            }
        }
        let need = |name: &str, iv: Option<Interval>| iv.map(|_| ()).ok_or(format!("{} needs `{name}`", self.kind));
        let forbid = |name: &str, iv: Option<Interval>| match iv {
            Some(_) => Err(format!("{} does not take `{name}`", self.kind)),
            None => Ok(()),
        };
        match self.kind {
            StaticKind::Ramp => {
                need("half_length", self.half_length)?;
                need("angle", self.angle)?;
                forbid("width", self.width)?;
                forbid("height", self.height)
            }
            StaticKind::Platform => {
                need("half_length", self.half_length)?;
                forbid("angle", self.angle)?;
                forbid("width", self.width)?;
                forbid("height", self.height)
            }
            StaticKind::Basket => {
                need("width", self.width)?;
                need("height", self.height)?;
                forbid("half_length", self.half_length)?;
                forbid("angle", self.angle)
            }
            StaticKind::Button => {
                forbid("half_length", self.half_length)?;
                forbid("angle", self.angle)?;
                forbid("width", self.width)?;
                forbid("height", self.height)
            }
            StaticKind::Ground | StaticKind::LeftWall | StaticKind::RightWall => {
                Err(format!("{} is part of every arena and cannot be a slot", self.kind))
            }
        }?;
        let positive = [("half_length", self.half_length), ("width", self.width), ("height", self.height)];
        for (name, iv) in positive {
            if let Some(iv) = iv {
                if iv[0] <= 0.0 {
                    return Err(format!("`{name}` must be positive"));
                }
            }
        }
        Ok(())
    }
}

impl SpawnSlot {
    fn validate(&self) -> Result<(), String> {
        check_interval("x", self.x)?;
        check_interval("y", self.y)?;
        within("x", self.x, BORDER, ARENA_SIZE - BORDER)?;
        within("y", self.y, BORDER, ARENA_SIZE)?;
        match self.mode {
            SpawnMode::Resting => {
                if self.speed.is_some() || self.direction.is_some() {
                    return Err("resting spawn takes no `speed` or `direction`".into());
                }
            }
            SpawnMode::Intender => {
                let speed = self.speed.ok_or("intender spawn needs `speed`")?;
                let direction = self.direction.ok_or("intender spawn needs `direction`")?;
                check_interval("speed", speed)?;
                check_interval("direction", direction)?;
                if speed[0] <= crate::events::MOTION_EPSILON {
                    return Err("intender `speed` must stay above the motion threshold".into());
                }
            }
        }
        Ok(())
    }
}

impl LayoutTemplate {
    pub fn validate(&self) -> Result<(), CatalogError> {
        let fail = |msg: String| CatalogError::Invalid(format!("layout {}: {msg}", self.id));
        let [lo, hi] = self.dynamic_count;
        if lo > hi {
            return Err(fail(format!("`dynamic_count` has min {lo} > max {hi}")));
        }
        let triples = (ShapeKind::ALL.len() * SizeKind::ALL.len() * Color::ALL.len()) as u32;
        if hi > triples {
            return Err(fail(format!("`dynamic_count` exceeds the {triples} distinct objects")));
        }
        if hi > 0 && self.spawns.is_empty() {
            return Err(fail("no spawn slots".into()));
        }
        for (i, s) in self.statics.iter().enumerate() {
            s.validate().map_err(|e| fail(format!("static slot {i} ({}): {e}", s.kind)))?;
        }
        for (i, s) in self.spawns.iter().enumerate() {
            s.validate().map_err(|e| fail(format!("spawn slot {i}: {e}")))?;
        }
        Ok(())
    }

    /// Id of the first dynamic object; statics take 1.. before it.
    pub fn first_dynamic_id(&self) -> u32 {
        SceneSpec::arena_statics().len() as u32 + self.statics.len() as u32 + 1
    }
}

impl Catalog {
    pub fn parse(text: &str) -> Result<Self, CatalogError> {
        let catalog: Catalog = toml::from_str(text)?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn bundled() -> Self {
        Catalog::parse(BUNDLED_CATALOG).expect("bundled catalog is valid")
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        if self.catalog_version.trim().is_empty() {
            return Err(CatalogError::Invalid("missing `catalog_version`".into()));
        }
        if self.layouts.is_empty() {
            return Err(CatalogError::Invalid("no layouts".into()));
        }
        let mut seen = BTreeSet::new();
        for l in &self.layouts {
            if l.id == 0 {
                return Err(CatalogError::Invalid("layout ids start at 1".into()));
            }
            if !seen.insert(l.id) {
                return Err(CatalogError::Invalid(format!("layout id {} appears twice", l.id)));
            }
            l.validate()?;
        }
        Ok(())
    }

    pub fn layout(&self, id: u32) -> Option<&LayoutTemplate> {
        self.layouts.iter().find(|l| l.id == id)
    }

    pub fn layout_ids(&self) -> Vec<u32> {
        self.layouts.iter().map(|l| l.id).collect()
    }

    /// Samples one scene. Deterministic in (catalog version, layout, seed).
    pub fn sample_scene(&self, layout_id: u32, seed: u64) -> Result<SceneSpec, CatalogError> {
        let layout = self.layout(layout_id).ok_or(CatalogError::UnknownLayout(layout_id))?;
        let mut rng = rng_for(&seed_key!["scene", self.catalog_version.as_str(), layout_id, seed]);
        let fail = |reason: String| CatalogError::Sampling { layout: layout_id, seed, reason };

        let mut statics = SceneSpec::arena_statics();
        for (i, slot) in layout.statics.iter().enumerate() {
            let id = statics.len() as u32 + 1;
            statics.push(sample_static(slot, id, &mut rng).map_err(|e| fail(format!("static slot {i}: {e}")))?);
        }

        let count = rng.random_range(layout.dynamic_count[0]..=layout.dynamic_count[1]);
        let mut scene = SceneSpec {
            scene_id: format!("layout{layout_id:02}-{seed:016x}"),
            layout_id,
            statics,
            dynamics: Vec::with_capacity(count as usize),
            rng_seed: seed,
        };
        scene.validate().map_err(|e| fail(format!("static geometry: {e}")))?;

        let mut used = BTreeSet::new();
        for k in 0..count {
            let id = layout.first_dynamic_id() + k;
            let (size, color, shape) = loop {
                let triple = (
                    SizeKind::ALL[rng.random_range(0..SizeKind::ALL.len())],
                    Color::ALL[rng.random_range(0..Color::ALL.len())],
                    ShapeKind::ALL[rng.random_range(0..ShapeKind::ALL.len())],
                );
                if used.insert(triple) {
                    break triple;
                }
            };
            let mut placed = false;
            for _ in 0..PLACEMENT_RETRIES {
                let slot = &layout.spawns[rng.random_range(0..layout.spawns.len())];
                let object = sample_object(slot, id, size, color, shape, &mut rng);
                scene.dynamics.push(object);
                match scene.validate() {
                    Ok(()) => {
                        placed = true;
                        break;
                    }
                    Err(PhysicsError::Overlap { .. }) => {
                        scene.dynamics.pop();
                    }
                    Err(e) => return Err(fail(e.to_string())),
                }
            }
            if !placed {
                return Err(fail(format!("no free spawn position for object {id} after {PLACEMENT_RETRIES} tries")));
            }
        }
        Ok(scene)
    }
}

pub fn catalog_load(path: &Path) -> Result<Catalog, CatalogError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| CatalogError::Io { path: path.display().to_string(), source })?;
    Catalog::parse(&text)
}

fn draw(iv: Interval, rng: &mut ChaCha8Rng) -> f64 {
    if iv[0] == iv[1] {
        iv[0]
    } else {
        rng.random_range(iv[0]..=iv[1])
    }
}

fn sample_static(slot: &StaticSlot, id: u32, rng: &mut ChaCha8Rng) -> Result<StaticElement, String> {
    let x = draw(slot.x, rng);
    let y = draw(slot.y, rng);
    let required = |iv: Option<Interval>, name: &str| iv.ok_or(format!("missing `{name}`"));
    Ok(match slot.kind {
        StaticKind::Ramp => {
            let half = draw(required(slot.half_length, "half_length")?, rng);
            let angle = draw(required(slot.angle, "angle")?, rng);
            StaticElement::ramp(id, Vec2::new(x, y), half, angle)
        }
        StaticKind::Platform => {
            let half = draw(required(slot.half_length, "half_length")?, rng);
            StaticElement::platform(id, Vec2::new(x, y), half)
        }
        StaticKind::Basket => {
            let width = draw(required(slot.width, "width")?, rng);
            let height = draw(required(slot.height, "height")?, rng);
            StaticElement::basket(id, x, y, width, height)
        }
        StaticKind::Button => StaticElement::button(id, Vec2::new(x, y)),
        other => return Err(format!("{other} cannot be sampled")),
    })
}

fn sample_object(
    slot: &SpawnSlot,
    id: u32,
    size: SizeKind,
    color: Color,
    shape: ShapeKind,
    rng: &mut ChaCha8Rng,
) -> DynamicObject {
    let position = Vec2::new(draw(slot.x, rng), draw(slot.y, rng));
    let mut object = DynamicObject::new(id, shape, size, color, position);
    if slot.mode == SpawnMode::Intender {
        let speed = draw(slot.speed.expect("validated"), rng);
        let heading = draw(slot.direction.expect("validated"), rng);
        object.linear_velocity = Vec2::new(speed * heading.cos(), speed * heading.sin());
    }
    object
}

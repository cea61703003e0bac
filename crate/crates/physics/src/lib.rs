//! Deterministic 2D rigid-body simulation for circles and convex polygons.
//!
//! One simulation is single-threaded and bit-reproducible for a given scene
//! and [`ENGINE_VERSION`]. Distinct scenes can be simulated concurrently.

pub mod collide;
mod error;
pub mod math;
pub mod render;
pub mod scene;
pub mod shape;
pub mod trace;
pub mod world;

pub use error::PhysicsError;
pub use math::{Aabb, Vec2};
pub use scene::{Color, DynamicObject, SceneSpec, ShapeKind, SizeKind, StaticElement, StaticKind};
pub use trace::{simulate, SimConfig, SimulationTrace, TraceHeader};
pub use world::{BodyState, ContactRecord, World, WorldConfig};

/// Bumped whenever a change can alter trajectories.
pub const ENGINE_VERSION: &str = "causim-physics/2";

/// Allowed penetration; the position solver settles contacts at this depth.
pub const LINEAR_SLOP: f64 = 0.005;

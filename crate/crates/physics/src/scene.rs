//! Scene description: the static arena elements and dynamic objects that make
//! up one initial world.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::collide::min_separation;
use crate::error::PhysicsError;
use crate::math::{Aabb, Transform, Vec2};
use crate::shape::{Polygon, Shape};

/// Width and height of the square arena, meters.
pub const ARENA_SIZE: f64 = 10.0;
/// Thickness of the ground slab and walls that lies inside the arena.
pub const BORDER: f64 = 0.25;
pub const DENSITY: f64 = 1.0;
pub const DEFAULT_RESTITUTION: f64 = 0.2;
pub const DEFAULT_FRICTION: f64 = 0.4;
pub const STATIC_FRICTION: f64 = 0.4;
/// Initial interpenetration tolerated when validating a scene.
pub const OVERLAP_TOLERANCE: f64 = 2.0 * crate::LINEAR_SLOP;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Cube,
    Triangle,
    Circle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeKind {
    Small,
    Large,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Gray,
    Red,
    Blue,
    Green,
    Brown,
    Purple,
    Cyan,
    Yellow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticKind {
    Ramp,
    Platform,
    Button,
    Basket,
    LeftWall,
    RightWall,
    Ground,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 3] = [ShapeKind::Cube, ShapeKind::Triangle, ShapeKind::Circle];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Cube => "cube",
            ShapeKind::Triangle => "triangle",
            ShapeKind::Circle => "circle",
        }
    }
}

impl SizeKind {
    pub const ALL: [SizeKind; 2] = [SizeKind::Small, SizeKind::Large];

    pub fn name(self) -> &'static str {
        match self {
            SizeKind::Small => "small",
            SizeKind::Large => "large",
        }
    }

    /// Radius for circles, half-width for cubes, circumradius for triangles.
    pub fn extent(self) -> f64 {
        match self {
            SizeKind::Small => 0.35,
            SizeKind::Large => 0.7,
        }
    }
}

impl Color {
    pub const ALL: [Color; 8] =
        [Color::Gray, Color::Red, Color::Blue, Color::Green, Color::Brown, Color::Purple, Color::Cyan, Color::Yellow];

    pub fn name(self) -> &'static str {
        match self {
            Color::Gray => "gray",
            Color::Red => "red",
            Color::Blue => "blue",
            Color::Green => "green",
            Color::Brown => "brown",
            Color::Purple => "purple",
            Color::Cyan => "cyan",
            Color::Yellow => "yellow",
        }
    }

    pub fn rgb(self) -> [u8; 3] {
        match self {
            Color::Gray => [128, 128, 128],
            Color::Red => [220, 40, 40],
            Color::Blue => [40, 70, 220],
            Color::Green => [40, 170, 60],
            Color::Brown => [140, 90, 40],
            Color::Purple => [130, 50, 170],
            Color::Cyan => [40, 200, 210],
            Color::Yellow => [240, 210, 40],
        }
    }
}

impl StaticKind {
    pub const ALL: [StaticKind; 7] = [
        StaticKind::Ramp,
        StaticKind::Platform,
        StaticKind::Button,
        StaticKind::Basket,
        StaticKind::LeftWall,
        StaticKind::RightWall,
        StaticKind::Ground,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StaticKind::Ramp => "ramp",
            StaticKind::Platform => "platform",
            StaticKind::Button => "button",
            StaticKind::Basket => "basket",
            StaticKind::LeftWall => "left wall",
            StaticKind::RightWall => "right wall",
            StaticKind::Ground => "ground",
        }
    }
}

macro_rules! display_by_name {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    )*};
}
display_by_name!(ShapeKind, SizeKind, Color, StaticKind);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicObject {
    pub id: u32,
    pub shape: ShapeKind,
    pub size: SizeKind,
    pub color: Color,
    pub position: Vec2,
    pub angle: f64,
    pub linear_velocity: Vec2,
    pub angular_velocity: f64,
    pub mass: f64,
    pub restitution: f64,
    pub friction: f64,
}

impl DynamicObject {
    /// Object at rest with default material and mass from uniform density.
    pub fn new(id: u32, shape: ShapeKind, size: SizeKind, color: Color, position: Vec2) -> Self {
        let mass = collision_shape(shape, size).mass_data(DENSITY).mass;
        DynamicObject {
            id,
            shape,
            size,
            color,
            position,
            angle: 0.0,
            linear_velocity: Vec2::ZERO,
            angular_velocity: 0.0,
            mass,
            restitution: DEFAULT_RESTITUTION,
            friction: DEFAULT_FRICTION,
        }
    }

    pub fn with_velocity(mut self, v: Vec2) -> Self {
        self.linear_velocity = v;
        self
    }

    pub fn with_angle(mut self, angle: f64) -> Self {
        self.angle = angle;
        self
    }

    pub fn collision_shape(&self) -> Shape {
        collision_shape(self.shape, self.size)
    }

    pub fn transform(&self) -> Transform {
        Transform::new(self.position, self.angle)
    }

    /// The (size, color, shape) triple used to refer to this object in text.
    pub fn attributes(&self) -> (SizeKind, Color, ShapeKind) {
        (self.size, self.color, self.shape)
    }
}

pub fn collision_shape(shape: ShapeKind, size: SizeKind) -> Shape {
    let e = size.extent();
    match shape {
        ShapeKind::Circle => Shape::Circle { radius: e },
        ShapeKind::Cube => Shape::Polygon(Polygon::new_box(e, e)),
        ShapeKind::Triangle => Shape::Polygon(Polygon::new_triangle(e)),
    }
}

/// Height of the resting center above a flat surface at `surface_y`, for an
/// unrotated object, matching the solver's equilibrium penetration.
pub fn resting_height(shape: ShapeKind, size: SizeKind, surface_y: f64) -> f64 {
    let e = size.extent();
    let skin = crate::shape::POLYGON_RADIUS;
    let bottom = match shape {
        ShapeKind::Circle => e,
        ShapeKind::Cube => e + skin,
        // Base lies at -R/2 below the centroid.
        ShapeKind::Triangle => 0.5 * e + skin,
    };
    surface_y + bottom + skin - crate::LINEAR_SLOP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticElement {
    pub id: u32,
    pub kind: StaticKind,
    /// Convex pieces in world coordinates.
    pub polygons: Vec<Vec<Vec2>>,
    pub position: Vec2,
    pub angle: f64,
    /// Interior of a basket; `None` for every other kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Aabb>,
}

fn rect(center: Vec2, half_len: f64, half_thick: f64, angle: f64) -> Vec<Vec2> {
    let xf = Transform::new(center, angle);
    [(-half_len, -half_thick), (half_len, -half_thick), (half_len, half_thick), (-half_len, half_thick)]
        .iter()
        .map(|&(x, y)| xf.apply(Vec2::new(x, y)))
        .collect()
}

fn aabb_rect(min: Vec2, max: Vec2) -> Vec<Vec2> {
    vec![min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)]
}

pub const RAMP_HALF_THICKNESS: f64 = 0.08;
pub const PLATFORM_HALF_THICKNESS: f64 = 0.1;
pub const BASKET_WALL: f64 = 0.1;

impl StaticElement {
    fn simple(id: u32, kind: StaticKind, polygon: Vec<Vec2>, position: Vec2, angle: f64) -> Self {
        StaticElement { id, kind, polygons: vec![polygon], position, angle, region: None }
    }

    pub fn ground(id: u32) -> Self {
        let min = Vec2::new(-1.0, -1.0);
        let max = Vec2::new(ARENA_SIZE + 1.0, BORDER);
        Self::simple(id, StaticKind::Ground, aabb_rect(min, max), Vec2::new(ARENA_SIZE / 2.0, BORDER), 0.0)
    }

    pub fn left_wall(id: u32) -> Self {
        let min = Vec2::new(-1.0, BORDER);
        let max = Vec2::new(BORDER, 2.0 * ARENA_SIZE);
        Self::simple(id, StaticKind::LeftWall, aabb_rect(min, max), Vec2::new(BORDER, ARENA_SIZE / 2.0), 0.0)
    }

    pub fn right_wall(id: u32) -> Self {
        let min = Vec2::new(ARENA_SIZE - BORDER, BORDER);
        let max = Vec2::new(ARENA_SIZE + 1.0, 2.0 * ARENA_SIZE);
        let pos = Vec2::new(ARENA_SIZE - BORDER, ARENA_SIZE / 2.0);
        Self::simple(id, StaticKind::RightWall, aabb_rect(min, max), pos, 0.0)
    }

    pub fn platform(id: u32, center: Vec2, half_length: f64) -> Self {
        let poly = rect(center, half_length, PLATFORM_HALF_THICKNESS, 0.0);
        Self::simple(id, StaticKind::Platform, poly, center, 0.0)
    }

    pub fn ramp(id: u32, center: Vec2, half_length: f64, angle: f64) -> Self {
        let poly = rect(center, half_length, RAMP_HALF_THICKNESS, angle);
        Self::simple(id, StaticKind::Ramp, poly, center, angle)
    }

    /// Triangular wedge ramp with its apex at `apex` and the given half base.
    pub fn wedge(id: u32, apex: Vec2, half_base: f64, height: f64) -> Self {
        let poly =
            vec![Vec2::new(apex.x - half_base, apex.y - height), Vec2::new(apex.x + half_base, apex.y - height), apex];
        Self::simple(id, StaticKind::Ramp, poly, apex, 0.0)
    }

    pub fn button(id: u32, center: Vec2) -> Self {
        let poly = rect(center, 0.2, 0.06, 0.0);
        Self::simple(id, StaticKind::Button, poly, center, 0.0)
    }

    /// Open-topped container. `bottom_y` is the underside of its floor and
    /// `inner_width` the clear span between its side walls.
    pub fn basket(id: u32, center_x: f64, bottom_y: f64, inner_width: f64, height: f64) -> Self {
        let t = BASKET_WALL;
        let hw = inner_width / 2.0;
        let floor = aabb_rect(Vec2::new(center_x - hw - t, bottom_y), Vec2::new(center_x + hw + t, bottom_y + t));
        let left = aabb_rect(Vec2::new(center_x - hw - t, bottom_y + t), Vec2::new(center_x - hw, bottom_y + height));
        let right = aabb_rect(Vec2::new(center_x + hw, bottom_y + t), Vec2::new(center_x + hw + t, bottom_y + height));
        StaticElement {
            id,
            kind: StaticKind::Basket,
            polygons: vec![floor, left, right],
            position: Vec2::new(center_x, bottom_y),
            angle: 0.0,
            region: Some(Aabb {
                min: Vec2::new(center_x - hw, bottom_y + t),
                max: Vec2::new(center_x + hw, bottom_y + height),
            }),
        }
    }

    pub fn shapes(&self) -> Result<Vec<Shape>, PhysicsError> {
        self.polygons
            .iter()
            .map(|p| Polygon::new(p).map(Shape::Polygon).map_err(|e| PhysicsError::Shape { id: self.id, source: e }))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub scene_id: String,
    pub layout_id: u32,
    pub statics: Vec<StaticElement>,
    pub dynamics: Vec<DynamicObject>,
    pub rng_seed: u64,
}

impl SceneSpec {
    /// Arena boundary shared by every scene: ground and both walls, ids 1–3.
    pub fn arena_statics() -> Vec<StaticElement> {
        vec![StaticElement::ground(1), StaticElement::left_wall(2), StaticElement::right_wall(3)]
    }

    pub fn dynamic(&self, id: u32) -> Option<&DynamicObject> {
        self.dynamics.iter().find(|d| d.id == id)
    }

    pub fn static_element(&self, id: u32) -> Option<&StaticElement> {
        self.statics.iter().find(|s| s.id == id)
    }

    /// Copy of the scene with one dynamic object removed; remaining ids keep
    /// their values.
    pub fn without_object(&self, id: u32) -> Option<SceneSpec> {
        self.dynamic(id)?;
        let mut s = self.clone();
        s.dynamics.retain(|d| d.id != id);
        Some(s)
    }

    /// Checks ids, materials, geometry and initial overlap.
    pub fn validate(&self) -> Result<(), PhysicsError> {
        self.validate_structure()?;
        self.check_overlaps()
    }

    /// Checks ids, materials and geometry, tolerating interpenetration.
    pub fn validate_structure(&self) -> Result<(), PhysicsError> {
        let mut ids: Vec<u32> = self.statics.iter().map(|s| s.id).chain(self.dynamics.iter().map(|d| d.id)).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(PhysicsError::DuplicateId(w[0]));
        }
        for d in &self.dynamics {
            let finite = d.position.is_finite()
                && d.linear_velocity.is_finite()
                && d.angle.is_finite()
                && d.angular_velocity.is_finite();
            if !finite {
                return Err(PhysicsError::InvalidScene(format!("object {} has non-finite state", d.id)));
            }
            if !(d.mass > 0.0) || !(0.0..=1.0).contains(&d.restitution) || !(d.friction >= 0.0) {
                return Err(PhysicsError::InvalidScene(format!("object {} has invalid material", d.id)));
            }
            let inside = d.position.x > 0.0 && d.position.x < ARENA_SIZE && d.position.y > 0.0;
            if !inside {
                return Err(PhysicsError::InvalidScene(format!("object {} starts outside the arena", d.id)));
            }
        }
        for s in &self.statics {
            s.shapes()?;
        }
        Ok(())
    }

    fn check_overlaps(&self) -> Result<(), PhysicsError> {
        let mut static_shapes = Vec::new();
        for s in &self.statics {
            for shape in s.shapes()? {
                static_shapes.push((s.id, shape));
            }
        }
        let dyn_shapes: Vec<(u32, Shape, Transform)> =
            self.dynamics.iter().map(|d| (d.id, d.collision_shape(), d.transform())).collect();
        for (i, (ida, sa, xa)) in dyn_shapes.iter().enumerate() {
            for (idb, sb) in &static_shapes {
                check_overlap(*ida, sa, xa, *idb, sb, &Transform::IDENTITY)?;
            }
            for (idb, sb, xb) in &dyn_shapes[i + 1..] {
                check_overlap(*ida, sa, xa, *idb, sb, xb)?;
            }
        }
        Ok(())
    }
}

fn check_overlap(
    ida: u32,
    sa: &Shape,
    xa: &Transform,
    idb: u32,
    sb: &Shape,
    xb: &Transform,
) -> Result<(), PhysicsError> {
    match min_separation(sa, xa, sb, xb) {
        Some(sep) if sep < -OVERLAP_TOLERANCE => Err(PhysicsError::Overlap { a: ida, b: idb, separation: sep }),
        _ => Ok(()),
    }
}

//! Collision shapes and their mass properties.

use crate::math::{Aabb, Transform, Vec2};

/// Collision skin around polygons. Contacts are generated once skins overlap.
pub const POLYGON_RADIUS: f64 = 2.0 * crate::LINEAR_SLOP;

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Circle { radius: f64 },
    Polygon(Polygon),
}

/// Convex polygon in body-local coordinates, counter-clockwise.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<Vec2>,
    pub normals: Vec<Vec2>,
    pub centroid: Vec2,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassData {
    pub mass: f64,
    pub center: Vec2,
    /// Rotational inertia about the center of mass.
    pub inertia: f64,
}

#[derive(Clone, Debug, thiserror::Error, PartialEq)]
pub enum ShapeError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon is degenerate or not convex")]
    NotConvex,
}

impl Polygon {
    /// Builds a polygon from convex points in any winding order.
    pub fn new(points: &[Vec2]) -> Result<Self, ShapeError> {
        if points.len() < 3 {
            return Err(ShapeError::TooFewVertices(points.len()));
        }
        let mut vertices = points.to_vec();
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        let mut normals = Vec::with_capacity(n);
        for i in 0..n {
            let e = vertices[(i + 1) % n] - vertices[i];
            if e.length_squared() < 1e-12 {
                return Err(ShapeError::NotConvex);
            }
            normals.push(Vec2::new(e.y, -e.x).normalize());
        }
        for i in 0..n {
            let a = vertices[(i + 1) % n] - vertices[i];
            let b = vertices[(i + 2) % n] - vertices[(i + 1) % n];
            if a.cross(b) <= 0.0 {
                return Err(ShapeError::NotConvex);
            }
        }
        let centroid = polygon_centroid(&vertices);
        Ok(Polygon { vertices, normals, centroid, radius: POLYGON_RADIUS })
    }

    pub fn new_box(half_width: f64, half_height: f64) -> Self {
        Polygon::new(&[
            Vec2::new(-half_width, -half_height),
            Vec2::new(half_width, -half_height),
            Vec2::new(half_width, half_height),
            Vec2::new(-half_width, half_height),
        ])
        .expect("box is convex")
    }

    /// Equilateral triangle with the given circumradius, apex up, centroid at origin.
    pub fn new_triangle(circumradius: f64) -> Self {
        let pts: Vec<Vec2> = [90.0f64, 210.0, 330.0]
            .iter()
            .map(|deg| {
                let a = deg.to_radians();
                Vec2::new(circumradius * a.cos(), circumradius * a.sin())
            })
            .collect();
        Polygon::new(&pts).expect("triangle is convex")
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }
}

fn signed_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>() * 0.5
}

fn polygon_centroid(v: &[Vec2]) -> Vec2 {
    let origin = v[0];
    let mut c = Vec2::ZERO;
    let mut area = 0.0;
    for i in 1..v.len() - 1 {
        let e1 = v[i] - origin;
        let e2 = v[i + 1] - origin;
        let a = 0.5 * e1.cross(e2);
        c += a * (e1 + e2) * (1.0 / 3.0);
        area += a;
    }
    origin + c * (1.0 / area)
}

impl Shape {
    pub fn mass_data(&self, density: f64) -> MassData {
        match self {
            Shape::Circle { radius } => {
                let mass = density * std::f64::consts::PI * radius * radius;
                MassData { mass, center: Vec2::ZERO, inertia: 0.5 * mass * radius * radius }
            }
            Shape::Polygon(p) => {
                // Triangle fan about the first vertex; inertia shifted to the centroid.
                let origin = p.vertices[0];
                let mut area = 0.0;
                let mut center = Vec2::ZERO;
                let mut inertia = 0.0;
                for i in 1..p.vertices.len() - 1 {
                    let e1 = p.vertices[i] - origin;
                    let e2 = p.vertices[i + 1] - origin;
                    let d = e1.cross(e2);
                    let tri = 0.5 * d;
                    area += tri;
                    center += tri * (1.0 / 3.0) * (e1 + e2);
                    let intx2 = e1.x * e1.x + e2.x * e1.x + e2.x * e2.x;
                    let inty2 = e1.y * e1.y + e2.y * e1.y + e2.y * e2.y;
                    inertia += (0.25 / 3.0) * d * (intx2 + inty2);
                }
                let mass = density * area;
                let local_center = center * (1.0 / area);
                let c = origin + local_center;
                let i_origin = density * inertia;
                let inertia = i_origin - mass * local_center.dot(local_center);
                MassData { mass, center: c, inertia }
            }
        }
    }

    pub fn aabb(&self, xf: &Transform) -> Aabb {
        match self {
            Shape::Circle { radius } => {
                let p = xf.p;
                Aabb { min: p - Vec2::new(*radius, *radius), max: p + Vec2::new(*radius, *radius) }
            }
            Shape::Polygon(poly) => {
                let pts: Vec<Vec2> = poly.vertices.iter().map(|v| xf.apply(*v)).collect();
                Aabb::from_points(&pts).inflate(poly.radius)
            }
        }
    }

    pub fn world_vertices(&self, xf: &Transform) -> Vec<Vec2> {
        match self {
            Shape::Circle { .. } => vec![xf.p],
            Shape::Polygon(p) => p.vertices.iter().map(|v| xf.apply(*v)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_mass_matches_closed_form() {
        let md = Shape::Polygon(Polygon::new_box(0.5, 0.25)).mass_data(2.0);
        let (w, h) = (1.0, 0.5);
        let m = 2.0 * w * h;
        assert!((md.mass - m).abs() < 1e-12);
        assert!((md.inertia - m * (w * w + h * h) / 12.0).abs() < 1e-12);
        assert!(md.center.length() < 1e-12);
    }

    #[test]
    fn triangle_centroid_is_origin() {
        let t = Polygon::new_triangle(0.7);
        assert!(t.centroid.length() < 1e-12);
        let md = Shape::Polygon(t).mass_data(1.0);
        // Equilateral triangle with circumradius R: side = R√3, area = (3√3/4) R².
        let r: f64 = 0.7;
        assert!((md.mass - 3.0 * 3f64.sqrt() / 4.0 * r * r).abs() < 1e-12);
        // I = m s² / 12 for an equilateral triangle about its centroid.
        let s2 = 3.0 * r * r;
        assert!((md.inertia - md.mass * s2 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn clockwise_input_is_reordered() {
        let p = Polygon::new(&[Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)]).unwrap();
        assert!(p.area() > 0.0);
    }

    #[test]
    fn rejects_non_convex() {
        let pts =
            [Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(1.0, 0.2), Vec2::new(2.0, 2.0), Vec2::new(0.0, 2.0)];
        assert_eq!(Polygon::new(&pts), Err(ShapeError::NotConvex));
        assert_eq!(Polygon::new(&pts[..2]), Err(ShapeError::TooFewVertices(2)));
    }
}

//! Narrowphase contact generation: circle–circle, polygon–circle and
//! polygon–polygon (separating axes with reference/incident edge clipping).
//!
//! Manifolds are stored in body-local coordinates so the position solver can
//! re-evaluate separation after bodies move within a step.

use crate::math::{Transform, Vec2};
use crate::shape::{Polygon, Shape};
use crate::LINEAR_SLOP;

pub const MAX_MANIFOLD_POINTS: usize = 2;

/// Blend factor applied to the contact normal for vertex-on-vertex contacts.
pub const DEGENERATE_NORMAL_BLEND: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ManifoldKind {
    Circles,
    FaceA,
    FaceB,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ManifoldPoint {
    /// Usage depends on the manifold kind (see `WorldManifold::new`).
    pub local_point: Vec2,
    pub id: u32,
    pub normal_impulse: f64,
    pub tangent_impulse: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifold {
    pub kind: ManifoldKind,
    pub local_normal: Vec2,
    pub local_point: Vec2,
    pub points: Vec<ManifoldPoint>,
}

impl Manifold {
    fn empty() -> Self {
        Manifold { kind: ManifoldKind::Circles, local_normal: Vec2::ZERO, local_point: Vec2::ZERO, points: Vec::new() }
    }

    pub fn is_touching(&self) -> bool {
        !self.points.is_empty()
    }
}

/// Contact feature key: which vertex/face of each shape produced a point.
fn feature_id(index_a: usize, index_b: usize, type_a: u8, type_b: u8) -> u32 {
    (index_a as u32 & 0xff) | ((index_b as u32 & 0xff) << 8) | ((type_a as u32) << 16) | ((type_b as u32) << 24)
}

fn flip_id(id: u32) -> u32 {
    let ia = id & 0xff;
    let ib = (id >> 8) & 0xff;
    let ta = (id >> 16) & 0xff;
    let tb = (id >> 24) & 0xff;
    ib | (ia << 8) | (tb << 16) | (ta << 24)
}

const VERTEX: u8 = 0;
const FACE: u8 = 1;

pub fn shape_radius(shape: &Shape) -> f64 {
    match shape {
        Shape::Circle { radius } => *radius,
        Shape::Polygon(p) => p.radius,
    }
}

/// Computes the manifold for a shape pair. Polygon–circle pairs must pass the
/// polygon as `a`; callers canonicalize ordering.
pub fn collide(a: &Shape, xf_a: &Transform, b: &Shape, xf_b: &Transform) -> Manifold {
    match (a, b) {
        (Shape::Circle { radius: ra }, Shape::Circle { radius: rb }) => collide_circles(*ra, xf_a, *rb, xf_b),
        (Shape::Polygon(pa), Shape::Circle { radius }) => collide_polygon_circle(pa, xf_a, *radius, xf_b),
        (Shape::Polygon(pa), Shape::Polygon(pb)) => collide_polygons(pa, xf_a, pb, xf_b),
        (Shape::Circle { .. }, Shape::Polygon(_)) => {
            panic!("circle–polygon pairs must be ordered polygon first")
        }
    }
}

fn collide_circles(ra: f64, xf_a: &Transform, rb: f64, xf_b: &Transform) -> Manifold {
    let pa = xf_a.p;
    let pb = xf_b.p;
    let r = ra + rb;
    if (pb - pa).length_squared() > r * r {
        return Manifold::empty();
    }
    Manifold {
        kind: ManifoldKind::Circles,
        local_normal: Vec2::ZERO,
        local_point: Vec2::ZERO,
        points: vec![ManifoldPoint { local_point: Vec2::ZERO, id: 0, ..Default::default() }],
    }
}

fn collide_polygon_circle(poly: &Polygon, xf_a: &Transform, rb: f64, xf_b: &Transform) -> Manifold {
    let c_local = xf_a.apply_inv(xf_b.p);
    let radius = poly.radius + rb;
    let n = poly.vertices.len();

    let mut normal_index = 0;
    let mut separation = f64::NEG_INFINITY;
    for i in 0..n {
        let s = poly.normals[i].dot(c_local - poly.vertices[i]);
        if s > radius {
            return Manifold::empty();
        }
        if s > separation {
            separation = s;
            normal_index = i;
        }
    }

    let v1 = poly.vertices[normal_index];
    let v2 = poly.vertices[(normal_index + 1) % n];
    let point = ManifoldPoint { local_point: Vec2::ZERO, id: 0, ..Default::default() };

    if separation < f64::EPSILON {
        // Circle center inside the polygon core.
        return Manifold {
            kind: ManifoldKind::FaceA,
            local_normal: poly.normals[normal_index],
            local_point: (v1 + v2) * 0.5,
            points: vec![point],
        };
    }

    let u1 = (c_local - v1).dot(v2 - v1);
    let u2 = (c_local - v2).dot(v1 - v2);
    let (local_normal, local_point) = if u1 <= 0.0 {
        if (c_local - v1).length_squared() > radius * radius {
            return Manifold::empty();
        }
        ((c_local - v1).normalize(), v1)
    } else if u2 <= 0.0 {
        if (c_local - v2).length_squared() > radius * radius {
            return Manifold::empty();
        }
        ((c_local - v2).normalize(), v2)
    } else {
        let face_center = (v1 + v2) * 0.5;
        let s = (c_local - face_center).dot(poly.normals[normal_index]);
        if s > radius {
            return Manifold::empty();
        }
        (poly.normals[normal_index], face_center)
    };
    if local_normal == Vec2::ZERO {
        return Manifold::empty();
    }
    Manifold { kind: ManifoldKind::FaceA, local_normal, local_point, points: vec![point] }
}

/// Largest separation of `p2` along the face normals of `p1`.
fn find_max_separation(p1: &Polygon, xf1: &Transform, p2: &Polygon, xf2: &Transform) -> (usize, f64) {
    let mut best_index = 0;
    let mut max_sep = f64::NEG_INFINITY;
    for (i, (n1, v1)) in p1.normals.iter().zip(&p1.vertices).enumerate() {
        // Work in the frame of p2.
        let n = xf2.q.apply_inv(xf1.q.apply(*n1));
        let v = xf2.apply_inv(xf1.apply(*v1));
        let si = p2.vertices.iter().map(|v2| n.dot(*v2 - v)).fold(f64::INFINITY, f64::min);
        if si > max_sep {
            max_sep = si;
            best_index = i;
        }
    }
    (best_index, max_sep)
}

#[derive(Clone, Copy, Debug)]
struct ClipVertex {
    v: Vec2,
    id: u32,
}

fn find_incident_edge(p1: &Polygon, xf1: &Transform, edge1: usize, p2: &Polygon, xf2: &Transform) -> [ClipVertex; 2] {
    let normal1 = xf2.q.apply_inv(xf1.q.apply(p1.normals[edge1]));
    let mut index = 0;
    let mut min_dot = f64::INFINITY;
    for (i, n2) in p2.normals.iter().enumerate() {
        let d = normal1.dot(*n2);
        if d < min_dot {
            min_dot = d;
            index = i;
        }
    }
    let i1 = index;
    let i2 = (index + 1) % p2.vertices.len();
    [
        ClipVertex { v: xf2.apply(p2.vertices[i1]), id: feature_id(edge1, i1, FACE, VERTEX) },
        ClipVertex { v: xf2.apply(p2.vertices[i2]), id: feature_id(edge1, i2, FACE, VERTEX) },
    ]
}

fn clip_segment_to_line(input: &[ClipVertex; 2], normal: Vec2, offset: f64, vertex_index_a: usize) -> Vec<ClipVertex> {
    let mut out = Vec::with_capacity(2);
    let d0 = normal.dot(input[0].v) - offset;
    let d1 = normal.dot(input[1].v) - offset;
    if d0 <= 0.0 {
        out.push(input[0]);
    }
    if d1 <= 0.0 {
        out.push(input[1]);
    }
    if d0 * d1 < 0.0 {
        let t = d0 / (d0 - d1);
        let v = input[0].v + t * (input[1].v - input[0].v);
        let index_b = ((input[0].id >> 8) & 0xff) as usize;
        out.push(ClipVertex { v, id: feature_id(vertex_index_a, index_b, VERTEX, FACE) });
    }
    out
}

fn collide_polygons(pa: &Polygon, xf_a: &Transform, pb: &Polygon, xf_b: &Transform) -> Manifold {
    let total_radius = pa.radius + pb.radius;
    let (edge_a, sep_a) = find_max_separation(pa, xf_a, pb, xf_b);
    if sep_a > total_radius {
        return Manifold::empty();
    }
    let (edge_b, sep_b) = find_max_separation(pb, xf_b, pa, xf_a);
    if sep_b > total_radius {
        return Manifold::empty();
    }

    let tol = 0.1 * LINEAR_SLOP;
    let (p1, p2, xf1, xf2, edge1, kind, flip) = if sep_b > sep_a + tol {
        (pb, pa, xf_b, xf_a, edge_b, ManifoldKind::FaceB, true)
    } else {
        (pa, pb, xf_a, xf_b, edge_a, ManifoldKind::FaceA, false)
    };
    let ambiguous_axis = (sep_a - sep_b).abs() <= tol;

    let incident = find_incident_edge(p1, xf1, edge1, p2, xf2);
    let n1 = p1.vertices.len();
    let iv1 = edge1;
    let iv2 = (edge1 + 1) % n1;
    let lv11 = p1.vertices[iv1];
    let lv12 = p1.vertices[iv2];

    let local_tangent = (lv12 - lv11).normalize();
    let mut local_normal = Vec2::new(local_tangent.y, -local_tangent.x);
    let plane_point = (lv11 + lv12) * 0.5;

    let tangent = xf1.q.apply(local_tangent);
    let normal = Vec2::new(tangent.y, -tangent.x);
    let v11 = xf1.apply(lv11);
    let v12 = xf1.apply(lv12);

    let front_offset = normal.dot(v11);
    let side_offset1 = -tangent.dot(v11) + total_radius;
    let side_offset2 = tangent.dot(v12) + total_radius;

    let clip1 = clip_segment_to_line(&incident, -tangent, side_offset1, iv1);
    if clip1.len() < 2 {
        return Manifold::empty();
    }
    let clip2 = clip_segment_to_line(&[clip1[0], clip1[1]], tangent, side_offset2, iv2);
    if clip2.len() < 2 {
        return Manifold::empty();
    }

    let mut points = Vec::with_capacity(MAX_MANIFOLD_POINTS);
    for cv in clip2.iter().take(2) {
        let separation = normal.dot(cv.v) - front_offset;
        if separation <= total_radius {
            let id = if flip { flip_id(cv.id) } else { cv.id };
            points.push(ManifoldPoint { local_point: xf2.apply_inv(cv.v), id, ..Default::default() });
        }
    }

    // Vertex-on-vertex: every point sits at one end of the reference edge
    // with no preferred separating axis. Tilt the normal toward the line
    // joining the centroids so the response is well defined.
    if ambiguous_axis && !points.is_empty() {
        let edge_len = (lv12 - lv11).length();
        let ts: Vec<f64> =
            points.iter().map(|pt| (xf1.apply_inv(xf2.apply(pt.local_point)) - lv11).dot(local_tangent)).collect();
        let near_start = ts.iter().all(|&t| t <= 2.0 * total_radius);
        let near_end = ts.iter().all(|&t| t >= edge_len - 2.0 * total_radius);
        if near_start || near_end {
            let c2_in_1 = xf1.apply_inv(xf2.apply(p2.centroid));
            let axis = (c2_in_1 - p1.centroid).normalize();
            let blended = (local_normal * (1.0 - DEGENERATE_NORMAL_BLEND) + axis * DEGENERATE_NORMAL_BLEND).normalize();
            if blended.dot(local_normal) > 0.0 {
                local_normal = blended;
            }
        }
    }

    Manifold { kind, local_normal, local_point: plane_point, points }
}

/// Manifold expressed in world coordinates, with normal pointing from A to B.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldManifold {
    pub normal: Vec2,
    pub points: Vec<Vec2>,
    pub separations: Vec<f64>,
}

impl WorldManifold {
    pub fn new(m: &Manifold, xf_a: &Transform, ra: f64, xf_b: &Transform, rb: f64) -> Self {
        let mut points = Vec::with_capacity(m.points.len());
        let mut separations = Vec::with_capacity(m.points.len());
        let normal = match m.kind {
            ManifoldKind::Circles => {
                let pa = xf_a.apply(m.local_point);
                let pb = xf_b.apply(m.points[0].local_point);
                let mut normal = Vec2::new(1.0, 0.0);
                if (pb - pa).length_squared() > f64::EPSILON * f64::EPSILON {
                    normal = (pb - pa).normalize();
                }
                let ca = pa + ra * normal;
                let cb = pb - rb * normal;
                points.push((ca + cb) * 0.5);
                separations.push((cb - ca).dot(normal));
                normal
            }
            ManifoldKind::FaceA => {
                let normal = xf_a.q.apply(m.local_normal);
                let plane = xf_a.apply(m.local_point);
                for mp in &m.points {
                    let clip = xf_b.apply(mp.local_point);
                    let ca = clip + (ra - (clip - plane).dot(normal)) * normal;
                    let cb = clip - rb * normal;
                    points.push((ca + cb) * 0.5);
                    separations.push((cb - ca).dot(normal));
                }
                normal
            }
            ManifoldKind::FaceB => {
                let normal = xf_b.q.apply(m.local_normal);
                let plane = xf_b.apply(m.local_point);
                for mp in &m.points {
                    let clip = xf_a.apply(mp.local_point);
                    let cb = clip + (rb - (clip - plane).dot(normal)) * normal;
                    let ca = clip - ra * normal;
                    points.push((ca + cb) * 0.5);
                    separations.push((ca - cb).dot(normal));
                }
                -normal
            }
        };
        WorldManifold { normal, points, separations }
    }
}

/// Separation of one manifold point at the current transforms, as used by the
/// position solver. Returns `(normal A→B, point, separation)`.
pub fn position_manifold(
    m: &Manifold,
    index: usize,
    xf_a: &Transform,
    ra: f64,
    xf_b: &Transform,
    rb: f64,
) -> (Vec2, Vec2, f64) {
    match m.kind {
        ManifoldKind::Circles => {
            let pa = xf_a.apply(m.local_point);
            let pb = xf_b.apply(m.points[0].local_point);
            let normal = (pb - pa).normalize();
            let normal = if normal == Vec2::ZERO { Vec2::new(1.0, 0.0) } else { normal };
            ((normal), (pa + pb) * 0.5, (pb - pa).dot(normal) - ra - rb)
        }
        ManifoldKind::FaceA => {
            let normal = xf_a.q.apply(m.local_normal);
            let plane = xf_a.apply(m.local_point);
            let clip = xf_b.apply(m.points[index].local_point);
            (normal, clip, (clip - plane).dot(normal) - ra - rb)
        }
        ManifoldKind::FaceB => {
            let normal = xf_b.q.apply(m.local_normal);
            let plane = xf_b.apply(m.local_point);
            let clip = xf_a.apply(m.points[index].local_point);
            (-normal, clip, (clip - plane).dot(normal) - ra - rb)
        }
    }
}

/// Minimum separation between two shapes if their skins overlap, else `None`.
pub fn min_separation(a: &Shape, xf_a: &Transform, b: &Shape, xf_b: &Transform) -> Option<f64> {
    let (a, xf_a, b, xf_b) = match (a, b) {
        (Shape::Circle { .. }, Shape::Polygon(_)) => (b, xf_b, a, xf_a),
        _ => (a, xf_a, b, xf_b),
    };
    let m = collide(a, xf_a, b, xf_b);
    if !m.is_touching() {
        return None;
    }
    let wm = WorldManifold::new(&m, xf_a, shape_radius(a), xf_b, shape_radius(b));
    wm.separations.iter().copied().reduce(f64::min)
}

//! Fixed-timestep world: semi-implicit Euler integration, sequential impulse
//! contact solver with warm starting, non-linear position correction and
//! island sleeping.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::collide::{collide, position_manifold, shape_radius, Manifold, WorldManifold};
use crate::error::PhysicsError;
use crate::math::{Transform, Vec2};
use crate::scene::{SceneSpec, DENSITY, STATIC_FRICTION};
use crate::shape::Shape;
use crate::LINEAR_SLOP;

pub const BAUMGARTE: f64 = 0.2;
pub const MAX_LINEAR_CORRECTION: f64 = 0.2;
/// Approach speeds below this do not bounce.
pub const RESTITUTION_THRESHOLD: f64 = 1.0;
/// Torque limit per unit normal impulse and radius for rolling circles.
pub const ROLLING_RESISTANCE: f64 = 0.1;
pub const LINEAR_SLEEP_TOLERANCE: f64 = 0.01;
pub const ANGULAR_SLEEP_TOLERANCE: f64 = 2.0 * std::f64::consts::PI / 180.0;
pub const TIME_TO_SLEEP: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub dt: f64,
    pub gravity: Vec2,
    pub velocity_iterations: usize,
    pub position_iterations: usize,
    /// Any body faster than this aborts the simulation.
    pub max_speed: f64,
    pub sleep: bool,
    /// Reject scenes whose objects start interpenetrating.
    #[serde(default = "default_true")]
    pub reject_overlap: bool,
}

fn default_true() -> bool {
    true
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            dt: 1.0 / 120.0,
            gravity: Vec2::new(0.0, -9.8),
            velocity_iterations: 8,
            position_iterations: 3,
            max_speed: 100.0,
            sleep: true,
            reject_overlap: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Body {
    pub owner: u32,
    pub shape: Shape,
    pub radius: f64,
    pub xf: Transform,
    pub angle: f64,
    pub linear_velocity: Vec2,
    pub angular_velocity: f64,
    pub inv_mass: f64,
    pub inv_inertia: f64,
    pub restitution: f64,
    pub friction: f64,
    pub dynamic: bool,
    pub awake: bool,
    pub sleep_time: f64,
}

impl Body {
    fn is_active(&self) -> bool {
        self.dynamic && self.awake
    }

    pub fn position(&self) -> Vec2 {
        self.xf.p
    }
}

#[derive(Clone, Debug)]
struct Contact {
    /// Shape order used for collision (polygon before circle).
    a: usize,
    b: usize,
    manifold: Manifold,
    friction: f64,
    restitution: f64,
    rolling_limit: f64,
    rolling_impulse: f64,
}

/// Kinematic state of one dynamic object at one tick.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub id: u32,
    pub position: Vec2,
    pub angle: f64,
    pub linear_velocity: Vec2,
    pub angular_velocity: f64,
}

/// Touching contact between two objects during one tick.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactRecord {
    /// Lower object id.
    pub a: u32,
    /// Higher object id.
    pub b: u32,
    /// Unit normal pointing from `a` to `b`.
    pub normal: Vec2,
    /// Relative normal speed at which the pair approaches, zero if separating.
    pub approach_speed: f64,
    /// Total normal impulse applied during the tick.
    pub normal_impulse: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct ConstraintPoint {
    ra: Vec2,
    rb: Vec2,
    normal_impulse: f64,
    tangent_impulse: f64,
    normal_mass: f64,
    tangent_mass: f64,
    velocity_bias: f64,
}

#[derive(Clone, Debug)]
struct VelocityConstraint {
    key: (usize, usize),
    a: usize,
    b: usize,
    normal: Vec2,
    points: Vec<ConstraintPoint>,
    friction: f64,
    rolling_limit: f64,
    rolling_mass: f64,
    rolling_impulse: f64,
}

pub struct World {
    config: WorldConfig,
    bodies: Vec<Body>,
    contacts: BTreeMap<(usize, usize), Contact>,
    tick: u64,
}

impl World {
    pub fn new(config: WorldConfig) -> Self {
        World { config, bodies: Vec::new(), contacts: BTreeMap::new(), tick: 0 }
    }

    /// Builds a world from a validated scene. Bodies are ordered by object id,
    /// which fixes contact-pair ordering.
    pub fn from_scene(scene: &SceneSpec, config: WorldConfig) -> Result<Self, PhysicsError> {
        if config.reject_overlap {
            scene.validate()?;
        } else {
            scene.validate_structure()?;
        }
        let mut world = World::new(config);
        let mut bodies = Vec::new();
        for s in &scene.statics {
            for shape in s.shapes()? {
                bodies.push(Body {
                    owner: s.id,
                    radius: shape_radius(&shape),
                    shape,
                    xf: Transform::IDENTITY,
                    angle: 0.0,
                    linear_velocity: Vec2::ZERO,
                    angular_velocity: 0.0,
                    inv_mass: 0.0,
                    inv_inertia: 0.0,
                    restitution: 0.0,
                    friction: STATIC_FRICTION,
                    dynamic: false,
                    awake: false,
                    sleep_time: 0.0,
                });
            }
        }
        for d in &scene.dynamics {
            let shape = d.collision_shape();
            let md = shape.mass_data(DENSITY);
            // Mass may be overridden by the scene; keep the radius of gyration.
            let scale = d.mass / md.mass;
            bodies.push(Body {
                owner: d.id,
                radius: shape_radius(&shape),
                shape,
                xf: Transform::new(d.position, d.angle),
                angle: d.angle,
                linear_velocity: d.linear_velocity,
                angular_velocity: d.angular_velocity,
                inv_mass: 1.0 / d.mass,
                inv_inertia: 1.0 / (md.inertia * scale),
                restitution: d.restitution,
                friction: d.friction,
                dynamic: true,
                awake: true,
                sleep_time: 0.0,
            });
        }
        // Stable sort keeps polygon order within one static element.
        bodies.sort_by_key(|b| b.owner);
        world.bodies = bodies;
        Ok(world)
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn bodies(&self) -> &[Body] {
        &self.bodies
    }

    /// States of all dynamic objects, ordered by id.
    pub fn snapshot(&self) -> Vec<BodyState> {
        self.bodies
            .iter()
            .filter(|b| b.dynamic)
            .map(|b| BodyState {
                id: b.owner,
                position: b.xf.p,
                angle: b.angle,
                linear_velocity: b.linear_velocity,
                angular_velocity: b.angular_velocity,
            })
            .collect()
    }

    /// Refreshes contacts at the current positions without advancing time.
    pub fn probe_contacts(&mut self) -> Vec<ContactRecord> {
        self.update_contacts();
        self.records(&BTreeMap::new())
    }

    /// Advances the world by one fixed step. Returns the contacts that were
    /// touching at the start of the step.
    pub fn step(&mut self, dt: f64) -> Result<Vec<ContactRecord>, PhysicsError> {
        if (dt - self.config.dt).abs() > 1e-12 {
            return Err(PhysicsError::TimestepMismatch { expected: self.config.dt, got: dt });
        }
        self.update_contacts();
        if self.config.sleep {
            self.wake_touching();
        }
        let approach = self.approach_speeds();

        let gravity = self.config.gravity;
        for b in self.bodies.iter_mut().filter(|b| b.is_active()) {
            b.linear_velocity += dt * gravity;
        }

        let mut constraints = self.init_constraints();
        let cold = constraints.clone();
        let velocities: Vec<_> = self.bodies.iter().map(|b| (b.linear_velocity, b.angular_velocity)).collect();
        let energy = self.kinetic_energy();
        self.warm_start(&constraints);
        for _ in 0..self.config.velocity_iterations {
            self.solve_velocity(&mut constraints);
        }
        // Contact impulses only remove kinetic energy; cached ones from an
        // impact can add it when the chain does not converge. Redo cold.
        if self.kinetic_energy() > energy {
            for (b, (v, w)) in self.bodies.iter_mut().zip(velocities) {
                b.linear_velocity = v;
                b.angular_velocity = w;
            }
            constraints = cold;
            for vc in &mut constraints {
                vc.rolling_impulse = 0.0;
                for cp in &mut vc.points {
                    cp.normal_impulse = 0.0;
                    cp.tangent_impulse = 0.0;
                }
            }
            for _ in 0..self.config.velocity_iterations {
                self.solve_velocity(&mut constraints);
            }
        }
        for vc in &constraints {
            let c = self.contacts.get_mut(&vc.key).expect("constraint has contact");
            for (mp, cp) in c.manifold.points.iter_mut().zip(&vc.points) {
                mp.normal_impulse = cp.normal_impulse;
                mp.tangent_impulse = cp.tangent_impulse;
            }
            c.rolling_impulse = vc.rolling_impulse;
        }

        for b in self.bodies.iter_mut().filter(|b| b.is_active()) {
            let p = b.xf.p + dt * b.linear_velocity;
            b.angle += dt * b.angular_velocity;
            b.xf = Transform::new(p, b.angle);
        }
        for _ in 0..self.config.position_iterations {
            self.solve_positions(&constraints);
        }

        if self.config.sleep {
            self.update_sleep(dt);
        }
        self.tick += 1;

        for b in self.bodies.iter().filter(|b| b.dynamic) {
            let speed = b.linear_velocity.length();
            if !b.xf.p.is_finite() || !b.angle.is_finite() || !speed.is_finite() || speed > self.config.max_speed {
                return Err(PhysicsError::BlowUp { tick: self.tick, object: b.owner, speed });
            }
        }

        Ok(self.records(&approach))
    }

    fn update_contacts(&mut self) {
        let aabbs: Vec<_> = self.bodies.iter().map(|b| b.shape.aabb(&b.xf)).collect();
        let mut next = BTreeMap::new();
        for i in 0..self.bodies.len() {
            for j in i + 1..self.bodies.len() {
                let (bi, bj) = (&self.bodies[i], &self.bodies[j]);
                if !bi.dynamic && !bj.dynamic {
                    continue;
                }
                if bi.owner == bj.owner || !aabbs[i].overlaps(&aabbs[j]) {
                    continue;
                }
                let (a, b) = match (&bi.shape, &bj.shape) {
                    (Shape::Circle { .. }, Shape::Polygon(_)) => (j, i),
                    _ => (i, j),
                };
                let (ba, bb) = (&self.bodies[a], &self.bodies[b]);
                let mut manifold = collide(&ba.shape, &ba.xf, &bb.shape, &bb.xf);
                if !manifold.is_touching() {
                    continue;
                }
                let mut rolling_impulse = 0.0;
                if let Some(old) = self.contacts.get(&(i, j)) {
                    for mp in manifold.points.iter_mut() {
                        if let Some(op) = old.manifold.points.iter().find(|op| op.id == mp.id) {
                            mp.normal_impulse = op.normal_impulse;
                            mp.tangent_impulse = op.tangent_impulse;
                        }
                    }
                    rolling_impulse = old.rolling_impulse;
                }
                let circle_radius = [ba, bb]
                    .iter()
                    .filter_map(|body| match body.shape {
                        Shape::Circle { radius } => Some(radius),
                        _ => None,
                    })
                    .fold(0.0, f64::max);
                next.insert(
                    (i, j),
                    Contact {
                        a,
                        b,
                        manifold,
                        friction: (ba.friction * bb.friction).sqrt(),
                        restitution: ba.restitution.max(bb.restitution),
                        rolling_limit: ROLLING_RESISTANCE * circle_radius,
                        rolling_impulse,
                    },
                );
            }
        }
        self.contacts = next;
    }

    fn wake_touching(&mut self) {
        // Propagate until no sleeping body touches an awake one.
        loop {
            let mut changed = false;
            for c in self.contacts.values() {
                let (a, b) = (c.a, c.b);
                if !(self.bodies[a].dynamic && self.bodies[b].dynamic) {
                    continue;
                }
                if self.bodies[a].awake != self.bodies[b].awake {
                    let sleeper = if self.bodies[a].awake { b } else { a };
                    self.bodies[sleeper].awake = true;
                    self.bodies[sleeper].sleep_time = 0.0;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn world_manifold(&self, c: &Contact) -> WorldManifold {
        let (ba, bb) = (&self.bodies[c.a], &self.bodies[c.b]);
        WorldManifold::new(&c.manifold, &ba.xf, ba.radius, &bb.xf, bb.radius)
    }

    fn relative_velocity(&self, a: usize, b: usize, ra: Vec2, rb: Vec2) -> Vec2 {
        let (ba, bb) = (&self.bodies[a], &self.bodies[b]);
        bb.linear_velocity + Vec2::cross_sv(bb.angular_velocity, rb)
            - ba.linear_velocity
            - Vec2::cross_sv(ba.angular_velocity, ra)
    }

    fn kinetic_energy(&self) -> f64 {
        self.bodies
            .iter()
            .filter(|b| b.is_active())
            .map(|b| {
                let m = if b.inv_mass > 0.0 { 1.0 / b.inv_mass } else { 0.0 };
                let i = if b.inv_inertia > 0.0 { 1.0 / b.inv_inertia } else { 0.0 };
                0.5 * (m * b.linear_velocity.length_squared() + i * b.angular_velocity * b.angular_velocity)
            })
            .sum()
    }

    fn approach_speeds(&self) -> BTreeMap<(usize, usize), f64> {
        self.contacts
            .iter()
            .map(|(key, c)| {
                let wm = self.world_manifold(c);
                let speed = wm
                    .points
                    .iter()
                    .map(|p| {
                        let ra = *p - self.bodies[c.a].xf.p;
                        let rb = *p - self.bodies[c.b].xf.p;
                        -self.relative_velocity(c.a, c.b, ra, rb).dot(wm.normal)
                    })
                    .fold(0.0, f64::max);
                (*key, speed)
            })
            .collect()
    }

    fn init_constraints(&self) -> Vec<VelocityConstraint> {
        let mut out = Vec::with_capacity(self.contacts.len());
        for (key, c) in &self.contacts {
            let (ba, bb) = (&self.bodies[c.a], &self.bodies[c.b]);
            if !ba.is_active() && !bb.is_active() {
                continue;
            }
            let wm = self.world_manifold(c);
            let normal = wm.normal;
            let tangent = Vec2::cross_vs(normal, 1.0);
            let (ma, mb, ia, ib) = (ba.inv_mass, bb.inv_mass, ba.inv_inertia, bb.inv_inertia);
            let points = c
                .manifold
                .points
                .iter()
                .zip(&wm.points)
                .map(|(mp, wp)| {
                    let ra = *wp - ba.xf.p;
                    let rb = *wp - bb.xf.p;
                    let rna = ra.cross(normal);
                    let rnb = rb.cross(normal);
                    let kn = ma + mb + ia * rna * rna + ib * rnb * rnb;
                    let rta = ra.cross(tangent);
                    let rtb = rb.cross(tangent);
                    let kt = ma + mb + ia * rta * rta + ib * rtb * rtb;
                    let vrel = self.relative_velocity(c.a, c.b, ra, rb).dot(normal);
                    let velocity_bias = if vrel < -RESTITUTION_THRESHOLD { -c.restitution * vrel } else { 0.0 };
                    ConstraintPoint {
                        ra,
                        rb,
                        normal_impulse: mp.normal_impulse,
                        tangent_impulse: mp.tangent_impulse,
                        normal_mass: if kn > 0.0 { 1.0 / kn } else { 0.0 },
                        tangent_mass: if kt > 0.0 { 1.0 / kt } else { 0.0 },
                        velocity_bias,
                    }
                })
                .collect();
            let k_roll = ia + ib;
            out.push(VelocityConstraint {
                key: *key,
                a: c.a,
                b: c.b,
                normal,
                points,
                friction: c.friction,
                rolling_limit: c.rolling_limit,
                rolling_mass: if k_roll > 0.0 { 1.0 / k_roll } else { 0.0 },
                rolling_impulse: c.rolling_impulse,
            });
        }
        out
    }

    fn apply_impulse(&mut self, a: usize, b: usize, ra: Vec2, rb: Vec2, p: Vec2) {
        let ba = &mut self.bodies[a];
        ba.linear_velocity -= ba.inv_mass * p;
        ba.angular_velocity -= ba.inv_inertia * ra.cross(p);
        let bb = &mut self.bodies[b];
        bb.linear_velocity += bb.inv_mass * p;
        bb.angular_velocity += bb.inv_inertia * rb.cross(p);
    }

    fn warm_start(&mut self, constraints: &[VelocityConstraint]) {
        for vc in constraints {
            let tangent = Vec2::cross_vs(vc.normal, 1.0);
            for cp in &vc.points {
                let p = cp.normal_impulse * vc.normal + cp.tangent_impulse * tangent;
                self.apply_impulse(vc.a, vc.b, cp.ra, cp.rb, p);
            }
            let ia = self.bodies[vc.a].inv_inertia;
            let ib = self.bodies[vc.b].inv_inertia;
            self.bodies[vc.a].angular_velocity -= ia * vc.rolling_impulse;
            self.bodies[vc.b].angular_velocity += ib * vc.rolling_impulse;
        }
    }

    fn solve_velocity(&mut self, constraints: &mut [VelocityConstraint]) {
        for vc in constraints.iter_mut() {
            let tangent = Vec2::cross_vs(vc.normal, 1.0);
            for i in 0..vc.points.len() {
                let cp = vc.points[i];
                let dv = self.relative_velocity(vc.a, vc.b, cp.ra, cp.rb);
                let lambda = cp.tangent_mass * -dv.dot(tangent);
                let max_friction = vc.friction * cp.normal_impulse;
                let new_impulse = (cp.tangent_impulse + lambda).clamp(-max_friction, max_friction);
                let lambda = new_impulse - cp.tangent_impulse;
                vc.points[i].tangent_impulse = new_impulse;
                self.apply_impulse(vc.a, vc.b, cp.ra, cp.rb, lambda * tangent);
            }
            for i in 0..vc.points.len() {
                let cp = vc.points[i];
                let dv = self.relative_velocity(vc.a, vc.b, cp.ra, cp.rb);
                let vn = dv.dot(vc.normal);
                let lambda = -cp.normal_mass * (vn - cp.velocity_bias);
                let new_impulse = (cp.normal_impulse + lambda).max(0.0);
                let lambda = new_impulse - cp.normal_impulse;
                vc.points[i].normal_impulse = new_impulse;
                self.apply_impulse(vc.a, vc.b, cp.ra, cp.rb, lambda * vc.normal);
            }
            if vc.rolling_limit > 0.0 {
                let total: f64 = vc.points.iter().map(|p| p.normal_impulse).sum();
                let max_lambda = vc.rolling_limit * total;
                let dw = self.bodies[vc.b].angular_velocity - self.bodies[vc.a].angular_velocity;
                let old = vc.rolling_impulse;
                vc.rolling_impulse = (old - vc.rolling_mass * dw).clamp(-max_lambda, max_lambda);
                let lambda = vc.rolling_impulse - old;
                let ia = self.bodies[vc.a].inv_inertia;
                let ib = self.bodies[vc.b].inv_inertia;
                self.bodies[vc.a].angular_velocity -= ia * lambda;
                self.bodies[vc.b].angular_velocity += ib * lambda;
            }
        }
    }

    fn solve_positions(&mut self, constraints: &[VelocityConstraint]) {
        for vc in constraints {
            let c = &self.contacts[&vc.key];
            for i in 0..c.manifold.points.len() {
                let (ba, bb) = (&self.bodies[vc.a], &self.bodies[vc.b]);
                let (normal, point, separation) =
                    position_manifold(&c.manifold, i, &ba.xf, ba.radius, &bb.xf, bb.radius);
                let ra = point - ba.xf.p;
                let rb = point - bb.xf.p;
                let correction = (BAUMGARTE * (separation + LINEAR_SLOP)).clamp(-MAX_LINEAR_CORRECTION, 0.0);
                let rna = ra.cross(normal);
                let rnb = rb.cross(normal);
                let k = ba.inv_mass + bb.inv_mass + ba.inv_inertia * rna * rna + bb.inv_inertia * rnb * rnb;
                let impulse = if k > 0.0 { -correction / k } else { 0.0 };
                let p = impulse * normal;

                let ba = &mut self.bodies[vc.a];
                if ba.is_active() {
                    let pos = ba.xf.p - ba.inv_mass * p;
                    ba.angle -= ba.inv_inertia * ra.cross(p);
                    ba.xf = Transform::new(pos, ba.angle);
                }
                let bb = &mut self.bodies[vc.b];
                if bb.is_active() {
                    let pos = bb.xf.p + bb.inv_mass * p;
                    bb.angle += bb.inv_inertia * rb.cross(p);
                    bb.xf = Transform::new(pos, bb.angle);
                }
            }
        }
    }

    fn update_sleep(&mut self, dt: f64) {
        let lin2 = LINEAR_SLEEP_TOLERANCE * LINEAR_SLEEP_TOLERANCE;
        let ang2 = ANGULAR_SLEEP_TOLERANCE * ANGULAR_SLEEP_TOLERANCE;
        for b in self.bodies.iter_mut().filter(|b| b.is_active()) {
            let w = b.angular_velocity;
            if b.linear_velocity.length_squared() > lin2 || w * w > ang2 {
                b.sleep_time = 0.0;
            } else {
                b.sleep_time += dt;
            }
        }

        // Islands of dynamic bodies joined by touching contacts.
        let n = self.bodies.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for c in self.contacts.values() {
            if self.bodies[c.a].dynamic && self.bodies[c.b].dynamic {
                let (ra, rb) = (find(&mut parent, c.a), find(&mut parent, c.b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut min_sleep = vec![f64::INFINITY; n];
        for i in 0..n {
            if self.bodies[i].is_active() {
                let r = find(&mut parent, i);
                min_sleep[r] = min_sleep[r].min(self.bodies[i].sleep_time);
            }
        }
        for i in 0..n {
            if !self.bodies[i].is_active() {
                continue;
            }
            let r = find(&mut parent, i);
            if min_sleep[r] >= TIME_TO_SLEEP {
                let b = &mut self.bodies[i];
                b.awake = false;
                b.linear_velocity = Vec2::ZERO;
                b.angular_velocity = 0.0;
            }
        }
    }

    fn records(&self, approach: &BTreeMap<(usize, usize), f64>) -> Vec<ContactRecord> {
        let mut by_pair: BTreeMap<(u32, u32), ContactRecord> = BTreeMap::new();
        for (key, c) in &self.contacts {
            let (oa, ob) = (self.bodies[c.a].owner, self.bodies[c.b].owner);
            let wm = self.world_manifold(c);
            let normal = if oa < ob { wm.normal } else { -wm.normal };
            let speed = approach.get(key).copied().unwrap_or(0.0);
            let impulse: f64 = c.manifold.points.iter().map(|p| p.normal_impulse).sum();
            let pair = (oa.min(ob), oa.max(ob));
            by_pair
                .entry(pair)
                .and_modify(|r| {
                    r.approach_speed = r.approach_speed.max(speed);
                    r.normal_impulse += impulse;
                })
                .or_insert(ContactRecord {
                    a: pair.0,
                    b: pair.1,
                    normal,
                    approach_speed: speed,
                    normal_impulse: impulse,
                });
        }
        by_pair.into_values().collect()
    }
}

use causim_physics::render::render_frames;
use causim_physics::scene::{resting_height, BORDER};
use causim_physics::{
    simulate, Color, DynamicObject, PhysicsError, SceneSpec, ShapeKind, SimConfig, SizeKind, StaticElement, Vec2,
    World, WorldConfig,
};
use proptest::prelude::*;

fn scene(dynamics: Vec<DynamicObject>, extra: Vec<StaticElement>) -> SceneSpec {
    let mut statics = SceneSpec::arena_statics();
    statics.extend(extra);
    SceneSpec { scene_id: "test".into(), layout_id: 0, statics, dynamics, rng_seed: 0 }
}

fn ball(id: u32, size: SizeKind, pos: Vec2) -> DynamicObject {
    DynamicObject::new(id, ShapeKind::Circle, size, Color::Red, pos)
}

/// Independent fine-step explicit integrator for a point mass in free fall.
fn reference_drop(g: f64, duration: f64, dt: f64) -> f64 {
    let (mut y, mut v) = (0.0f64, 0.0f64);
    let steps = (duration / dt).round() as usize;
    for _ in 0..steps {
        let a = -g;
        y += v * dt + 0.5 * a * dt * dt;
        v += a * dt;
    }
    -y
}

#[test]
fn free_fall_matches_reference_integrator() {
    let reference = reference_drop(9.8, 1.0, 1.0 / 12000.0);
    assert!((reference - 4.9).abs() < 1e-3, "reference {reference}");

    let start = Vec2::new(5.0, 8.0);
    let s = scene(vec![ball(10, SizeKind::Small, start)], vec![]);
    let mut world = World::from_scene(&s, WorldConfig::default()).unwrap();
    for _ in 0..120 {
        world.step(1.0 / 120.0).unwrap();
    }
    let drop = start.y - world.snapshot()[0].position.y;
    let rel = (drop - reference).abs() / reference;
    assert!(rel < 0.02, "drop {drop} vs reference {reference}: {rel}");
    // Semi-implicit Euler: g dt² n(n+1)/2.
    let dt: f64 = 1.0 / 120.0;
    assert!((drop - 9.8 * dt * dt * 120.0 * 121.0 / 2.0).abs() < 1e-9);
}

#[test]
fn resting_circle_without_gravity_is_fixed_point() {
    let y = resting_height(ShapeKind::Circle, SizeKind::Small, BORDER);
    let s = scene(vec![ball(10, SizeKind::Small, Vec2::new(5.0, y))], vec![]);
    let cfg = WorldConfig { gravity: Vec2::ZERO, ..WorldConfig::default() };
    let mut world = World::from_scene(&s, cfg).unwrap();
    let before = world.snapshot();
    world.step(1.0 / 120.0).unwrap();
    assert_eq!(world.snapshot(), before);
}

#[test]
fn inelastic_drop_stops_on_contact() {
    let mut b = ball(10, SizeKind::Small, Vec2::new(5.0, 3.0));
    b.restitution = 0.0;
    let trace = simulate(&scene(vec![b], vec![]), &SimConfig::default()).unwrap();
    let first_contact = trace.contacts.iter().position(|c| !c.is_empty()).unwrap();
    for tick in first_contact + 2..first_contact + 60 {
        let vy = trace.states[tick][0].linear_velocity.y;
        assert!(vy.abs() < 1e-6, "tick {tick}: vy = {vy}");
    }
}

#[test]
fn ten_seconds_is_1200_ticks() {
    let trace = simulate(&scene(vec![], vec![]), &SimConfig::default()).unwrap();
    assert_eq!(trace.tick_count(), 1200);
    assert!((trace.duration() - 10.0).abs() < 1e-9);
    assert!(trace.states.iter().all(|s| s.is_empty()));
    assert!(trace.contacts.iter().all(|c| c.is_empty()));
}

#[test]
fn objects_resting_on_platform_do_not_drift() {
    let top = 3.0 + causim_physics::scene::PLATFORM_HALF_THICKNESS;
    let dynamics: Vec<_> = [(ShapeKind::Circle, 4.0), (ShapeKind::Cube, 5.5), (ShapeKind::Triangle, 7.0)]
        .iter()
        .enumerate()
        .map(|(i, &(shape, x))| {
            let y = resting_height(shape, SizeKind::Small, top);
            DynamicObject::new(10 + i as u32, shape, SizeKind::Small, Color::Blue, Vec2::new(x, y))
        })
        .collect();
    let s = scene(dynamics, vec![StaticElement::platform(4, Vec2::new(5.5, 3.0), 2.5)]);
    let trace = simulate(&s, &SimConfig::default()).unwrap();
    for (a, b) in trace.initial_state().iter().zip(trace.final_state()) {
        let drift = (a.position - b.position).length();
        assert!(drift < 1e-3, "object {} drifted {drift} m", a.id);
    }
}

#[test]
fn simulation_is_bit_reproducible() {
    let dynamics = vec![
        ball(10, SizeKind::Large, Vec2::new(2.0, 6.0)).with_velocity(Vec2::new(3.0, 0.0)),
        DynamicObject::new(11, ShapeKind::Cube, SizeKind::Small, Color::Green, Vec2::new(6.0, 2.0)).with_angle(0.3),
        DynamicObject::new(12, ShapeKind::Triangle, SizeKind::Large, Color::Cyan, Vec2::new(7.5, 5.0)),
    ];
    let s = scene(dynamics, vec![StaticElement::ramp(4, Vec2::new(3.0, 4.0), 1.5, -0.4)]);
    let a = simulate(&s, &SimConfig::default()).unwrap();
    let b = simulate(&s, &SimConfig::default()).unwrap();
    assert_eq!(a, b);
    let mut buf_a = Vec::new();
    let mut buf_b = Vec::new();
    a.write_jsonl(&mut buf_a).unwrap();
    b.write_jsonl(&mut buf_b).unwrap();
    assert_eq!(buf_a, buf_b);
}

fn sliders(vx: [f64; 3]) -> Vec<DynamicObject> {
    let starts = [(ShapeKind::Circle, 2.0), (ShapeKind::Cube, 5.0), (ShapeKind::Triangle, 8.0)];
    starts
        .into_iter()
        .zip(vx)
        .enumerate()
        .map(|(i, ((shape, x), vx))| {
            let y = resting_height(shape, SizeKind::Small, BORDER);
            let mut d = DynamicObject::new(10 + i as u32, shape, SizeKind::Small, Color::Red, Vec2::new(x, y))
                .with_velocity(Vec2::new(vx, 0.0));
            d.restitution = 0.0;
            d.friction = 0.0;
            d
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn frictionless_inelastic_energy_never_increases(vx in prop::array::uniform3(-4.0f64..4.0)) {
        let dynamics = sliders(vx);
        let trace = simulate(&scene(dynamics.clone(), vec![]), &SimConfig::default()).unwrap();
        let g = 9.8;
        let energy = |tick: usize| -> f64 {
            trace.states[tick]
                .iter()
                .map(|st| {
                    let d = dynamics.iter().find(|d| d.id == st.id).unwrap();
                    let md = d.collision_shape().mass_data(causim_physics::scene::DENSITY);
                    0.5 * d.mass * st.linear_velocity.length_squared()
                        + 0.5 * md.inertia * st.angular_velocity * st.angular_velocity
                        + d.mass * g * st.position.y
                })
                .sum()
        };
        let total_mass: f64 = dynamics.iter().map(|d| d.mass).sum();
        let tolerance = causim_physics::LINEAR_SLOP * total_mass * g;
        for tick in 1..trace.tick_count() {
            let (e0, e1) = (energy(tick - 1), energy(tick));
            prop_assert!(e1 <= e0 + tolerance, "tick {}: {} -> {}", tick, e0, e1);
        }
    }

    #[test]
    fn objects_stay_inside_the_walls(
        v in prop::array::uniform3((-7.0f64..7.0, -3.0f64..4.0)),
        y in prop::array::uniform3(2.0f64..8.0),
    ) {
        let dynamics = vec![
            ball(10, SizeKind::Small, Vec2::new(2.0, y[0])).with_velocity(Vec2::new(v[0].0, v[0].1)),
            ball(11, SizeKind::Large, Vec2::new(8.0, y[1])).with_velocity(Vec2::new(v[1].0, v[1].1)),
            DynamicObject::new(12, ShapeKind::Cube, SizeKind::Large, Color::Gray, Vec2::new(5.0, y[2]))
                .with_velocity(Vec2::new(v[2].0, v[2].1)),
        ];
        let trace = simulate(&scene(dynamics, vec![]), &SimConfig::default()).unwrap();
        for states in &trace.states {
            for s in states {
                prop_assert!(s.position.x > 0.0 && s.position.x < 10.0, "{:?}", s);
                prop_assert!(s.position.y > 0.0, "{:?}", s);
            }
        }
    }
}

#[test]
fn runaway_speed_aborts() {
    let b = ball(10, SizeKind::Small, Vec2::new(5.0, 5.0)).with_velocity(Vec2::new(0.0, 150.0));
    let err = simulate(&scene(vec![b], vec![]), &SimConfig::default()).unwrap_err();
    assert!(matches!(err, PhysicsError::BlowUp { object: 10, .. }), "{err}");
}

#[test]
fn step_rejects_foreign_timestep() {
    let mut world = World::from_scene(&scene(vec![], vec![]), WorldConfig::default()).unwrap();
    assert!(matches!(world.step(0.01), Err(PhysicsError::TimestepMismatch { .. })));
}

#[test]
fn renders_fifty_square_frames() {
    let s = scene(
        vec![ball(10, SizeKind::Large, Vec2::new(5.0, 6.0))],
        vec![StaticElement::basket(4, 7.5, BORDER, 1.8, 1.2)],
    );
    let trace = simulate(&s, &SimConfig::default()).unwrap();
    let frames = render_frames(&s, &trace, 5, 256).unwrap();
    assert_eq!(frames.len(), 50);
    assert!(frames.iter().all(|f| f.width() == 256 && f.height() == 256));
    // Ground pixels are black, the ball is red somewhere in the first frame.
    assert_eq!(frames[0].get_pixel(128, 255).0, [0, 0, 0]);
    assert!(frames[0].pixels().any(|p| p.0 == Color::Red.rgb()));
    assert_ne!(frames[0], frames[10]);

    assert!(render_frames(&s, &trace, 0, 256).is_err());
    assert!(render_frames(&s, &trace, 5, 0).is_err());
}

#[test]
fn static_scene_frames_are_identical() {
    let s = scene(vec![], vec![StaticElement::platform(4, Vec2::new(5.0, 5.0), 2.0)]);
    let trace = simulate(&s, &SimConfig::default()).unwrap();
    let frames = render_frames(&s, &trace, 5, 64).unwrap();
    assert!(frames.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn png_export_writes_every_frame() {
    let s = scene(vec![ball(10, SizeKind::Small, Vec2::new(5.0, 6.0))], vec![]);
    let trace = simulate(&s, &SimConfig { duration: 1.0, ..SimConfig::default() }).unwrap();
    let frames = render_frames(&s, &trace, 5, 32).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = causim_physics::render::write_png_frames(&frames, dir.path()).unwrap();
    assert_eq!(paths.len(), 5);
    assert!(paths.iter().all(|p| p.exists()));
}

#[test]
fn trace_jsonl_round_trips() {
    let s = scene(vec![ball(10, SizeKind::Small, Vec2::new(5.0, 1.5)).with_velocity(Vec2::new(1.0, 0.0))], vec![]);
    let mut trace = simulate(&s, &SimConfig { duration: 2.0, ..SimConfig::default() }).unwrap();
    trace.removed_object_id = Some(11);
    let mut buf = Vec::new();
    trace.write_jsonl(&mut buf).unwrap();
    let first = std::str::from_utf8(&buf).unwrap().lines().next().unwrap().to_string();
    assert!(first.contains("\"engine_version\"") && first.contains("\"removed_object_id\":11"));
    let back = causim_physics::SimulationTrace::read_jsonl(std::io::Cursor::new(buf)).unwrap();
    assert_eq!(back, trace);
}

//! Rasterizes traces into RGB frames. Static elements are black on a white
//! background, dynamic objects use their color.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::PhysicsError;
use crate::math::{Transform, Vec2};
use crate::scene::{SceneSpec, ARENA_SIZE};
use crate::shape::Shape;
use crate::trace::SimulationTrace;

pub const DEFAULT_FPS: u32 = 5;
pub const DEFAULT_RESOLUTION: u32 = 256;

const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);
const STATIC_COLOR: Rgb<u8> = Rgb([0, 0, 0]);

/// Ticks between consecutive frames at `fps`.
pub fn frame_stride(dt: f64, fps: u32) -> Result<usize, PhysicsError> {
    if fps == 0 {
        return Err(PhysicsError::InvalidArgument("fps must be positive".into()));
    }
    let ratio = 1.0 / (dt * fps as f64);
    let stride = ratio.round();
    if stride < 1.0 || (ratio - stride).abs() > 1e-6 {
        return Err(PhysicsError::InvalidArgument(format!(
            "{fps} fps does not divide the tick rate {:.3} Hz",
            1.0 / dt
        )));
    }
    Ok(stride as usize)
}

pub fn render_frames(
    scene: &SceneSpec,
    trace: &SimulationTrace,
    fps: u32,
    resolution: u32,
) -> Result<Vec<RgbImage>, PhysicsError> {
    if resolution == 0 {
        return Err(PhysicsError::InvalidArgument("resolution must be positive".into()));
    }
    let stride = frame_stride(trace.dt, fps)?;
    let mut base = RgbImage::from_pixel(resolution, resolution, BACKGROUND);
    for s in &scene.statics {
        for poly in &s.polygons {
            fill_polygon(&mut base, poly, STATIC_COLOR);
        }
    }
    let mut frames = Vec::new();
    for tick in (0..trace.tick_count()).step_by(stride) {
        let mut img = base.clone();
        for state in &trace.states[tick] {
            let Some(obj) = scene.dynamic(state.id) else { continue };
            let color = Rgb(obj.color.rgb());
            let xf = Transform::new(state.position, state.angle);
            match obj.collision_shape() {
                Shape::Circle { radius } => fill_circle(&mut img, state.position, radius, color),
                shape @ Shape::Polygon(_) => fill_polygon(&mut img, &shape.world_vertices(&xf), color),
            }
        }
        frames.push(img);
    }
    Ok(frames)
}

pub fn write_png_frames(frames: &[RgbImage], dir: &Path) -> std::io::Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(frames.len());
    for (i, f) in frames.iter().enumerate() {
        let path = dir.join(format!("frame_{i:04}.png"));
        f.save(&path).map_err(std::io::Error::other)?;
        paths.push(path);
    }
    Ok(paths)
}

fn to_world(img: &RgbImage, px: u32, py: u32) -> Vec2 {
    let res = img.width() as f64;
    Vec2::new((px as f64 + 0.5) / res * ARENA_SIZE, (1.0 - (py as f64 + 0.5) / res) * ARENA_SIZE)
}

fn pixel_bounds(img: &RgbImage, min: Vec2, max: Vec2) -> Option<(u32, u32, u32, u32)> {
    let res = img.width() as f64;
    let to_px = |x: f64| x / ARENA_SIZE * res;
    let x0 = to_px(min.x).floor().max(0.0);
    let x1 = to_px(max.x).ceil().min(res - 1.0);
    let y0 = (res - to_px(max.y)).floor().max(0.0);
    let y1 = (res - to_px(min.y)).ceil().min(res - 1.0);
    (x0 <= x1 && y0 <= y1).then_some((x0 as u32, x1 as u32, y0 as u32, y1 as u32))
}

fn fill_polygon(img: &mut RgbImage, poly: &[Vec2], color: Rgb<u8>) {
    let bb = crate::math::Aabb::from_points(poly);
    let Some((x0, x1, y0, y1)) = pixel_bounds(img, bb.min, bb.max) else { return };
    let n = poly.len();
    let area: f64 = (0..n).map(|i| poly[i].cross(poly[(i + 1) % n])).sum();
    let sign = area.signum();
    for py in y0..=y1 {
        for px in x0..=x1 {
            let p = to_world(img, px, py);
            let inside = (0..n).all(|i| {
                let e = poly[(i + 1) % n] - poly[i];
                sign * e.cross(p - poly[i]) >= 0.0
            });
            if inside {
                img.put_pixel(px, py, color);
            }
        }
    }
}

fn fill_circle(img: &mut RgbImage, center: Vec2, radius: f64, color: Rgb<u8>) {
    let r = Vec2::new(radius, radius);
    let Some((x0, x1, y0, y1)) = pixel_bounds(img, center - r, center + r) else { return };
    for py in y0..=y1 {
        for px in x0..=x1 {
            if (to_world(img, px, py) - center).length_squared() <= radius * radius {
                img.put_pixel(px, py, color);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_at_five_fps() {
        assert_eq!(frame_stride(1.0 / 120.0, 5).unwrap(), 24);
        assert!(frame_stride(1.0 / 120.0, 7).is_err());
        assert!(frame_stride(1.0 / 120.0, 0).is_err());
    }
}

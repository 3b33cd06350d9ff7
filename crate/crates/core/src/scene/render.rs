use image::{Rgb, RgbImage};
use nalgebra::Vector3;
use ndarray::Array2;

use super::{CameraPose, TerrainScene};
use crate::error::{Error, Result};
use crate::radar::CameraIntrinsics;
use crate::DepthMap;

const MAX_MARCH_STEPS: usize = 100_000;
const BISECTION_STEPS: usize = 60;

#[derive(Clone, Debug)]
pub struct RenderedView {
    pub rgb: RgbImage,
    /// Camera-frame z of the first surface hit, meters.
    pub depth: DepthMap,
}

/// Ray casts every pixel center against the heightfield.
///
/// Fails with [`Error::RayMiss`] if any ray does not reach the surface, which
/// only happens when the pose violates the full-coverage predicate.
pub fn render_depth_rgb(
    scene: &TerrainScene,
    pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
) -> Result<RenderedView> {
    let (width, height) = (intrinsics.width, intrinsics.height);
    let mut rgb = RgbImage::new(width as u32, height as u32);
    let mut depth = Array2::zeros((height, width));
    for row in 0..height {
        for col in 0..width {
            let ray = pose.world_ray(intrinsics, col as f64, row as f64);
            let t = cast_ray(scene, &pose.position, &ray).ok_or(Error::RayMiss { u: col, v: row })?;
            let hit = pose.position + ray * t;
            depth[[row, col]] = t;
            rgb.put_pixel(col as u32, row as u32, shade(scene, hit.x, hit.y));
        }
    }
    Ok(RenderedView { rgb, depth })
}

fn shade(scene: &TerrainScene, x: f64, y: f64) -> Rgb<u8> {
    let albedo = scene.albedo_at(x, y);
    let lambert = scene.normal_at(x, y).dot(scene.sun()).max(0.0);
    let light = scene.ambient() + (1.0 - scene.ambient()) * lambert;
    Rgb(albedo.map(|a| (a * light * 255.0).round().clamp(0.0, 255.0) as u8))
}

/// Ray parameter of the first intersection of `origin + t·dir` with the
/// surface, or `None` for upward/horizontal rays and runaway marches.
///
/// Marches with steps that cannot overshoot the Lipschitz-bounded surface,
/// then bisects the final bracket.
pub(crate) fn cast_ray(scene: &TerrainScene, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    if !(dir.z < 0.0) {
        return None;
    }
    let gap = |t: f64| {
        let p = origin + dir * t;
        p.z - scene.height_at(p.x, p.y)
    };
    let horizontal = (dir.x * dir.x + dir.y * dir.y).sqrt();
    let closing_rate = scene.max_slope() * horizontal + dir.z.abs();

    let mut t = 0.0;
    let mut g = gap(t);
    if g <= 0.0 {
        return Some(0.0);
    }
    for _ in 0..MAX_MARCH_STEPS {
        let min_step = 1e-7 * (1.0 + t);
        let next = t + (g / closing_rate).max(min_step);
        let g_next = gap(next);
        if g_next <= 0.0 {
            return Some(bisect(&gap, t, next));
        }
        t = next;
        g = g_next;
    }
    None
}

fn bisect(gap: &impl Fn(f64) -> f64, mut above: f64, mut below: f64) -> f64 {
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (above + below);
        if mid == above || mid == below {
            break;
        }
        if gap(mid) > 0.0 {
            above = mid;
        } else {
            below = mid;
        }
    }
    0.5 * (above + below)
}

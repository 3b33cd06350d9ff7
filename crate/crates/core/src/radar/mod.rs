//! Radar returns to the sparse-depth input channel.
//!
//! The path is `filter_by_snr` → `accumulate_frames` → `project_to_image` →
//! `rasterize`. Depth is always camera-frame z (planar depth), never range.
//! Images are assumed rectified; no lens distortion is modelled.

mod io;

pub use io::{
    group_frames, read_calibration, read_observations, read_radar_log, write_calibration,
    write_observations, write_radar_log, Calibration,
};

use nalgebra::{Matrix3, Matrix3xX, Vector3};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default SNR cutoff in dB.
pub const SNR_CUTOFF_DB: f64 = 15.0;
/// Default number of radar frames accumulated per image.
pub const ACCUMULATION_WINDOW: usize = 3;
/// Default disk radius used when painting observations, in pixels.
pub const DISK_RADIUS_PX: f64 = 5.0;

const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Square pixels, principal point at the image center, horizontal field of
    /// view `hfov_deg`.
    pub fn centered(width: usize, height: usize, hfov_deg: f64) -> Result<Self> {
        let f = 0.5 * width as f64 / (0.5 * hfov_deg.to_radians()).tan();
        Self::new(f, f, 0.5 * width as f64, 0.5 * height as f64, width, height)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidIntrinsics(msg.to_owned()));
        if self.width == 0 || self.height == 0 {
            return bad("image size must be positive");
        }
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return bad("focal lengths must be positive and finite");
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return bad("cx must lie strictly inside the image");
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return bad("cy must lie strictly inside the image");
        }
        Ok(())
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }

    /// Camera-frame direction `(x/z, y/z, 1)` through pixel coordinates `(u, v)`.
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Same intrinsics for an image resized by an integer-free factor.
    pub fn scaled_to(&self, width: usize, height: usize) -> Result<Self> {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self::new(
            self.fx * sx,
            self.fy * sy,
            self.cx * sx,
            self.cy * sy,
            width,
            height,
        )
    }
}

/// Rigid motion `p' = R·p + t`, here radar frame → camera frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|x| x.is_finite()) {
            return Err(Error::InvalidTransform("non-finite entries".into()));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if ortho > ORTHONORMAL_TOL {
            return Err(Error::InvalidTransform(format!(
                "rotation is not orthonormal (max |RᵀR − I| = {ortho:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidTransform(format!(
                "rotation determinant is {det}, expected +1"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_row_major(rotation: [f64; 9], translation: [f64; 3]) -> Result<Self> {
        Self::new(
            Matrix3::from_row_slice(&rotation),
            Vector3::from(translation),
        )
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadarReturn {
    /// Position in the radar frame, meters.
    pub position: Vector3<f64>,
    pub snr_db: f64,
    /// Seconds.
    pub timestamp: f64,
}

/// A radar return expressed in image coordinates with its camera-frame depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelObservation {
    pub u: f64,
    pub v: f64,
    /// Camera-frame z, meters.
    pub depth: f64,
}

impl PixelObservation {
    /// Nearest integer pixel as `(row, col)`.
    pub fn pixel(&self) -> (i64, i64) {
        (self.v.round() as i64, self.u.round() as i64)
    }
}

/// Sparse depth channel: observation depths painted as disks, `0` elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseDepthImage {
    pub grid: Array2<f64>,
}

impl SparseDepthImage {
    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            grid: Array2::zeros((height, width)),
        }
    }

    pub fn painted_pixels(&self) -> usize {
        self.grid.iter().filter(|&&d| d > 0.0).count()
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        crate::raster::write_pfm(path, &self.grid)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Ok(Self {
            grid: crate::raster::read_pfm(path)?,
        })
    }
}

/// Keeps returns with `snr_db >= cutoff_db`, in input order.
pub fn filter_by_snr(returns: &[RadarReturn], cutoff_db: f64) -> Vec<RadarReturn> {
    returns
        .iter()
        .filter(|r| r.snr_db >= cutoff_db)
        .copied()
        .collect()
}

/// Concatenates the last `window` frames (or all of them, if fewer).
///
/// No deduplication and no ego-motion compensation.
pub fn accumulate_frames(frames: &[Vec<RadarReturn>], window: usize) -> Vec<RadarReturn> {
    let window = window.max(1);
    let start = frames.len().saturating_sub(window);
    frames[start..].iter().flatten().copied().collect()
}

/// Pinhole projection of radar returns into the image.
///
/// Points are moved to the camera frame, those with `z <= 0` are dropped, and
/// only observations landing inside `[0, width) × [0, height)` are kept.
pub fn project_to_image(
    returns: &[RadarReturn],
    intrinsics: &CameraIntrinsics,
    extrinsics: &RigidTransform,
) -> Vec<PixelObservation> {
    if returns.is_empty() {
        return Vec::new();
    }
    let points = Matrix3xX::from_iterator(
        returns.len(),
        returns.iter().flat_map(|r| r.position.iter().copied()),
    );
    let mut camera = extrinsics.rotation() * points;
    for mut col in camera.column_iter_mut() {
        col += extrinsics.translation();
    }
    camera
        .column_iter()
        .filter_map(|p| {
            let z = p[2];
            if !(z > 0.0) {
                return None;
            }
            let u = intrinsics.fx * p[0] / z + intrinsics.cx;
            let v = intrinsics.fy * p[1] / z + intrinsics.cy;
            intrinsics
                .contains(u, v)
                .then_some(PixelObservation { u, v, depth: z })
        })
        .collect()
}

/// Full preprocessing of a radar log: per-frame SNR filtering, accumulation
/// of the last [`ACCUMULATION_WINDOW`] frames and projection into the image.
pub fn observations_from_frames(frames: &[Vec<RadarReturn>], calibration: &Calibration) -> Vec<PixelObservation> {
    let filtered: Vec<Vec<RadarReturn>> = frames.iter().map(|f| filter_by_snr(f, SNR_CUTOFF_DB)).collect();
    let accumulated = accumulate_frames(&filtered, ACCUMULATION_WINDOW);
    project_to_image(&accumulated, &calibration.intrinsics, &calibration.extrinsics)
}

/// Inverse of [`project_to_image`] for a single observation: the radar-frame
/// point that projects to `(u, v)` at the observation's depth.
pub fn back_project(
    obs: &PixelObservation,
    intrinsics: &CameraIntrinsics,
    extrinsics: &RigidTransform,
) -> Vector3<f64> {
    let camera = intrinsics.ray(obs.u, obs.v) * obs.depth;
    extrinsics.inverse().apply(&camera)
}

/// Paints every observation as a disk of `radius` pixels around its rounded
/// center. Overlaps keep the smaller depth. Observations with a non-positive
/// or non-finite depth carry no information and are skipped.
pub fn rasterize(
    observations: &[PixelObservation],
    (height, width): (usize, usize),
    radius: f64,
) -> SparseDepthImage {
    let mut image = SparseDepthImage::empty(height, width);
    let r = radius.max(0.0);
    let reach = r.floor() as i64;
    let r2 = r * r;
    for obs in observations {
        if !(obs.depth > 0.0 && obs.depth.is_finite()) {
            continue;
        }
        let (cr, cc) = obs.pixel();
        let rows = (cr - reach).max(0)..=(cr + reach).min(height as i64 - 1);
        for row in rows {
            let cols = (cc - reach).max(0)..=(cc + reach).min(width as i64 - 1);
            for col in cols {
                let (dr, dc) = ((row - cr) as f64, (col - cc) as f64);
                if dr * dr + dc * dc > r2 {
                    continue;
                }
                let px = &mut image.grid[[row as usize, col as usize]];
                if *px == 0.0 || obs.depth < *px {
                    *px = obs.depth;
                }
            }
        }
    }
    image
}

/// Mean observation depth; `None` signals the "no radar" condition.
pub fn radar_mean_depth(observations: &[PixelObservation]) -> Option<f64> {
    if observations.is_empty() {
        return None;
    }
    let sum: f64 = observations.iter().map(|o| o.depth).sum();
    Some(sum / observations.len() as f64)
}

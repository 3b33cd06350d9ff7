use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TerrainScene;
use crate::error::{Error, Result};
use crate::radar::CameraIntrinsics;
use crate::rng::rng_from;

/// Sampled attitude relative to the nadir frame, radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attitude {
    pub tilt_x: f64,
    pub tilt_y: f64,
    pub roll: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraPose {
    /// Camera center in the world frame (z up), meters.
    pub position: Vector3<f64>,
    /// World → camera rotation.
    pub orientation: Matrix3<f64>,
    pub attitude: Attitude,
}

/// Camera → world rotation of a camera looking straight down: image x along
/// world x, image y along world −y, optical axis along world −z.
pub fn nadir_frame() -> Matrix3<f64> {
    Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0)
}

impl CameraPose {
    /// Applies tilt about camera x, then tilt about camera y, then roll about
    /// camera z, starting from the nadir frame.
    pub fn from_attitude(position: Vector3<f64>, attitude: Attitude) -> Self {
        let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), attitude.tilt_x);
        let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), attitude.tilt_y);
        let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), attitude.roll);
        let camera_to_world = nadir_frame() * rx.matrix() * ry.matrix() * rz.matrix();
        Self {
            position,
            orientation: camera_to_world.transpose(),
            attitude,
        }
    }

    pub fn nadir(position: Vector3<f64>) -> Self {
        Self::from_attitude(
            position,
            Attitude {
                tilt_x: 0.0,
                tilt_y: 0.0,
                roll: 0.0,
            },
        )
    }

    pub fn camera_to_world(&self) -> Matrix3<f64> {
        self.orientation.transpose()
    }

    /// World direction through pixel `(u, v)`, scaled so that its camera-frame
    /// z component is exactly 1. A point `position + t·ray` has z-depth `t`.
    pub fn world_ray(&self, intrinsics: &CameraIntrinsics, u: f64, v: f64) -> Vector3<f64> {
        self.camera_to_world() * intrinsics.ray(u, v)
    }
}

/// Every pixel ray of the image hits the (periodic, unbounded) terrain.
///
/// A ray hits iff it points downward. The world z component of a pixel ray is
/// affine in `(u, v)`, so checking the four extreme pixels is exact.
pub fn full_coverage(pose: &CameraPose, intrinsics: &CameraIntrinsics) -> bool {
    let (w, h) = ((intrinsics.width - 1) as f64, (intrinsics.height - 1) as f64);
    [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)]
        .iter()
        .all(|&(u, v)| pose.world_ray(intrinsics, u, v).z < 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseSampler {
    /// Camera height above the local surface, meters.
    pub altitude: (f64, f64),
    pub max_tilt_deg: f64,
    pub max_roll_deg: f64,
    pub max_attempts: usize,
}

impl Default for PoseSampler {
    fn default() -> Self {
        Self {
            altitude: (1.0, 51.0),
            max_tilt_deg: 22.5,
            max_roll_deg: 180.0,
            max_attempts: 1000,
        }
    }
}

impl PoseSampler {
    /// Draws poses until one satisfies [`full_coverage`].
    pub fn sample(
        &self,
        scene: &TerrainScene,
        intrinsics: &CameraIntrinsics,
        seed: u64,
    ) -> Result<CameraPose> {
        let mut rng = rng_from(seed, &[0x9053]);
        let tilt = self.max_tilt_deg.to_radians();
        let roll = self.max_roll_deg.to_radians();
        let (alt_lo, alt_hi) = self.altitude;
        for _ in 0..self.max_attempts {
            let x = rng.random_range(0.0..scene.extent());
            let y = rng.random_range(0.0..scene.extent());
            let altitude = rng.random_range(alt_lo..=alt_hi);
            let attitude = Attitude {
                tilt_x: rng.random_range(-tilt..=tilt),
                tilt_y: rng.random_range(-tilt..=tilt),
                roll: rng.random_range(-roll..=roll),
            };
            let position = Vector3::new(x, y, scene.height_at(x, y) + altitude);
            let pose = CameraPose::from_attitude(position, attitude);
            if full_coverage(&pose, intrinsics) {
                return Ok(pose);
            }
        }
        Err(Error::PoseSamplingExhausted {
            attempts: self.max_attempts,
        })
    }
}

/// [`PoseSampler::sample`] with the default distribution.
pub fn sample_pose(
    scene: &TerrainScene,
    intrinsics: &CameraIntrinsics,
    seed: u64,
) -> Result<CameraPose> {
    PoseSampler::default().sample(scene, intrinsics, seed)
}

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{detect_corners, render_depth_rgb, CornerFeature, PoseSampler, RenderedView, TerrainParams, TerrainScene};
use crate::error::{Error, Result};
use crate::radar::{CameraIntrinsics, PixelObservation};
use crate::rng::{derive_seed, rng_from};
use crate::DepthMap;

/// Radar returns per synthetic frame are drawn uniformly from this range.
pub const RADAR_POINTS_PER_FRAME: (usize, usize) = (1, 5);

/// Samples between `k_min` and `k_max` corners (without replacement) as radar
/// returns carrying the ground-truth depth at their pixel.
///
/// Corners whose pixel has no valid ground truth are never chosen.
pub fn synthesize_radar(
    corners: &[CornerFeature],
    depth: &DepthMap,
    rng_seed: u64,
    k_min: usize,
    k_max: usize,
) -> Result<Vec<PixelObservation>> {
    if k_min == 0 || k_max < k_min {
        return Err(Error::InvalidArgument(format!(
            "radar count range [{k_min}, {k_max}] is invalid"
        )));
    }
    let (h, w) = depth.dim();
    let usable: Vec<PixelObservation> = corners
        .iter()
        .filter_map(|c| {
            let (row, col) = (c.v.round(), c.u.round());
            if row < 0.0 || col < 0.0 || row >= h as f64 || col >= w as f64 {
                return None;
            }
            let d = depth[[row as usize, col as usize]];
            (d > 0.0 && d.is_finite()).then_some(PixelObservation {
                u: col,
                v: row,
                depth: d,
            })
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::NoCorners);
    }
    let mut rng = rng_from(rng_seed, &[0x4ad4]);
    let k = rng.random_range(k_min..=k_max).min(usable.len());
    Ok(sample(&mut rng, usable.len(), k)
        .into_iter()
        .map(|i| usable[i])
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub hfov_deg: f64,
    pub terrain: TerrainParams,
    pub poses: PoseSampler,
    pub max_corners: usize,
    pub radar_points: (usize, usize),
    /// New poses tried when a view has no corners.
    pub max_view_retries: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            hfov_deg: 64.0,
            terrain: TerrainParams::default(),
            poses: PoseSampler::default(),
            max_corners: super::MAX_CORNERS,
            radar_points: RADAR_POINTS_PER_FRAME,
            max_view_retries: 20,
        }
    }
}

impl SynthConfig {
    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        CameraIntrinsics::centered(self.width, self.height, self.hfov_deg)
    }
}

/// One rendered training tuple.
#[derive(Clone, Debug)]
pub struct SynthView {
    pub view: RenderedView,
    pub corners: Vec<CornerFeature>,
    /// Pose seed actually used after skipping corner-free views.
    pub pose_seed: u64,
}

/// Renders a view of `scene` and detects its corners. Views without corners
/// are discarded and a new pose is drawn from a derived seed.
pub fn generate_view(scene: &TerrainScene, config: &SynthConfig, pose_seed: u64) -> Result<SynthView> {
    let intrinsics = config.intrinsics()?;
    for retry in 0..=config.max_view_retries as u64 {
        let seed = if retry == 0 {
            pose_seed
        } else {
            derive_seed(pose_seed, &[retry])
        };
        let pose = config.poses.sample(scene, &intrinsics, seed)?;
        let view = render_depth_rgb(scene, &pose, &intrinsics)?;
        let corners = detect_corners(&view.rgb, config.max_corners);
        if !corners.is_empty() {
            return Ok(SynthView {
                view,
                corners,
                pose_seed: seed,
            });
        }
    }
    Err(Error::NoCorners)
}

pub fn generate_scene(config: &SynthConfig, scene_seed: u64) -> Result<TerrainScene> {
    TerrainScene::generate(scene_seed, &config.terrain)
}

/// One dataset entry: a view of its own terrain plus one radar draw.
#[derive(Clone, Debug)]
pub struct GeneratedSample {
    pub scene_seed: u64,
    pub pose_seed: u64,
    pub radar_seed: u64,
    pub view: SynthView,
    pub observations: Vec<PixelObservation>,
}

/// Sample `index` of the dataset seeded with `dataset_seed`. Every sample has
/// its own terrain, so scene scale varies from sample to sample.
pub fn generate_sample(config: &SynthConfig, dataset_seed: u64, index: u64) -> Result<GeneratedSample> {
    let scene_seed = derive_seed(dataset_seed, &[index, 0]);
    let radar_seed = derive_seed(dataset_seed, &[index, 2]);
    let scene = generate_scene(config, scene_seed)?;
    let view = generate_view(&scene, config, derive_seed(dataset_seed, &[index, 1]))?;
    let (k_min, k_max) = config.radar_points;
    let observations = synthesize_radar(&view.corners, &view.view.depth, radar_seed, k_min, k_max)?;
    Ok(GeneratedSample {
        scene_seed,
        pose_seed: view.pose_seed,
        radar_seed,
        view,
        observations,
    })
}

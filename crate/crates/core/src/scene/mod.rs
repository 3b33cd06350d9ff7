//! Procedural training data: terrain, camera poses, rendering, corners and
//! corner-based radar synthesis.

mod corners;
pub mod dataset;
mod pose;
mod render;
mod synth;
mod terrain;

pub use corners::{
    detect_corners, detect_corners_gray, grayscale, min_eigen_response, CornerFeature,
    CornerParams, MAX_CORNERS,
};
pub use pose::{full_coverage, nadir_frame, sample_pose, Attitude, CameraPose, PoseSampler};
pub use render::{render_depth_rgb, RenderedView};
pub use synth::{
    generate_sample, generate_scene, generate_view, GeneratedSample, synthesize_radar, SynthConfig, SynthView,
    RADAR_POINTS_PER_FRAME,
};
pub use terrain::{TerrainParams, TerrainScene};

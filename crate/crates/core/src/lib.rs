//! Fusing extremely sparse mmWave radar returns into monocular metric depth
//! prediction.
//!
//! The crate is organised along the data path:
//!
//! - [`radar`]: SNR filtering, frame accumulation, pinhole projection and
//!   rasterization of radar returns into the sparse-depth input channel.
//! - [`scene`]: procedural terrain, camera pose sampling, ray-cast rendering,
//!   Shi–Tomasi corners and corner-based radar synthesis for training data.
//! - [`fusion`]: the four-channel toy vision transformer with a depth head and
//!   a weight head, the radar-weighted fusion and the naive rescaling baseline.
//! - [`training`]: scale-invariant log loss, polynomial decay, Adam with two
//!   parameter groups and the epoch loop with checkpoint selection.
//! - [`metrics`]: AbsRel, δ1, RMSE, dataset summaries and error-vs-depth series.

pub mod error;
pub mod experiment;
pub mod fusion;
pub mod metrics;
pub mod radar;
pub mod raster;
pub mod rng;
pub mod scene;
pub mod training;

pub use error::{Error, Result};

/// Depth-like per-pixel map, indexed `[row, col]`.
pub type DepthMap = ndarray::Array2<f64>;

/// Per-pixel validity mask, indexed `[row, col]`.
pub type Mask = ndarray::Array2<bool>;

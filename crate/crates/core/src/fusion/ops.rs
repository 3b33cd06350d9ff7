//! Fusion of the depth head with the radar mean, and scalar rescaling of a
//! relative depth map.

use crate::error::{Error, Result};
use crate::radar::{radar_mean_depth, PixelObservation};
use crate::DepthMap;

fn same_shape(a: &DepthMap, b: &DepthMap) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            expected: a.shape().to_vec(),
            actual: b.shape().to_vec(),
        });
    }
    Ok(())
}

/// `d0 · w + (1 − w) · mean(radar depths)` per pixel.
///
/// Without observations the radar term is undefined and `d0` is returned.
pub fn fuse(d0: &DepthMap, w: &DepthMap, observations: &[PixelObservation]) -> Result<DepthMap> {
    same_shape(d0, w)?;
    Ok(match radar_mean_depth(observations) {
        Some(mean) => fuse_with_mean(d0, w, mean),
        None => d0.clone(),
    })
}

pub fn fuse_with_mean(d0: &DepthMap, w: &DepthMap, radar_mean: f64) -> DepthMap {
    let mut out = d0.clone();
    out.zip_mut_with(w, |d, &w| *d = *d * w + (1.0 - w) * radar_mean);
    out
}

/// Mean over observations of `radar depth / relative depth` at the rounded
/// observation pixel.
pub fn naive_scale_factor(relative: &DepthMap, observations: &[PixelObservation]) -> Result<f64> {
    if observations.is_empty() {
        return Err(Error::NoRadar);
    }
    let (h, w) = relative.dim();
    let mut sum = 0.0;
    for o in observations {
        let (row, col) = o.pixel();
        if row < 0 || col < 0 || row as usize >= h || col as usize >= w {
            return Err(Error::InvalidArgument(format!(
                "observation at ({}, {}) lies outside the {h}×{w} map",
                o.u, o.v
            )));
        }
        let (row, col) = (row as usize, col as usize);
        let rel = relative[[row, col]];
        if !(rel > 0.0) || !rel.is_finite() {
            return Err(Error::NonPositiveDepth { row, col, value: rel });
        }
        sum += o.depth / rel;
    }
    Ok(sum / observations.len() as f64)
}

/// `ŝ · relative` with `ŝ` from [`naive_scale_factor`].
pub fn naive_scale(relative: &DepthMap, observations: &[PixelObservation]) -> Result<DepthMap> {
    let s = naive_scale_factor(relative, observations)?;
    Ok(relative.mapv(|r| s * r))
}

//! Minimum-eigenvalue (Shi–Tomasi) corners.

use image::RgbImage;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Number of corners kept per rendered image.
pub const MAX_CORNERS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerFeature {
    /// Column, pixels.
    pub u: f64,
    /// Row, pixels.
    pub v: f64,
    pub score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CornerParams {
    /// Side of the box window summing the structure tensor (odd).
    pub window: usize,
    pub nms_radius: usize,
    /// Responses at or below `relative_threshold × max response` are dropped.
    pub relative_threshold: f64,
}

impl Default for CornerParams {
    fn default() -> Self {
        Self {
            window: 5,
            nms_radius: 7,
            relative_threshold: 1e-6,
        }
    }
}

/// Channel mean, in 0..=255.
pub fn grayscale(rgb: &RgbImage) -> Array2<f64> {
    let (w, h) = rgb.dimensions();
    Array2::from_shape_fn((h as usize, w as usize), |(r, c)| {
        let p = rgb.get_pixel(c as u32, r as u32).0;
        (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0
    })
}

pub fn detect_corners(rgb: &RgbImage, max_count: usize) -> Vec<CornerFeature> {
    detect_corners_gray(&grayscale(rgb), max_count, &CornerParams::default())
}

/// Smaller eigenvalue of the box-filtered structure tensor at every pixel.
pub fn min_eigen_response(gray: &Array2<f64>, window: usize) -> Array2<f64> {
    let (h, w) = gray.dim();
    let at = |r: isize, c: isize| {
        gray[[r.clamp(0, h as isize - 1) as usize, c.clamp(0, w as isize - 1) as usize]]
    };
    let mut ixx = Array2::zeros((h, w));
    let mut iyy = Array2::zeros((h, w));
    let mut ixy = Array2::zeros((h, w));
    for r in 0..h as isize {
        for c in 0..w as isize {
            let gx = 0.5 * (at(r, c + 1) - at(r, c - 1));
            let gy = 0.5 * (at(r + 1, c) - at(r - 1, c));
            let idx = [r as usize, c as usize];
            ixx[idx] = gx * gx;
            iyy[idx] = gy * gy;
            ixy[idx] = gx * gy;
        }
    }
    let (sxx, syy, sxy) = (
        box_sum(&ixx, window / 2),
        box_sum(&iyy, window / 2),
        box_sum(&ixy, window / 2),
    );
    Array2::from_shape_fn((h, w), |idx| {
        let (a, c, b) = (sxx[idx], syy[idx], sxy[idx]);
        let half_trace = 0.5 * (a + c);
        let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        (half_trace - disc).max(0.0)
    })
}

/// Sum over the in-bounds part of a `(2·radius + 1)²` window.
fn box_sum(values: &Array2<f64>, radius: usize) -> Array2<f64> {
    let (h, w) = values.dim();
    // Summed-area table with a zero border row/column.
    let mut sat = Array2::<f64>::zeros((h + 1, w + 1));
    for r in 0..h {
        for c in 0..w {
            sat[[r + 1, c + 1]] = values[[r, c]] + sat[[r, c + 1]] + sat[[r + 1, c]] - sat[[r, c]];
        }
    }
    Array2::from_shape_fn((h, w), |(r, c)| {
        let (r0, r1) = (r.saturating_sub(radius), (r + radius + 1).min(h));
        let (c0, c1) = (c.saturating_sub(radius), (c + radius + 1).min(w));
        sat[[r1, c1]] - sat[[r0, c1]] - sat[[r1, c0]] + sat[[r0, c0]]
    })
}

/// Local maxima of the response within `nms_radius`, strongest first.
///
/// Equal responses are broken by raster order so plateaus yield one corner.
pub fn detect_corners_gray(
    gray: &Array2<f64>,
    max_count: usize,
    params: &CornerParams,
) -> Vec<CornerFeature> {
    let response = min_eigen_response(gray, params.window);
    let peak = response.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) || max_count == 0 {
        return Vec::new();
    }
    let threshold = params.relative_threshold * peak;
    let (h, w) = response.dim();
    let rad = params.nms_radius as isize;
    let mut corners = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let s = response[[r, c]];
            if s <= threshold {
                continue;
            }
            let mut is_max = true;
            'scan: for dr in -rad..=rad {
                for dc in -rad..=rad {
                    if dr * dr + dc * dc > rad * rad || (dr == 0 && dc == 0) {
                        continue;
                    }
                    let (rr, cc) = (r as isize + dr, c as isize + dc);
                    if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                        continue;
                    }
                    let other = response[[rr as usize, cc as usize]];
                    let earlier = (dr, dc) < (0, 0);
                    if other > s || (other == s && earlier) {
                        is_max = false;
                        break 'scan;
                    }
                }
            }
            if is_max {
                corners.push(CornerFeature {
                    u: c as f64,
                    v: r as f64,
                    score: s,
                });
            }
        }
    }
    corners.sort_by(|a, b| b.score.total_cmp(&a.score));
    corners.truncate(max_count);
    corners
}

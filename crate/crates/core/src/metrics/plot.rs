//! Minimal scatter-plot renderer for error-over-depth series.

use std::path::Path;

use image::{Rgb, RgbImage};

use super::DepthErrorPoint;
use crate::error::Result;

pub struct PlotSeries<'a> {
    pub label: &'a str,
    pub points: &'a [DepthErrorPoint],
}

const PALETTE: [[u8; 3]; 6] = [
    [214, 39, 40],
    [31, 119, 180],
    [44, 160, 44],
    [255, 127, 14],
    [148, 103, 189],
    [23, 190, 207],
];

/// Writes a PNG scatter of AbsRel (y) over mean scene depth (x), one color
/// per series in palette order. Axes start at zero.
pub fn render_scatter(path: impl AsRef<Path>, series: &[PlotSeries<'_>], width: u32, height: u32) -> Result<()> {
    let image = draw(series, width.max(64), height.max(64));
    image.save(path)?;
    Ok(())
}

fn draw(series: &[PlotSeries<'_>], width: u32, height: u32) -> RgbImage {
    let mut img = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    let margin = 32u32;
    let (x0, y0) = (margin, height - margin);
    let (x1, y1) = (width - margin / 2, margin / 2);
    let points = series.iter().flat_map(|s| s.points.iter());
    let (xmax, ymax) = points.fold((0.0f64, 0.0f64), |(x, y), p| {
        (x.max(p.mean_depth), y.max(p.abs_rel))
    });
    let (xmax, ymax) = (nice(xmax), nice(ymax));

    let axis = Rgb([0, 0, 0]);
    for x in x0..=x1 {
        img.put_pixel(x, y0, axis);
    }
    for y in y1..=y0 {
        img.put_pixel(x0, y, axis);
    }
    for i in 1..=4 {
        let gx = x0 + (x1 - x0) * i / 4;
        let gy = y0 - (y0 - y1) * i / 4;
        for t in 0..4 {
            img.put_pixel(gx, y0 + t, axis);
            img.put_pixel(x0 - t, gy, axis);
        }
    }

    for (k, s) in series.iter().enumerate() {
        let color = Rgb(PALETTE[k % PALETTE.len()]);
        for p in s.points {
            if !(p.mean_depth.is_finite() && p.abs_rel.is_finite()) {
                continue;
            }
            let px = x0 as f64 + (x1 - x0) as f64 * (p.mean_depth / xmax).clamp(0.0, 1.0);
            let py = y0 as f64 - (y0 - y1) as f64 * (p.abs_rel / ymax).clamp(0.0, 1.0);
            for dy in -2i64..=2 {
                for dx in -2i64..=2 {
                    if dx * dx + dy * dy > 5 {
                        continue;
                    }
                    let (x, y) = (px.round() as i64 + dx, py.round() as i64 + dy);
                    if x >= 0 && y >= 0 && (x as u32) < width && (y as u32) < height {
                        img.put_pixel(x as u32, y as u32, color);
                    }
                }
            }
        }
    }
    img
}

/// Smallest value of the form {1, 2, 5}·10^k that is ≥ `v`.
fn nice(v: f64) -> f64 {
    if !(v > 0.0) || !v.is_finite() {
        return 1.0;
    }
    let base = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * base)
        .find(|&c| c >= v)
        .unwrap_or(10.0 * base)
}

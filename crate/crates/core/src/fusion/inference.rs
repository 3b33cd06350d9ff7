use candle_core::{Device, Tensor};
use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::{fuse, naive_scale, FusionModel};
use crate::error::{Error, Result};
use crate::radar::{rasterize, PixelObservation, DISK_RADIUS_PX};
use crate::DepthMap;

/// The three evaluated models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Radar-fusion model, output `d̂`.
    #[serde(rename = "ours")]
    Ours,
    /// Same architecture with the radar channel zeroed and fusion bypassed.
    #[serde(rename = "metric-baseline")]
    MetricBaseline,
    /// Baseline depth rescaled by the mean radar/prediction ratio.
    #[serde(rename = "naive")]
    Naive,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Ours, Variant::MetricBaseline, Variant::Naive];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Ours => "ours",
            Variant::MetricBaseline => "metric-baseline",
            Variant::Naive => "naive",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ours" => Ok(Variant::Ours),
            "metric-baseline" | "baseline" => Ok(Variant::MetricBaseline),
            "naive" => Ok(Variant::Naive),
            _ => Err(Error::InvalidArgument(format!(
                "unknown variant `{s}` (expected ours, metric-baseline or naive)"
            ))),
        }
    }
}

/// Per-pixel outputs for one frame.
#[derive(Clone, Debug)]
pub struct FusionOutput {
    pub d0: DepthMap,
    /// `None` for models without a weight head or when fusion is bypassed.
    pub w: Option<DepthMap>,
    pub fused: DepthMap,
}

/// Stacks frames into a `[B, C, H, W]` f32 tensor. RGB is scaled to 0–1; the
/// radar channel (present when `channels == 4`) holds meters, zero where a
/// frame has no sparse map.
pub fn input_batch(
    frames: &[(&RgbImage, Option<&DepthMap>)],
    channels: usize,
    device: &Device,
) -> Result<Tensor> {
    let Some((first, _)) = frames.first() else {
        return Err(Error::InvalidArgument("empty batch".into()));
    };
    let (w, h) = first.dimensions();
    let (w, h) = (w as usize, h as usize);
    let plane = h * w;
    let mut data = vec![0f32; frames.len() * channels * plane];
    for (b, (rgb, sparse)) in frames.iter().enumerate() {
        if rgb.dimensions() != (w as u32, h as u32) {
            return Err(Error::ShapeMismatch {
                expected: vec![h, w],
                actual: vec![rgb.height() as usize, rgb.width() as usize],
            });
        }
        let base = b * channels * plane;
        for (i, px) in rgb.pixels().enumerate() {
            for c in 0..3 {
                data[base + c * plane + i] = px.0[c] as f32 / 255.0;
            }
        }
        if let (4, Some(sparse)) = (channels, sparse) {
            if sparse.dim() != (h, w) {
                return Err(Error::ShapeMismatch {
                    expected: vec![h, w],
                    actual: sparse.shape().to_vec(),
                });
            }
            for (i, &d) in sparse.iter().enumerate() {
                data[base + 3 * plane + i] = d as f32;
            }
        }
    }
    Ok(Tensor::from_vec(data, (frames.len(), channels, h, w), device)?)
}

fn to_map(t: &Tensor, h: usize, w: usize) -> Result<DepthMap> {
    let v: Vec<f64> = t.to_dtype(candle_core::DType::F64)?.flatten_all()?.to_vec1()?;
    Ok(DepthMap::from_shape_vec((h, w), v).expect("tensor size matches map"))
}

/// Runs `model` on one frame and applies the variant's output rule.
///
/// `Ours` rasterizes the observations into the radar channel and fuses; the
/// baseline variants zero the radar channel (if the model has one) and use
/// `d0`, which `Naive` then rescales. Without observations `Ours` and `Naive`
/// both return `d0`.
pub fn predict(
    model: &FusionModel,
    rgb: &RgbImage,
    observations: &[PixelObservation],
    variant: Variant,
) -> Result<FusionOutput> {
    let (h, w) = (rgb.height() as usize, rgb.width() as usize);
    let channels = model.config().input_channels;
    let sparse = match variant {
        Variant::Ours => Some(rasterize(observations, (h, w), DISK_RADIUS_PX).grid),
        _ => None,
    };
    let input = input_batch(&[(rgb, sparse.as_ref())], channels, model.device())?;
    let out = model.forward_eval(&input)?;
    let d0 = to_map(&out.depth, h, w)?;
    let weight = match (&out.weight, variant) {
        (Some(t), Variant::Ours) => Some(to_map(t, h, w)?),
        _ => None,
    };
    let fused = match (variant, &weight) {
        (Variant::Ours, Some(wm)) => fuse(&d0, wm, observations)?,
        (Variant::Naive, _) if !observations.is_empty() => naive_scale(&d0, observations)?,
        _ => d0.clone(),
    };
    Ok(FusionOutput { d0, w: weight, fused })
}

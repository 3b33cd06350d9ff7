//! Depth metrics against sparse ground truth, dataset summaries and
//! error-over-depth series.

mod plot;
mod report;

pub use plot::{render_scatter, PlotSeries};
pub use report::{
    format_table, read_series_csv, write_series_csv, DepthErrorPoint, FrameRecord, MetricsReport,
    TableRow,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar::PixelObservation;
use crate::{DepthMap, Mask};

/// δ1 threshold on `max(pred/gt, gt/pred)`.
pub const DELTA1_THRESHOLD: f64 = 1.25;

/// Pixels with finite, positive ground truth.
pub fn valid_mask(gt: &DepthMap) -> Mask {
    gt.mapv(|d| d > 0.0 && d.is_finite())
}

fn check(pred: &DepthMap, gt: &DepthMap, mask: &Mask) -> Result<()> {
    for shape in [pred.shape(), mask.shape()] {
        if shape != gt.shape() {
            return Err(Error::ShapeMismatch {
                expected: gt.shape().to_vec(),
                actual: shape.to_vec(),
            });
        }
    }
    Ok(())
}

fn masked<'a>(
    pred: &'a DepthMap,
    gt: &'a DepthMap,
    mask: &'a Mask,
) -> Result<impl Iterator<Item = (f64, f64)> + 'a> {
    check(pred, gt, mask)?;
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyMask);
    }
    Ok(pred
        .iter()
        .zip(gt)
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((&p, &g), _)| (p, g)))
}

/// Mean of `|pred − gt| / gt` over the mask.
pub fn abs_rel(pred: &DepthMap, gt: &DepthMap, mask: &Mask) -> Result<f64> {
    let mut acc = MetricAccumulator::default();
    acc.add_frame(pred, gt, mask)?;
    acc.abs_rel()
}

/// Fraction of masked pixels with `max(pred/gt, gt/pred) < 1.25`.
pub fn delta1(pred: &DepthMap, gt: &DepthMap, mask: &Mask) -> Result<f64> {
    delta_threshold(pred, gt, mask, DELTA1_THRESHOLD)
}

pub fn delta_threshold(pred: &DepthMap, gt: &DepthMap, mask: &Mask, threshold: f64) -> Result<f64> {
    let mut n = 0usize;
    let mut hits = 0usize;
    for (p, g) in masked(pred, gt, mask)? {
        n += 1;
        if (p / g).max(g / p) < threshold {
            hits += 1;
        }
    }
    Ok(hits as f64 / n as f64)
}

/// Root mean square of `pred − gt` over the mask, meters.
pub fn rmse(pred: &DepthMap, gt: &DepthMap, mask: &Mask) -> Result<f64> {
    let mut acc = MetricAccumulator::default();
    acc.add_frame(pred, gt, mask)?;
    acc.rmse()
}

/// Mean ground truth over the mask.
pub fn mean_depth(gt: &DepthMap, mask: &Mask) -> Result<f64> {
    let (sum, n) = masked(gt, gt, mask)?.fold((0.0, 0usize), |(s, n), (_, g)| (s + g, n + 1));
    Ok(sum / n as f64)
}

/// Pixel-pooled sums. Merging accumulators is associative, so frames may be
/// reduced in any grouping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricAccumulator {
    pub pixels: usize,
    pub abs_rel_sum: f64,
    pub delta1_hits: usize,
    pub squared_error_sum: f64,
}

impl MetricAccumulator {
    pub fn add_frame(&mut self, pred: &DepthMap, gt: &DepthMap, mask: &Mask) -> Result<()> {
        let mut frame = MetricAccumulator::default();
        for (p, g) in masked(pred, gt, mask)? {
            frame.pixels += 1;
            frame.abs_rel_sum += (p - g).abs() / g;
            if (p / g).max(g / p) < DELTA1_THRESHOLD {
                frame.delta1_hits += 1;
            }
            frame.squared_error_sum += (p - g) * (p - g);
        }
        self.merge(&frame);
        Ok(())
    }

    pub fn merge(&mut self, other: &MetricAccumulator) {
        self.pixels += other.pixels;
        self.abs_rel_sum += other.abs_rel_sum;
        self.delta1_hits += other.delta1_hits;
        self.squared_error_sum += other.squared_error_sum;
    }

    fn count(&self) -> Result<f64> {
        if self.pixels == 0 {
            return Err(Error::EmptyMask);
        }
        Ok(self.pixels as f64)
    }

    pub fn abs_rel(&self) -> Result<f64> {
        Ok(self.abs_rel_sum / self.count()?)
    }

    pub fn delta1(&self) -> Result<f64> {
        Ok(self.delta1_hits as f64 / self.count()?)
    }

    pub fn rmse(&self) -> Result<f64> {
        Ok((self.squared_error_sum / self.count()?).sqrt())
    }
}

/// Accumulates frames into a [`MetricsReport`] with pooled metrics.
#[derive(Clone, Debug, Default)]
pub struct ReportBuilder {
    pooled: MetricAccumulator,
    per_frame: Vec<FrameRecord>,
}

impl ReportBuilder {
    pub fn add(&mut self, id: &str, pred: &DepthMap, gt: &DepthMap, mask: &Mask) -> Result<()> {
        let mut frame = MetricAccumulator::default();
        frame.add_frame(pred, gt, mask)?;
        self.pooled.merge(&frame);
        self.per_frame.push(FrameRecord {
            id: id.to_string(),
            mean_depth: mean_depth(gt, mask)?,
            abs_rel: frame.abs_rel()?,
        });
        Ok(())
    }

    pub fn pooled(&self) -> &MetricAccumulator {
        &self.pooled
    }

    pub fn finish(self) -> Result<MetricsReport> {
        Ok(MetricsReport {
            absrel: self.pooled.abs_rel()?,
            delta1: self.pooled.delta1()?,
            rmse: self.pooled.rmse()?,
            n_frames: self.per_frame.len(),
            per_frame: self.per_frame,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub avg_sparse_depth_count: f64,
    pub gt_coverage_percent: f64,
    pub n_frames: usize,
}

/// Per-frame averages of radar observation count and ground-truth coverage.
pub fn dataset_summary<'a, I>(frames: I) -> Result<DatasetSummary>
where
    I: IntoIterator<Item = (&'a [PixelObservation], &'a Mask)>,
{
    let (mut n, mut points, mut coverage) = (0usize, 0.0, 0.0);
    for (obs, mask) in frames {
        n += 1;
        points += obs.len() as f64;
        let valid = mask.iter().filter(|&&m| m).count();
        coverage += if mask.is_empty() {
            0.0
        } else {
            100.0 * valid as f64 / mask.len() as f64
        };
    }
    if n == 0 {
        return Err(Error::InvalidArgument("dataset summary needs at least one frame".into()));
    }
    Ok(DatasetSummary {
        avg_sparse_depth_count: points / n as f64,
        gt_coverage_percent: coverage / n as f64,
        n_frames: n,
    })
}

/// `(mean scene depth, frame AbsRel)` for every `subsample`-th frame,
/// starting at frame 0. Frames whose mask is empty yield no record.
pub fn error_vs_depth<'a, I>(frames: I, subsample: usize) -> Result<Vec<DepthErrorPoint>>
where
    I: IntoIterator<Item = (&'a DepthMap, &'a DepthMap, &'a Mask)>,
{
    if subsample == 0 {
        return Err(Error::InvalidArgument("subsample factor must be at least 1".into()));
    }
    let mut out = Vec::new();
    for (pred, gt, mask) in frames.into_iter().step_by(subsample) {
        match (mean_depth(gt, mask), abs_rel(pred, gt, mask)) {
            (Ok(mean_depth), Ok(abs_rel)) => out.push(DepthErrorPoint { mean_depth, abs_rel }),
            (Err(Error::EmptyMask), _) | (_, Err(Error::EmptyMask)) => {}
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Ok(out)
}

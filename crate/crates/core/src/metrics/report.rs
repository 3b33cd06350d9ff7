use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub id: String,
    /// Mean ground truth over valid pixels, meters.
    pub mean_depth: f64,
    pub abs_rel: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub absrel: f64,
    pub delta1: f64,
    pub rmse: f64,
    pub n_frames: usize,
    pub per_frame: Vec<FrameRecord>,
}

impl MetricsReport {
    /// Every `subsample`-th frame of the per-frame records as a plot series.
    pub fn series(&self, subsample: usize) -> Vec<DepthErrorPoint> {
        self.per_frame
            .iter()
            .step_by(subsample.max(1))
            .map(|f| DepthErrorPoint {
                mean_depth: f.mean_depth,
                abs_rel: f.abs_rel,
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthErrorPoint {
    #[serde(rename = "mean_scene_depth_m")]
    pub mean_depth: f64,
    pub abs_rel: f64,
}

pub fn write_series_csv(path: impl AsRef<Path>, points: &[DepthErrorPoint]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    if points.is_empty() {
        writer.write_record(["mean_scene_depth_m", "abs_rel"])?;
    }
    for p in points {
        writer.serialize(p)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_series_csv(path: impl AsRef<Path>) -> Result<Vec<DepthErrorPoint>> {
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// One line of the comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub dataset: String,
    pub model: String,
    pub absrel: f64,
    pub delta1: f64,
    pub rmse: f64,
    /// Relative AbsRel reduction against the dataset's reference model, %.
    pub absrel_improvement_percent: Option<f64>,
}

/// Plain-text table with columns Dataset, Model, AbsRel, δ1, RMSE, ΔAbsRel.
pub fn format_table(rows: &[TableRow]) -> String {
    let dw = rows.iter().map(|r| r.dataset.chars().count()).max().unwrap_or(0).max(7);
    let mw = rows.iter().map(|r| r.model.chars().count()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<dw$}  {:<mw$}  {:>8}  {:>8}  {:>8}  {:>9}",
        "Dataset", "Model", "AbsRel", "δ1", "RMSE", "ΔAbsRel"
    );
    for r in rows {
        let imp = r
            .absrel_improvement_percent
            .map(|p| format!("{p:+.1}%"))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<dw$}  {:<mw$}  {:>8.3}  {:>8.3}  {:>8.3}  {:>9}",
            r.dataset, r.model, r.absrel, r.delta1, r.rmse, imp
        );
    }
    out
}

use std::path::{Path, PathBuf};

use candle_core::{DType, Device};
use image::RgbImage;
use radar_depth::fusion::{load_checkpoint, predict, save_checkpoint, FusionModel, Variant};
use radar_depth::metrics::{
    dataset_summary, format_table, read_series_csv, render_scatter, valid_mask, write_series_csv, DatasetSummary,
    MetricsReport, PlotSeries, ReportBuilder, TableRow,
};
use radar_depth::radar::{
    back_project, group_frames, observations_from_frames, read_calibration, write_calibration, write_observations,
    write_radar_log, Calibration, PixelObservation, RadarReturn, RigidTransform, SNR_CUTOFF_DB,
};
use radar_depth::raster::write_pfm;
use radar_depth::rng::{derive_seed, rng_from};
use radar_depth::scene::dataset::{Dataset, DatasetManifest, SampleRecord, FORMAT_VERSION};
use radar_depth::scene::{detect_corners, generate_sample, SynthConfig, TerrainParams, MAX_CORNERS};
use radar_depth::training::{
    select_best_checkpoint, train, CheckpointRef, CheckpointStore, DirCheckpoints, MemoryCheckpoints, MetricsLog,
    TrainConfig, TrainMode, TrainingFrame, ValidationFrame, ValidationHistory,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};

pub const CALIBRATION_FILE: &str = "calibration.toml";
pub const BEST_CHECKPOINT_FILE: &str = "best_checkpoint.json";
pub const METRICS_LOG_FILE: &str = "metrics.csv";
pub const EVAL_INDEX_FILE: &str = "eval.json";

fn required<'a>(value: &'a Option<PathBuf>, what: &str) -> CliResult<&'a PathBuf> {
    value
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("missing {what}")))
}

fn existing(config: &PipelineConfig, path: &Path, what: &str) -> CliResult<PathBuf> {
    let resolved = config.resolve(path);
    if !resolved.exists() {
        return Err(CliError::Config(format!("{what} {} does not exist", resolved.display())));
    }
    Ok(resolved)
}

fn existing_checkpoint(config: &PipelineConfig, stem: &Path, what: &str) -> CliResult<PathBuf> {
    let resolved = config.resolve(stem);
    let (weights, manifest) = radar_depth::fusion::checkpoint_paths(&resolved);
    if !weights.exists() || !manifest.exists() {
        return Err(CliError::Config(format!("{what} {} not found", resolved.display())));
    }
    Ok(resolved)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("malformed {}: {e}", path.display())))
}

fn synth_config(config: &PipelineConfig) -> SynthConfig {
    let s = &config.synth;
    SynthConfig {
        width: s.width,
        height: s.height,
        hfov_deg: s.hfov_deg,
        terrain: TerrainParams {
            grid: s.terrain_grid,
            ..Default::default()
        },
        ..Default::default()
    }
}

/// Radar → camera transform written alongside synthetic radar logs.
pub fn synthetic_extrinsics() -> RigidTransform {
    let a = 2f64.to_radians();
    RigidTransform::from_row_major(
        [1.0, 0.0, 0.0, 0.0, a.cos(), -a.sin(), 0.0, a.sin(), a.cos()],
        [0.08, -0.03, 0.05],
    )
    .expect("rotation is orthonormal")
}

/// Three radar frames whose last one carries the observations (back-projected
/// into the radar frame, SNR above the cutoff); every frame also holds
/// low-SNR clutter that the SNR filter removes.
fn synthetic_radar_log(obs: &[PixelObservation], calibration: &Calibration, seed: u64) -> Vec<RadarReturn> {
    let mut rng = rng_from(seed, &[0x106]);
    let mut out = Vec::new();
    for frame in 0..3u32 {
        let timestamp = 0.1 * frame as f64;
        for _ in 0..2 {
            let clutter = PixelObservation {
                u: rng.random_range(0.0..calibration.intrinsics.width as f64),
                v: rng.random_range(0.0..calibration.intrinsics.height as f64),
                depth: rng.random_range(1.0..60.0),
            };
            out.push(RadarReturn {
                position: back_project(&clutter, &calibration.intrinsics, &calibration.extrinsics),
                snr_db: rng.random_range(0.0..SNR_CUTOFF_DB - 1.0),
                timestamp,
            });
        }
        if frame == 2 {
            for o in obs {
                out.push(RadarReturn {
                    position: back_project(o, &calibration.intrinsics, &calibration.extrinsics),
                    snr_db: rng.random_range(SNR_CUTOFF_DB + 1.0..40.0),
                    timestamp,
                });
            }
        }
    }
    out
}

/// Generates `config.synth.count` samples into `config.dataset`.
pub fn cmd_synth(config: &PipelineConfig) -> CliResult<DatasetManifest> {
    let dir = config.resolve(required(&config.dataset, "--dataset (output directory)")?);
    let synth = synth_config(config);
    let intrinsics = synth.intrinsics().map_err(|e| CliError::Config(e.to_string()))?;
    if config.synth.count == 0 {
        return Err(CliError::Config("sample count must be at least 1".into()));
    }
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let calibration = Calibration {
        intrinsics,
        extrinsics: synthetic_extrinsics(),
    };
    if config.synth.radar_log {
        write_calibration(dir.join(CALIBRATION_FILE), &calibration)?;
    }

    let mut samples = Vec::with_capacity(config.synth.count);
    for i in 0..config.synth.count as u64 {
        let s = generate_sample(&synth, config.seed, i)?;
        let id = format!("{i:06}");
        let record = SampleRecord {
            id: id.clone(),
            scene_seed: s.scene_seed,
            pose_seed: s.pose_seed,
            radar_seed: s.radar_seed,
            rgb: format!("{id}_rgb.png"),
            depth: format!("{id}_depth.pfm"),
            radar: Some(format!("{id}_radar.csv")),
            radar_log: config.synth.radar_log.then(|| format!("{id}_radar_log.csv")),
        };
        s.view
            .view
            .rgb
            .save(dir.join(&record.rgb))
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", record.rgb)))?;
        write_pfm(dir.join(&record.depth), &s.view.view.depth)?;
        write_observations(dir.join(record.radar.as_ref().expect("set above")), &s.observations)?;
        if let Some(log) = &record.radar_log {
            let returns = synthetic_radar_log(&s.observations, &calibration, s.radar_seed);
            write_radar_log(dir.join(log), &returns)?;
        }
        samples.push(record);
    }
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        name: dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into()),
        seed: config.seed,
        intrinsics,
        generator: Some(synth),
        samples,
    };
    manifest.write(&dir)?;
    Ok(manifest)
}

/// A dataset frame with the radar observations used for evaluation.
pub struct Frame {
    pub id: String,
    pub rgb: RgbImage,
    pub depth: radar_depth::DepthMap,
    pub observations: Vec<PixelObservation>,
}

/// Loads every frame of a dataset. Raw radar logs are preferred over
/// pre-projected observations and need a calibration (the configured one or
/// `calibration.toml` in the dataset).
pub fn load_frames(config: &PipelineConfig, dir: &Path) -> CliResult<(Dataset, Vec<Frame>)> {
    let dataset = Dataset::open(dir).map_err(|e| CliError::Config(format!("cannot open dataset {}: {e}", dir.display())))?;
    let calibration_path = match &config.calibration {
        Some(p) => Some(existing(config, p, "calibration")?),
        None => Some(dir.join(CALIBRATION_FILE)).filter(|p| p.exists()),
    };
    let calibration = calibration_path.map(read_calibration).transpose()?;
    let mut frames = Vec::with_capacity(dataset.len());
    for i in 0..dataset.len() {
        let sample = dataset.load(i)?;
        let observations = match (&sample.radar_log, &calibration, sample.observations) {
            (Some(log), Some(calib), _) => observations_from_frames(&group_frames(log), calib),
            (_, _, Some(obs)) => obs,
            (Some(_), None, None) => {
                return Err(CliError::Config(format!(
                    "sample {} has only a raw radar log and no calibration is available",
                    sample.id
                )))
            }
            (None, _, None) => Vec::new(),
        };
        frames.push(Frame {
            id: sample.id,
            rgb: sample.rgb,
            depth: sample.depth,
            observations,
        });
    }
    if frames.is_empty() {
        return Err(CliError::Config(format!("dataset {} has no samples", dir.display())));
    }
    Ok((dataset, frames))
}

fn training_frames(frames: Vec<Frame>) -> Vec<TrainingFrame> {
    frames
        .into_iter()
        .filter_map(|f| {
            let corners = detect_corners(&f.rgb, MAX_CORNERS);
            let usable = corners.iter().any(|c| {
                let (r, col) = (c.v.round() as usize, c.u.round() as usize);
                f.depth.get((r, col)).is_some_and(|d| *d > 0.0 && d.is_finite())
            });
            usable.then_some(TrainingFrame {
                rgb: f.rgb,
                depth: f.depth,
                corners,
            })
        })
        .collect()
}

fn validation_frames(frames: Vec<Frame>) -> Vec<ValidationFrame> {
    frames
        .into_iter()
        .map(|f| ValidationFrame {
            id: f.id,
            rgb: f.rgb,
            depth: f.depth,
            observations: f.observations,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestCheckpointRecord {
    pub epoch: usize,
    /// Checkpoint stem relative to the run directory.
    pub checkpoint: String,
    pub val_absrel: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub run_dir: PathBuf,
    pub history: ValidationHistory,
    pub best: BestCheckpointRecord,
}

fn default_run_dir(config: &PipelineConfig, mode: TrainMode) -> PathBuf {
    let mode = match mode {
        TrainMode::Fusion => "ours",
        TrainMode::VisionOnly => "metric-baseline",
    };
    PathBuf::from(format!("runs/{mode}-{}-seed{}", config.preset.name(), config.seed))
}

/// Fine-tunes a model on `config.dataset`, validating on
/// `config.val_dataset`. Writes per-epoch checkpoints, the metrics log, the
/// history and the best-checkpoint record into the run directory.
pub fn cmd_train(config: &PipelineConfig, mode: TrainMode, run_dir: Option<&Path>) -> CliResult<TrainOutcome> {
    let train_config = config.train_config()?;
    let train_dir = existing(config, required(&config.dataset, "--dataset (training set)")?, "dataset")?;
    let val_dir = existing(config, required(&config.val_dataset, "--val-dataset")?, "validation dataset")?;
    let init = config
        .init_checkpoint
        .as_ref()
        .map(|p| existing_checkpoint(config, p, "initial checkpoint"))
        .transpose()?;
    let run_dir = config.resolve(&run_dir.map(Path::to_path_buf).unwrap_or_else(|| default_run_dir(config, mode)));

    let (train_set, frames) = load_frames(config, &train_dir)?;
    let train_frames = training_frames(frames);
    if train_frames.is_empty() {
        return Err(CliError::Config("no training frame has usable corners".into()));
    }
    let (_, val) = load_frames(config, &val_dir)?;
    let val = validation_frames(val);
    let k = &train_set.manifest().intrinsics;
    let model_config = config
        .preset
        .config(k.height, k.width)
        .map_err(|e| CliError::Config(e.to_string()))?;

    std::fs::create_dir_all(&run_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", run_dir.display())))?;
    let device = Device::Cpu;
    let seed = train_config.seed;
    let base = match init {
        Some(stem) => load_checkpoint(&stem, DType::F32, &device)?,
        None => {
            let stub = FusionModel::new(&model_config.vision_only(), derive_seed(seed, &[1]), DType::F32, &device)?;
            let pretrain = TrainConfig {
                epochs: config.pretrain.epochs,
                steps_per_epoch: config.pretrain.steps_per_epoch,
                seed: derive_seed(seed, &[2]),
                ..train_config.clone()
            };
            let mut store = MemoryCheckpoints::new();
            let history = train(&stub, &train_frames, &val, &pretrain, TrainMode::VisionOnly, &mut store, &mut |_| Ok(()))?;
            store.restore(&select_best_checkpoint(&history)?, &stub)?;
            save_checkpoint(&stub, &run_dir.join("pretrained"))?;
            stub
        }
    };
    let model = if base.config().input_channels == 3 {
        base.extend(derive_seed(seed, &[3]))?
    } else {
        base
    };

    let mut store = DirCheckpoints::new(run_dir.join("checkpoints"))?;
    let mut log = MetricsLog::create(run_dir.join(METRICS_LOG_FILE))?;
    let history = train(&model, &train_frames, &val, &train_config, mode, &mut store, &mut |r| log.append(r))?;
    let best: CheckpointRef = select_best_checkpoint(&history)?;
    let best = BestCheckpointRecord {
        epoch: best.epoch,
        checkpoint: format!("checkpoints/{}", best.location),
        val_absrel: history.records()[best.epoch].val_absrel,
    };
    write_json(&run_dir.join(BEST_CHECKPOINT_FILE), &best)?;
    write_json(&run_dir.join("history.json"), &history)?;
    write_json(&run_dir.join("train_config.json"), &train_config)?;
    Ok(TrainOutcome { run_dir, history, best })
}

/// Resolves a checkpoint argument: a run directory (its best checkpoint) or
/// a checkpoint stem.
pub fn resolve_checkpoint(config: &PipelineConfig, path: &Path, what: &str) -> CliResult<PathBuf> {
    let resolved = config.resolve(path);
    let record = resolved.join(BEST_CHECKPOINT_FILE);
    if resolved.is_dir() && record.exists() {
        let best: BestCheckpointRecord = read_json(&record)?;
        return existing_checkpoint(config, &resolved.join(best.checkpoint), what);
    }
    existing_checkpoint(config, path, what)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalIndex {
    pub dataset: String,
    pub variants: Vec<Variant>,
    pub summary: DatasetSummary,
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub variants: Vec<Variant>,
    pub subsample: usize,
    pub dump_predictions: bool,
    pub out: Option<PathBuf>,
}

/// Evaluates the requested variants on `config.dataset`.
///
/// Writes `<out>/<variant>/report.json` and `error_vs_depth.csv` per variant,
/// plus `summary.json`, `table.txt` and an index for `compare`/`plot`.
pub fn cmd_eval(config: &PipelineConfig, options: &EvalOptions) -> CliResult<Vec<(Variant, MetricsReport)>> {
    if options.subsample == 0 {
        return Err(CliError::Config("subsample factor must be at least 1".into()));
    }
    let data_dir = existing(config, required(&config.dataset, "--dataset")?, "dataset")?;
    let needs = |v: Variant| options.variants.contains(&v);
    let ours_stem = if needs(Variant::Ours) {
        Some(resolve_checkpoint(config, required(&config.checkpoint, "--checkpoint for variant ours")?, "checkpoint")?)
    } else {
        None
    };
    let baseline_stem = if needs(Variant::MetricBaseline) || needs(Variant::Naive) {
        let path = config
            .baseline_checkpoint
            .as_ref()
            .ok_or_else(|| CliError::Config("missing --baseline-checkpoint for the baseline variants".into()))?;
        Some(resolve_checkpoint(config, path, "baseline checkpoint")?)
    } else {
        None
    };

    let (dataset, frames) = load_frames(config, &data_dir)?;
    let name = dataset.manifest().name.clone();
    let out = config.resolve(&options.out.clone().unwrap_or_else(|| PathBuf::from(format!("eval/{name}"))));
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;

    let device = Device::Cpu;
    let ours = ours_stem.map(|s| load_checkpoint(&s, DType::F32, &device)).transpose()?;
    let baseline = baseline_stem.map(|s| load_checkpoint(&s, DType::F32, &device)).transpose()?;
    if let Some(m) = &ours {
        if m.config().output_channels != 2 {
            return Err(CliError::Config("variant ours needs a checkpoint with a weight head".into()));
        }
    }

    let masks: Vec<_> = frames.iter().map(|f| valid_mask(&f.depth)).collect();
    let summary = dataset_summary(frames.iter().zip(&masks).map(|(f, m)| (&f.observations[..], m)))?;
    write_json(&out.join("summary.json"), &summary)?;

    let mut reports = Vec::new();
    for &variant in &options.variants {
        let model = match variant {
            Variant::Ours => ours.as_ref(),
            _ => baseline.as_ref(),
        }
        .expect("checked above");
        let dir = out.join(variant.name());
        std::fs::create_dir_all(&dir)?;
        if options.dump_predictions {
            std::fs::create_dir_all(dir.join("pred"))?;
        }
        let mut builder = ReportBuilder::default();
        for (f, mask) in frames.iter().zip(&masks) {
            let pred = predict(model, &f.rgb, &f.observations, variant)?;
            if options.dump_predictions {
                write_pfm(dir.join(format!("pred/{}_d0.pfm", f.id)), &pred.d0)?;
                if let Some(w) = &pred.w {
                    write_pfm(dir.join(format!("pred/{}_w.pfm", f.id)), w)?;
                }
                write_pfm(dir.join(format!("pred/{}_fused.pfm", f.id)), &pred.fused)?;
            }
            if mask.iter().any(|&m| m) {
                builder.add(&f.id, &pred.fused, &f.depth, mask)?;
            }
        }
        let report = builder.finish()?;
        write_json(&dir.join("report.json"), &report)?;
        write_series_csv(dir.join("error_vs_depth.csv"), &report.series(options.subsample))?;
        reports.push((variant, report));
    }

    let rows = table_rows(&name, &reports);
    std::fs::write(out.join("table.txt"), format_table(&rows))?;
    write_json(
        &out.join(EVAL_INDEX_FILE),
        &EvalIndex {
            dataset: name,
            variants: options.variants.clone(),
            summary,
        },
    )?;
    Ok(reports)
}

/// Table rows in variant order; improvements are relative to the
/// metric-baseline row when present.
pub fn table_rows(dataset: &str, reports: &[(Variant, MetricsReport)]) -> Vec<TableRow> {
    let reference = reports
        .iter()
        .find(|(v, _)| *v == Variant::MetricBaseline)
        .map(|(_, r)| r.absrel);
    reports
        .iter()
        .map(|(v, r)| TableRow {
            dataset: dataset.to_string(),
            model: v.name().to_string(),
            absrel: r.absrel,
            delta1: r.delta1,
            rmse: r.rmse,
            absrel_improvement_percent: match (reference, v) {
                (Some(b), Variant::Ours | Variant::Naive) if b > 0.0 => Some(100.0 * (1.0 - r.absrel / b)),
                _ => None,
            },
        })
        .collect()
}

fn read_eval(dir: &Path) -> CliResult<(EvalIndex, Vec<(Variant, MetricsReport)>)> {
    let index: EvalIndex = read_json(&dir.join(EVAL_INDEX_FILE))?;
    let reports = index
        .variants
        .iter()
        .map(|v| Ok((*v, read_json(&dir.join(v.name()).join("report.json"))?)))
        .collect::<CliResult<Vec<_>>>()?;
    Ok((index, reports))
}

/// Joint table over several evaluation directories.
pub fn cmd_compare(config: &PipelineConfig, eval_dirs: &[PathBuf], out: Option<&Path>) -> CliResult<String> {
    if eval_dirs.is_empty() {
        return Err(CliError::Config("compare needs at least one evaluation directory".into()));
    }
    let mut rows = Vec::new();
    for dir in eval_dirs {
        let dir = existing(config, dir, "evaluation directory")?;
        let (index, reports) = read_eval(&dir)?;
        rows.extend(table_rows(&index.dataset, &reports));
    }
    let table = format_table(&rows);
    if let Some(out) = out {
        let out = config.resolve(out);
        std::fs::write(&out, &table)?;
        write_json(&out.with_extension("json"), &rows)?;
    }
    Ok(table)
}

/// Scatter of every variant's error-over-depth series in one image.
pub fn cmd_plot(config: &PipelineConfig, eval_dir: &Path, out: Option<&Path>, size: (u32, u32)) -> CliResult<PathBuf> {
    let dir = existing(config, eval_dir, "evaluation directory")?;
    let index: EvalIndex = read_json(&dir.join(EVAL_INDEX_FILE))?;
    let series = index
        .variants
        .iter()
        .map(|v| Ok((v.name(), read_series_csv(dir.join(v.name()).join("error_vs_depth.csv"))?)))
        .collect::<CliResult<Vec<_>>>()?;
    let plots: Vec<PlotSeries<'_>> = series
        .iter()
        .map(|(label, points)| PlotSeries { label, points })
        .collect();
    let out = out.map(|p| config.resolve(p)).unwrap_or_else(|| dir.join("error_vs_depth.png"));
    render_scatter(&out, &plots, size.0, size.1)?;
    Ok(out)
}

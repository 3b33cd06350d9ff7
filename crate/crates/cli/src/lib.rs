//! Command-line pipelines: `synth`, `train`, `eval`, `compare` and `plot`.
//!
//! Configuration is a TOML file ([`config::PipelineConfig`]) overlaid with
//! flags; flags win. Exit status is 0 on success, 2 for configuration or
//! input errors and 3 for runtime failures.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use radar_depth::fusion::{ModelPreset, Variant};
use radar_depth::training::TrainMode;

use crate::commands::EvalOptions;
use crate::config::{load_train_overrides, PipelineConfig, Schedule, TrainOverrides, OUTPUT_ROOT_ENV};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "radar-depth", version, about = "Radar-fused metric depth pipelines")]
pub struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Model preset: toy-S or toy-B.
    #[arg(long, global = true)]
    pub preset: Option<ModelPreset>,
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Directory relative paths resolve against.
    #[arg(long, global = true, env = OUTPUT_ROOT_ENV)]
    pub output_root: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset into --dataset.
    Synth(SynthArgs),
    /// Fine-tune on --dataset, validating on --val-dataset.
    Train(TrainArgs),
    /// Evaluate checkpoints on --dataset.
    Eval(EvalArgs),
    /// Joint table over evaluation directories.
    Compare(CompareArgs),
    /// Error-over-depth scatter for an evaluation directory.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Also write raw radar logs and a calibration file.
    #[arg(long)]
    pub radar_log: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Four-channel input with the fusion weight head.
    Fusion,
    /// Radar channel zeroed, fusion weight ignored.
    VisionOnly,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub val_dataset: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Fusion)]
    pub mode: ModeArg,
    /// Starting checkpoint stem; a vision-only one is extended.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat training config (TOML) with TrainConfig keys.
    #[arg(long)]
    pub train_config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub schedule: Option<Schedule>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub steps_per_epoch: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub base_lr: Option<f64>,
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    #[arg(long)]
    pub pretrain_steps: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Ours,
    #[value(alias = "baseline")]
    MetricBaseline,
    Naive,
    All,
}

impl VariantArg {
    pub fn variants(&self) -> Vec<Variant> {
        match self {
            VariantArg::Ours => vec![Variant::Ours],
            VariantArg::MetricBaseline => vec![Variant::MetricBaseline],
            VariantArg::Naive => vec![Variant::Naive],
            VariantArg::All => Variant::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum, default_value_t = VariantArg::All)]
    pub variant: VariantArg,
    /// Fusion checkpoint stem or training run directory.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Vision-only checkpoint stem or training run directory.
    #[arg(long)]
    pub baseline_checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep every n-th frame in the error-over-depth series.
    #[arg(long, default_value_t = 10)]
    pub subsample: usize,
    /// Write d0, w and fused maps as PFM.
    #[arg(long)]
    pub dump_predictions: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(required = true)]
    pub eval_dirs: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    pub eval_dir: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 800)]
    pub width: u32,
    #[arg(long, default_value_t = 600)]
    pub height: u32,
}

impl Cli {
    /// File configuration overlaid with environment and flags.
    pub fn pipeline_config(&self) -> CliResult<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        config.apply_env();
        if let Some(root) = &self.output_root {
            config.output_root = root.clone();
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(preset) = self.preset {
            config.preset = preset;
        }
        if let Some(dataset) = &self.dataset {
            config.dataset = Some(dataset.clone());
        }
        match &self.command {
            Command::Synth(a) => {
                config.synth.count = a.count.unwrap_or(config.synth.count);
                config.synth.width = a.width.unwrap_or(config.synth.width);
                config.synth.height = a.height.unwrap_or(config.synth.height);
                config.synth.radar_log |= a.radar_log;
            }
            Command::Train(a) => {
                if a.val_dataset.is_some() {
                    config.val_dataset = a.val_dataset.clone();
                }
                if a.init.is_some() {
                    config.init_checkpoint = a.init.clone();
                }
                if let Some(s) = a.schedule {
                    config.schedule = s;
                }
                if let Some(path) = &a.train_config {
                    config.train = config.train.merged(&load_train_overrides(path)?);
                }
                config.train = config.train.merged(&TrainOverrides {
                    epochs: a.epochs,
                    steps_per_epoch: a.steps_per_epoch,
                    batch_size: a.batch_size,
                    base_lr: a.base_lr,
                    seed: self.seed,
                    ..Default::default()
                });
                config.pretrain.epochs = a.pretrain_epochs.unwrap_or(config.pretrain.epochs);
                config.pretrain.steps_per_epoch = a.pretrain_steps.unwrap_or(config.pretrain.steps_per_epoch);
            }
            Command::Eval(a) => {
                if a.checkpoint.is_some() {
                    config.checkpoint = a.checkpoint.clone();
                }
                if a.baseline_checkpoint.is_some() {
                    config.baseline_checkpoint = a.baseline_checkpoint.clone();
                }
                if a.calibration.is_some() {
                    config.calibration = a.calibration.clone();
                }
            }
            Command::Compare(_) | Command::Plot(_) => {}
        }
        Ok(config)
    }
}

/// Parses `args` and runs the subcommand; the returned line is the result
/// summary printed on success.
pub fn run<I, T>(args: I) -> CliResult<String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Config(config::one_line(&e.to_string())))?;
    execute(&cli)
}

pub fn execute(cli: &Cli) -> CliResult<String> {
    let config = cli.pipeline_config()?;
    match &cli.command {
        Command::Synth(_) => {
            let manifest = commands::cmd_synth(&config)?;
            Ok(format!("wrote {} samples to dataset {}", manifest.samples.len(), manifest.name))
        }
        Command::Train(a) => {
            let mode = match a.mode {
                ModeArg::Fusion => TrainMode::Fusion,
                ModeArg::VisionOnly => TrainMode::VisionOnly,
            };
            let outcome = commands::cmd_train(&config, mode, a.out.as_deref())?;
            Ok(format!(
                "trained {} epochs into {}; best epoch {} (val AbsRel {:.4})",
                outcome.history.len(),
                outcome.run_dir.display(),
                outcome.best.epoch,
                outcome.best.val_absrel
            ))
        }
        Command::Eval(a) => {
            let options = EvalOptions {
                variants: a.variant.variants(),
                subsample: a.subsample,
                dump_predictions: a.dump_predictions,
                out: a.out.clone(),
            };
            let reports = commands::cmd_eval(&config, &options)?;
            Ok(reports
                .iter()
                .map(|(v, r)| format!("{v}: AbsRel {:.4} δ1 {:.4} RMSE {:.3}", r.absrel, r.delta1, r.rmse))
                .collect::<Vec<_>>()
                .join("; "))
        }
        Command::Compare(a) => commands::cmd_compare(&config, &a.eval_dirs, a.out.as_deref()),
        Command::Plot(a) => {
            let path = commands::cmd_plot(&config, &a.eval_dir, a.out.as_deref(), (a.width, a.height))?;
            Ok(format!("wrote {}", path.display()))
        }
    }
}

//! Pipeline configuration: a TOML file overlaid with command-line flags.

use std::path::{Path, PathBuf};

use radar_depth::fusion::ModelPreset;
use radar_depth::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable overriding `output_root`.
pub const OUTPUT_ROOT_ENV: &str = "RADAR_DEPTH_OUTPUT_ROOT";

/// Partial [`TrainConfig`]; keys match its field names.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOverrides {
    pub epochs: Option<usize>,
    pub steps_per_epoch: Option<usize>,
    pub batch_size: Option<usize>,
    pub base_lr: Option<f64>,
    pub new_param_lr_multiplier: Option<f64>,
    pub poly_power: Option<f64>,
    pub silog_lambda: Option<f64>,
    pub silog_alpha: Option<f64>,
    pub seed: Option<u64>,
    pub grad_clip_norm: Option<f64>,
}

impl TrainOverrides {
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs.unwrap_or(base.epochs),
            steps_per_epoch: self.steps_per_epoch.unwrap_or(base.steps_per_epoch),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            base_lr: self.base_lr.unwrap_or(base.base_lr),
            new_param_lr_multiplier: self.new_param_lr_multiplier.unwrap_or(base.new_param_lr_multiplier),
            poly_power: self.poly_power.unwrap_or(base.poly_power),
            silog_lambda: self.silog_lambda.unwrap_or(base.silog_lambda),
            silog_alpha: self.silog_alpha.unwrap_or(base.silog_alpha),
            seed: self.seed.unwrap_or(base.seed),
            grad_clip_norm: self.grad_clip_norm.unwrap_or(base.grad_clip_norm),
        }
    }

    /// `other` wins where it sets a value.
    pub fn merged(&self, other: &TrainOverrides) -> TrainOverrides {
        TrainOverrides {
            epochs: other.epochs.or(self.epochs),
            steps_per_epoch: other.steps_per_epoch.or(self.steps_per_epoch),
            batch_size: other.batch_size.or(self.batch_size),
            base_lr: other.base_lr.or(self.base_lr),
            new_param_lr_multiplier: other.new_param_lr_multiplier.or(self.new_param_lr_multiplier),
            poly_power: other.poly_power.or(self.poly_power),
            silog_lambda: other.silog_lambda.or(self.silog_lambda),
            silog_alpha: other.silog_alpha.or(self.silog_alpha),
            seed: other.seed.or(self.seed),
            grad_clip_norm: other.grad_clip_norm.or(self.grad_clip_norm),
        }
    }
}

/// Base training schedule the overrides apply to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// 25 epochs × 50 000 steps, base learning rate 5e-6.
    #[default]
    Full,
    /// 10 epochs × 200 steps for toy models.
    Desk,
}

impl Schedule {
    pub fn base(&self) -> TrainConfig {
        match self {
            Schedule::Full => TrainConfig::default(),
            Schedule::Desk => TrainConfig::desk(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub hfov_deg: f64,
    /// Terrain heightfield resolution.
    pub terrain_grid: usize,
    /// Also write raw radar logs and a calibration file.
    pub radar_log: bool,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            count: 10_000,
            width: 640,
            height: 480,
            hfov_deg: 64.0,
            terrain_grid: 256,
            radar_log: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainSettings {
    /// Vision-only epochs used to build a starting model when no initial
    /// checkpoint is given.
    pub epochs: usize,
    pub steps_per_epoch: usize,
}

impl Default for PretrainSettings {
    fn default() -> Self {
        Self {
            epochs: 4,
            steps_per_epoch: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Relative paths below resolve against this directory.
    pub output_root: PathBuf,
    pub seed: u64,
    pub preset: ModelPreset,
    pub dataset: Option<PathBuf>,
    pub val_dataset: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
    /// Starting weights for training (vision-only or fusion checkpoint stem).
    pub init_checkpoint: Option<PathBuf>,
    /// Fusion model evaluated as "ours".
    pub checkpoint: Option<PathBuf>,
    /// Vision-only model evaluated as "metric-baseline" and "naive".
    pub baseline_checkpoint: Option<PathBuf>,
    pub schedule: Schedule,
    pub train: TrainOverrides,
    pub pretrain: PretrainSettings,
    pub synth: SynthSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            output_root: PathBuf::from("."),
            seed: 0,
            preset: ModelPreset::ToyS,
            dataset: None,
            val_dataset: None,
            calibration: None,
            init_checkpoint: None,
            checkpoint: None,
            baseline_checkpoint: None,
            schedule: Schedule::Full,
            train: TrainOverrides::default(),
            pretrain: PretrainSettings::default(),
            synth: SynthSettings::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {}", path.display(), one_line(&e.to_string()))))
    }

    /// Applies the output-root environment override.
    pub fn apply_env(&mut self) {
        if let Some(root) = std::env::var_os(OUTPUT_ROOT_ENV) {
            if !root.is_empty() {
                self.output_root = PathBuf::from(root);
            }
        }
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.output_root.join(path)
        }
    }

    /// Resolved training configuration; the pipeline seed fills in when the
    /// overrides leave `seed` unset.
    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let mut config = self.train.apply(&self.schedule.base());
        if self.train.seed.is_none() {
            config.seed = self.seed;
        }
        config.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(config)
    }
}

/// Reads a flat training config file.
pub fn load_train_overrides(path: &Path) -> Result<TrainOverrides, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read training config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| {
        CliError::Config(format!("invalid training config {}: {}", path.display(), one_line(&e.to_string())))
    })
}

pub fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c: PipelineConfig = toml::from_str(
            r#"
            seed = 7
            preset = "toy-B"
            schedule = "desk"
            [train]
            epochs = 2
            base_lr = 1e-3
            [synth]
            count = 3
            "#,
        )
        .unwrap();
        assert_eq!(c.preset, ModelPreset::ToyB);
        assert_eq!(c.synth.count, 3);
        assert_eq!(c.synth.width, 640);
        let t = c.train_config().unwrap();
        assert_eq!((t.epochs, t.steps_per_epoch, t.base_lr, t.seed), (2, 200, 1e-3, 7));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<PipelineConfig>("sede = 1").is_err());
        assert!(toml::from_str::<TrainOverrides>("epochz = 1").is_err());
        let t: TrainOverrides = toml::from_str("epochs = 3\nsilog_lambda = 0.5").unwrap();
        assert_eq!(t.epochs, Some(3));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let c = PipelineConfig {
            train: TrainOverrides {
                silog_lambda: Some(1.5),
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(matches!(c.train_config(), Err(CliError::Config(_))));
    }

    #[test]
    fn merge_prefers_later() {
        let a = TrainOverrides { epochs: Some(1), batch_size: Some(2), ..Default::default() };
        let b = TrainOverrides { epochs: Some(5), ..Default::default() };
        let m = a.merged(&b);
        assert_eq!((m.epochs, m.batch_size), (Some(5), Some(2)));
    }

    #[test]
    fn full_schedule_defaults() {
        let t = PipelineConfig::default().train_config().unwrap();
        assert_eq!((t.epochs, t.steps_per_epoch, t.base_lr), (25, 50_000, 5e-6));
        assert_eq!(t.learning_rates(0), (5e-6, 5e-5));
    }
}

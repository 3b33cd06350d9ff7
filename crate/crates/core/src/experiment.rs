//! Small end-to-end comparison on scale-randomized terrain: a vision-only
//! model is pretrained on RGB, extended with the radar channel, then
//! fine-tuned once with fusion ("ours") and once with the radar channel
//! zeroed ("metric-baseline"). Both are scored on held-out frames together
//! with the naive rescaling and a radar-mean fallback.

use std::time::{Duration, Instant};

use candle_core::{DType, Device};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fusion::{predict, FusionModel, ModelPreset, Variant};
use crate::metrics::{valid_mask, MetricAccumulator};
use crate::radar::radar_mean_depth;
use crate::rng::derive_seed;
use crate::scene::{generate_sample, SynthConfig, TerrainParams};
use crate::training::{
    select_best_checkpoint, train, CheckpointStore, MemoryCheckpoints, TrainConfig, TrainMode, TrainingFrame,
    ValidationFrame, ValidationHistory,
};
use crate::DepthMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyExperimentConfig {
    pub synth: SynthConfig,
    pub preset: ModelPreset,
    pub pretrain: TrainConfig,
    pub finetune: TrainConfig,
    pub n_pretrain: usize,
    pub n_train: usize,
    /// Frames used for checkpoint selection.
    pub n_val: usize,
    /// Held-out frames the final numbers are computed on.
    pub n_test: usize,
}

impl Default for ToyExperimentConfig {
    fn default() -> Self {
        Self {
            synth: SynthConfig {
                width: 64,
                height: 48,
                terrain: TerrainParams {
                    grid: 128,
                    ..Default::default()
                },
                ..Default::default()
            },
            preset: ModelPreset::ToyS,
            pretrain: TrainConfig {
                epochs: 4,
                steps_per_epoch: 200,
                ..TrainConfig::desk()
            },
            finetune: TrainConfig::desk(),
            n_pretrain: 400,
            n_train: 400,
            n_val: 50,
            n_test: 60,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub absrel: f64,
    pub delta1: f64,
    pub rmse: f64,
}

impl Scores {
    fn from_acc(acc: &MetricAccumulator) -> Result<Self> {
        Ok(Self {
            absrel: acc.abs_rel()?,
            delta1: acc.delta1()?,
            rmse: acc.rmse()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyExperimentResult {
    pub seed: u64,
    pub ours: Scores,
    pub baseline: Scores,
    pub naive: Scores,
    /// Prediction ≡ mean radar depth of the frame.
    pub radar_fallback: Scores,
    pub ours_history: ValidationHistory,
    pub baseline_history: ValidationHistory,
    pub elapsed: Duration,
}

impl ToyExperimentResult {
    /// `1 − ours / baseline` on AbsRel.
    pub fn relative_improvement(&self) -> f64 {
        1.0 - self.ours.absrel / self.baseline.absrel
    }
}

fn frames(config: &SynthConfig, seed: u64, count: usize) -> Result<(Vec<TrainingFrame>, Vec<ValidationFrame>)> {
    let mut train = Vec::with_capacity(count);
    let mut val = Vec::with_capacity(count);
    for i in 0..count as u64 {
        let s = generate_sample(config, seed, i)?;
        let view = s.view.view;
        val.push(ValidationFrame {
            id: format!("{i:05}"),
            rgb: view.rgb.clone(),
            depth: view.depth.clone(),
            observations: s.observations,
        });
        train.push(TrainingFrame {
            rgb: view.rgb,
            depth: view.depth,
            corners: s.view.corners,
        });
    }
    Ok((train, val))
}

fn fine_tune(
    base: &FusionModel,
    train_set: &[TrainingFrame],
    val: &[ValidationFrame],
    config: &TrainConfig,
    mode: TrainMode,
) -> Result<(FusionModel, ValidationHistory)> {
    let model = base.clone_detached()?;
    let mut store = MemoryCheckpoints::new();
    let history = train(&model, train_set, val, config, mode, &mut store, &mut |_| Ok(()))?;
    store.restore(&select_best_checkpoint(&history)?, &model)?;
    Ok((model, history))
}

pub fn run_toy_experiment(config: &ToyExperimentConfig, seed: u64) -> Result<ToyExperimentResult> {
    let start = Instant::now();
    let device = Device::Cpu;
    let synth = &config.synth;
    let stream = |k: u64| derive_seed(seed, &[0xe4e, k]);

    let (pre_train, _) = frames(synth, stream(0), config.n_pretrain)?;
    let (train_set, _) = frames(synth, stream(1), config.n_train)?;
    let (_, val) = frames(synth, stream(2), config.n_val)?;
    let (_, test) = frames(synth, stream(3), config.n_test)?;

    let model_config = config.preset.config(synth.height, synth.width)?;
    let stub = FusionModel::new(&model_config.vision_only(), stream(4), DType::F32, &device)?;
    let pretrain = TrainConfig {
        seed: stream(5),
        ..config.pretrain.clone()
    };
    let (_, pre_val) = frames(synth, stream(6), config.n_val.min(20))?;
    let (stub, _) = fine_tune(&stub, &pre_train, &pre_val, &pretrain, TrainMode::VisionOnly)?;

    let extended = stub.extend(stream(7))?;
    let finetune = TrainConfig {
        seed: stream(8),
        ..config.finetune.clone()
    };
    let (ours, ours_history) = fine_tune(&extended, &train_set, &val, &finetune, TrainMode::Fusion)?;
    let (baseline, baseline_history) = fine_tune(&extended, &train_set, &val, &finetune, TrainMode::VisionOnly)?;

    let mut acc = [MetricAccumulator::default(); 4];
    for f in &test {
        let mask = valid_mask(&f.depth);
        let outputs = [
            predict(&ours, &f.rgb, &f.observations, Variant::Ours)?.fused,
            predict(&baseline, &f.rgb, &f.observations, Variant::MetricBaseline)?.fused,
            predict(&baseline, &f.rgb, &f.observations, Variant::Naive)?.fused,
            DepthMap::from_elem(f.depth.dim(), radar_mean_depth(&f.observations).unwrap_or(0.0)),
        ];
        for (a, pred) in acc.iter_mut().zip(&outputs) {
            a.add_frame(pred, &f.depth, &mask)?;
        }
    }
    Ok(ToyExperimentResult {
        seed,
        ours: Scores::from_acc(&acc[0])?,
        baseline: Scores::from_acc(&acc[1])?,
        naive: Scores::from_acc(&acc[2])?,
        radar_fallback: Scores::from_acc(&acc[3])?,
        ours_history,
        baseline_history,
        elapsed: start.elapsed(),
    })
}

use candle_core::Tensor;
use image::RgbImage;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{lr_at_step, silog_loss_tensor, Adam, AdamConfig, CheckpointStore, EpochRecord, ValidationHistory};
use crate::error::{Error, Result};
use crate::fusion::{input_batch, predict, FusionModel, Variant};
use crate::metrics::{valid_mask, MetricAccumulator};
use crate::radar::{radar_mean_depth, rasterize, PixelObservation, DISK_RADIUS_PX};
use crate::rng::{derive_seed, rng_from};
use crate::scene::{synthesize_radar, CornerFeature, RADAR_POINTS_PER_FRAME};
use crate::DepthMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub batch_size: usize,
    /// Learning rate of the pretrained group at step 0.
    pub base_lr: f64,
    /// New-group learning rate relative to the pretrained group.
    pub new_param_lr_multiplier: f64,
    pub poly_power: f64,
    pub silog_lambda: f64,
    pub silog_alpha: f64,
    pub seed: u64,
    /// Global gradient-norm clip; `0` disables clipping.
    pub grad_clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 25,
            steps_per_epoch: 50_000,
            batch_size: 4,
            base_lr: 5e-6,
            new_param_lr_multiplier: 10.0,
            poly_power: 0.9,
            silog_lambda: 0.85,
            silog_alpha: 10.0,
            seed: 0,
            grad_clip_norm: 1.0,
        }
    }
}

impl TrainConfig {
    /// Small-scale schedule for toy models on a CPU.
    pub fn desk() -> Self {
        Self {
            epochs: 10,
            steps_per_epoch: 200,
            base_lr: 3e-4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.epochs == 0 || self.steps_per_epoch == 0 || self.batch_size == 0 {
            return bad("epochs, steps_per_epoch and batch_size must be at least 1");
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return bad("base_lr must be positive");
        }
        if !(self.new_param_lr_multiplier > 0.0) || !(self.poly_power >= 0.0) {
            return bad("new_param_lr_multiplier must be positive and poly_power non-negative");
        }
        if !(self.silog_lambda > 0.0 && self.silog_lambda <= 1.0) {
            return bad("silog_lambda must lie in (0, 1]");
        }
        if !(self.silog_alpha > 0.0) || !(self.grad_clip_norm >= 0.0) {
            return bad("silog_alpha must be positive and grad_clip_norm non-negative");
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        self.epochs * self.steps_per_epoch
    }

    /// (pretrained, new) learning rates at a global step.
    pub fn learning_rates(&self, step: usize) -> (f64, f64) {
        let lr = lr_at_step(step, self.total_steps(), self.base_lr, self.poly_power);
        (lr, lr * self.new_param_lr_multiplier)
    }
}

/// What the loss supervises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// Radar channel filled per step, loss on the fused depth.
    Fusion,
    /// Radar channel zeroed, loss on the depth head.
    VisionOnly,
}

impl TrainMode {
    pub fn eval_variant(&self) -> Variant {
        match self {
            TrainMode::Fusion => Variant::Ours,
            TrainMode::VisionOnly => Variant::MetricBaseline,
        }
    }
}

/// A rendered view with the corners radar returns are synthesized from.
#[derive(Clone, Debug)]
pub struct TrainingFrame {
    pub rgb: RgbImage,
    pub depth: DepthMap,
    pub corners: Vec<CornerFeature>,
}

#[derive(Clone, Debug)]
pub struct ValidationFrame {
    pub id: String,
    pub rgb: RgbImage,
    pub depth: DepthMap,
    pub observations: Vec<PixelObservation>,
}

/// Stacked network input and supervision for one step.
pub struct Batch {
    pub input: Tensor,
    pub gt: Tensor,
    pub mask: Tensor,
    /// `[B, 1, 1]` mean radar depth per sample (zeros in vision-only mode).
    pub radar_mean: Tensor,
}

/// Draws fresh radar returns for every frame (fusion mode) and stacks the
/// batch. `seeds[i]` drives the radar draw of `frames[i]`.
pub fn make_batch(
    frames: &[&TrainingFrame],
    seeds: &[u64],
    mode: TrainMode,
    model: &FusionModel,
) -> Result<Batch> {
    let b = frames.len();
    let (h, w) = frames[0].depth.dim();
    let mut sparse = Vec::with_capacity(b);
    let mut means = Vec::with_capacity(b);
    for (frame, &seed) in frames.iter().zip(seeds) {
        if mode == TrainMode::Fusion {
            let (k_min, k_max) = RADAR_POINTS_PER_FRAME;
            let obs = synthesize_radar(&frame.corners, &frame.depth, seed, k_min, k_max)?;
            means.push(radar_mean_depth(&obs).ok_or(Error::NoRadar)? as f32);
            sparse.push(Some(rasterize(&obs, (h, w), DISK_RADIUS_PX).grid));
        } else {
            means.push(0.0);
            sparse.push(None);
        }
    }
    let pairs: Vec<_> = frames.iter().zip(&sparse).map(|(f, s)| (&f.rgb, s.as_ref())).collect();
    let device = model.device();
    let input = input_batch(&pairs, model.config().input_channels, device)?;
    let mut gt = Vec::with_capacity(b * h * w);
    let mut mask = Vec::with_capacity(b * h * w);
    for f in frames {
        for (&d, &m) in f.depth.iter().zip(&valid_mask(&f.depth)) {
            gt.push(if m { d as f32 } else { 1.0 });
            mask.push(m as u8 as f32);
        }
    }
    Ok(Batch {
        input,
        gt: Tensor::from_vec(gt, (b, h, w), device)?,
        mask: Tensor::from_vec(mask, (b, h, w), device)?,
        radar_mean: Tensor::from_vec(means, (b, 1, 1), device)?,
    })
}

/// Scalar training loss with the autodiff graph attached.
pub fn batch_loss(model: &FusionModel, batch: &Batch, mode: TrainMode, config: &TrainConfig) -> Result<Tensor> {
    let out = model.forward(&batch.input)?;
    let pred = match (mode, &out.weight) {
        (TrainMode::Fusion, Some(w)) => {
            let mean = batch.radar_mean.to_dtype(w.dtype())?;
            (w * &out.depth)?.add(&w.affine(-1.0, 1.0)?.broadcast_mul(&mean)?)?
        }
        (TrainMode::Fusion, None) => {
            return Err(Error::InvalidArgument("fusion training needs a model with a weight head".into()))
        }
        (TrainMode::VisionOnly, _) => out.depth,
    };
    silog_loss_tensor(&pred, &batch.gt, &batch.mask, config.silog_lambda, config.silog_alpha)
}

/// Pooled validation metrics of `model` under `variant`.
pub fn validate(model: &FusionModel, frames: &[ValidationFrame], variant: Variant) -> Result<MetricAccumulator> {
    let mut acc = MetricAccumulator::default();
    for f in frames {
        let out = predict(model, &f.rgb, &f.observations, variant)?;
        acc.add_frame(&out.fused, &f.depth, &valid_mask(&f.depth))?;
    }
    Ok(acc)
}

/// Fine-tunes `model` in place.
///
/// Each epoch visits a fresh shuffle of `train`; in fusion mode every step
/// redraws the radar returns of each sample. After each epoch the model is
/// validated, checkpointed through `store` and the record passed to
/// `on_epoch`. Identical inputs and seed give identical histories.
pub fn train(
    model: &FusionModel,
    train: &[TrainingFrame],
    val: &[ValidationFrame],
    config: &TrainConfig,
    mode: TrainMode,
    store: &mut dyn CheckpointStore,
    on_epoch: &mut dyn FnMut(&EpochRecord) -> Result<()>,
) -> Result<ValidationHistory> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument("training and validation sets must be non-empty".into()));
    }
    if mode == TrainMode::Fusion && model.config().output_channels != 2 {
        return Err(Error::InvalidArgument("fusion training needs a model with a weight head".into()));
    }
    let mut adam = Adam::new(model.params(), AdamConfig::default())?;
    let clip = (config.grad_clip_norm > 0.0).then_some(config.grad_clip_norm);
    let mut history = ValidationHistory::new();
    let per_epoch = config.steps_per_epoch * config.batch_size;

    for epoch in 0..config.epochs {
        let mut order = Vec::with_capacity(per_epoch + train.len());
        let mut round = 0u64;
        while order.len() < per_epoch {
            let mut perm: Vec<usize> = (0..train.len()).collect();
            perm.shuffle(&mut rng_from(config.seed, &[0x5eed, epoch as u64, round]));
            order.extend(perm);
            round += 1;
        }

        let first_step = epoch * config.steps_per_epoch;
        let (lr0_p, lr0_n) = config.learning_rates(first_step);
        let mut loss_sum = 0.0;
        for step in 0..config.steps_per_epoch {
            let idx = &order[step * config.batch_size..(step + 1) * config.batch_size];
            let frames: Vec<&TrainingFrame> = idx.iter().map(|&i| &train[i]).collect();
            let seeds: Vec<u64> = (0..frames.len())
                .map(|i| derive_seed(config.seed, &[0x4ada, epoch as u64, step as u64, i as u64]))
                .collect();
            let batch = make_batch(&frames, &seeds, mode, model)?;
            let loss = batch_loss(model, &batch, mode, config)?;
            let value = loss.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?;
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step, value });
            }
            loss_sum += value;
            let grads = loss.backward()?;
            let (lr_p, lr_n) = config.learning_rates(first_step + step);
            adam.step(&grads, lr_p, lr_n, clip)?;
        }

        let metrics = validate(model, val, mode.eval_variant())?;
        let checkpoint = store.save(epoch, model)?;
        let record = EpochRecord {
            epoch,
            train_loss_mean: loss_sum / config.steps_per_epoch as f64,
            val_absrel: metrics.abs_rel()?,
            val_delta1: metrics.delta1()?,
            val_rmse: metrics.rmse()?,
            lr_pretrained: lr0_p,
            lr_new: lr0_n,
            checkpoint,
        };
        on_epoch(&record)?;
        history.push(record)?;
    }
    Ok(history)
}


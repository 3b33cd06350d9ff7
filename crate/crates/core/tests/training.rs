use candle_core::{DType, Device};
use radar_depth::fusion::{FusionModel, ModelConfig, Variant};
use radar_depth::scene::{generate_sample, SynthConfig, TerrainParams};
use radar_depth::training::{
    batch_loss, make_batch, select_best_checkpoint, train, validate, CheckpointStore, DirCheckpoints,
    MemoryCheckpoints, TrainConfig, TrainMode, TrainingFrame, ValidationFrame,
};

fn model_config() -> ModelConfig {
    ModelConfig {
        patch_size: 4,
        embed_dim: 16,
        num_heads: 2,
        num_blocks: 1,
        input_channels: 4,
        output_channels: 2,
        max_depth: 100.0,
        head_channels: 4,
        mlp_ratio: 2,
        pos_grid: (6, 8),
    }
}

fn frames(seed: u64, n: usize) -> (Vec<TrainingFrame>, Vec<ValidationFrame>) {
    let synth = SynthConfig {
        width: 32,
        height: 24,
        terrain: TerrainParams {
            grid: 64,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut train = Vec::new();
    let mut val = Vec::new();
    for i in 0..n as u64 {
        let s = generate_sample(&synth, seed, i).unwrap();
        val.push(ValidationFrame {
            id: i.to_string(),
            rgb: s.view.view.rgb.clone(),
            depth: s.view.view.depth.clone(),
            observations: s.observations,
        });
        train.push(TrainingFrame {
            rgb: s.view.view.rgb,
            depth: s.view.view.depth,
            corners: s.view.corners,
        });
    }
    (train, val)
}

fn tiny_schedule(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 2,
        steps_per_epoch: 2,
        batch_size: 2,
        seed,
        ..TrainConfig::desk()
    }
}

fn extended(seed: u64) -> FusionModel {
    FusionModel::new(&model_config().vision_only(), seed, DType::F32, &Device::Cpu)
        .unwrap()
        .extend(seed + 1)
        .unwrap()
}

#[test]
fn single_epoch_single_step_run() {
    let (tr, val) = frames(1, 3);
    let model = extended(3);
    let config = TrainConfig {
        epochs: 1,
        steps_per_epoch: 1,
        batch_size: 1,
        ..TrainConfig::desk()
    };
    let mut store = MemoryCheckpoints::new();
    let mut seen = Vec::new();
    let history = train(&model, &tr, &val, &config, TrainMode::Fusion, &mut store, &mut |r| {
        seen.push(r.epoch);
        Ok(())
    })
    .unwrap();
    assert_eq!(history.len(), 1);
    assert_eq!(seen, vec![0]);
    let r = &history.records()[0];
    assert!(r.train_loss_mean.is_finite() && r.val_absrel.is_finite());
    assert_eq!((r.lr_pretrained, r.lr_new), (config.base_lr, config.base_lr * 10.0));
}

#[test]
fn one_step_moves_the_new_head() {
    let (tr, val) = frames(2, 2);
    let model = extended(5);
    let grads_model = model.clone_detached().unwrap();
    let config = TrainConfig {
        epochs: 1,
        steps_per_epoch: 1,
        batch_size: 2,
        ..TrainConfig::desk()
    };
    let refs: Vec<&TrainingFrame> = tr.iter().collect();
    let batch = make_batch(&refs, &[1, 2], TrainMode::Fusion, &grads_model).unwrap();
    let grads = batch_loss(&grads_model, &batch, TrainMode::Fusion, &config)
        .unwrap()
        .backward()
        .unwrap();
    for p in grads_model.params().iter().filter(|p| p.name.starts_with("head.fusion_weight")) {
        let g = grads.get(p.var.as_tensor()).expect("gradient reaches the weight head");
        let norm = g.sqr().unwrap().sum_all().unwrap().to_scalar::<f32>().unwrap();
        assert!(norm > 0.0, "{}", p.name);
    }

    let before = model.state().unwrap();
    train(&model, &tr, &val, &config, TrainMode::Fusion, &mut MemoryCheckpoints::new(), &mut |_| Ok(())).unwrap();
    let after = model.state().unwrap();
    for name in ["head.fusion_weight.weight", "patch_embed.radar_weight"] {
        let diff = (&after[name] - &before[name]).unwrap().abs().unwrap().sum_all().unwrap();
        assert!(diff.to_scalar::<f32>().unwrap() > 0.0, "{name}");
    }
}

#[test]
fn identical_seeds_give_identical_histories() {
    let (tr, val) = frames(3, 4);
    let run = |seed| {
        let model = extended(7);
        let history = train(
            &model,
            &tr,
            &val,
            &tiny_schedule(seed),
            TrainMode::Fusion,
            &mut MemoryCheckpoints::new(),
            &mut |_| Ok(()),
        )
        .unwrap();
        history.absrel()
    };
    let a = run(4);
    assert_eq!(a, run(4));
    assert_ne!(a, run(5));
}

#[test]
fn best_checkpoint_restores_its_validation_score() {
    let (tr, val) = frames(4, 4);
    let model = extended(9);
    let dir = tempfile::tempdir().unwrap();
    let mut store = DirCheckpoints::new(dir.path()).unwrap();
    let history = train(&model, &tr, &val, &tiny_schedule(1), TrainMode::Fusion, &mut store, &mut |_| Ok(())).unwrap();
    let best = select_best_checkpoint(&history).unwrap();
    let min = history.absrel().into_iter().fold(f64::INFINITY, f64::min);
    assert_eq!(history.records()[best.epoch].val_absrel, min);
    store.restore(&best, &model).unwrap();
    let restored = validate(&model, &val, Variant::Ours).unwrap().abs_rel().unwrap();
    assert!((restored - min).abs() < 1e-12);
}

#[test]
fn vision_only_training_ignores_radar() {
    let (tr, val) = frames(5, 3);
    let model = FusionModel::new(&model_config().vision_only(), 2, DType::F32, &Device::Cpu).unwrap();
    let history = train(
        &model,
        &tr,
        &val,
        &tiny_schedule(2),
        TrainMode::VisionOnly,
        &mut MemoryCheckpoints::new(),
        &mut |_| Ok(()),
    )
    .unwrap();
    assert_eq!(history.len(), 2);
    assert!(train(&model, &tr, &val, &tiny_schedule(2), TrainMode::Fusion, &mut MemoryCheckpoints::new(), &mut |_| Ok(()))
        .is_err());
}

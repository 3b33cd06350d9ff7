use std::path::Path;
use std::process::Command;

use radar_depth::fusion::Variant;
use radar_depth::metrics::read_series_csv;
use radar_depth::scene::dataset::Dataset;
use radar_depth_cli::run;

fn bin(root: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_radar-depth"));
    cmd.env("RADAR_DEPTH_OUTPUT_ROOT", root);
    cmd
}

fn args(root: &Path, rest: &str) -> Vec<String> {
    let mut v = vec!["radar-depth".to_string(), "--output-root".into(), root.display().to_string()];
    v.extend(rest.split_whitespace().map(String::from));
    v
}

#[test]
fn synth_train_eval_compare_plot() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    run(args(root, "synth --dataset train --count 6 --width 64 --height 48 --seed 1")).unwrap();
    run(args(root, "synth --dataset val --count 4 --width 64 --height 48 --seed 2 --radar-log")).unwrap();
    assert_eq!(Dataset::open(root.join("val")).unwrap().len(), 4);
    assert!(root.join("val/calibration.toml").exists());

    let schedule = "--schedule desk --epochs 2 --steps-per-epoch 2 --batch-size 2 --pretrain-epochs 1 --pretrain-steps 2";
    run(args(root, &format!("train --dataset train --val-dataset val {schedule} --out ours"))).unwrap();
    run(args(root, &format!("train --dataset train --val-dataset val {schedule} --mode vision-only --init ours/pretrained --out base")))
        .unwrap();
    let log = std::fs::read_to_string(root.join("ours/metrics.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
    assert!(log.starts_with("epoch,train_loss_mean,val_absrel"));
    assert!(root.join("ours/checkpoints/epoch_001.safetensors").exists());

    let summary = run(args(
        root,
        "eval --dataset val --checkpoint ours --baseline-checkpoint base --out ev --subsample 2 --dump-predictions",
    ))
    .unwrap();
    assert!(summary.contains("ours") && summary.contains("naive"));
    for v in Variant::ALL {
        let series = read_series_csv(root.join("ev").join(v.name()).join("error_vs_depth.csv")).unwrap();
        assert_eq!(series.len(), 2);
    }
    assert!(root.join("ev/ours/pred/000000_w.pfm").exists());
    assert!(root.join("ev/table.txt").exists());

    let table = run(args(root, "compare ev --out table.txt")).unwrap();
    assert!(table.contains("metric-baseline"));
    assert!(root.join("table.json").exists());
    run(args(root, "plot ev")).unwrap();
    assert!(root.join("ev/error_vs_depth.png").exists());
}

#[test]
fn exit_codes_and_single_line_errors() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let out = bin(root).args(["eval", "--dataset", "missing"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.trim_end().lines().count(), 1, "{stderr}");

    let out = bin(root).args(["train", "--dataset", "x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(root.join("bad.toml"), "sede = 3\n").unwrap();
    let out = bin(root).args(["--config", "bad.toml", "synth"]).current_dir(root).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin(root).arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));

    std::fs::write(root.join("blocker"), "").unwrap();
    let out = bin(root)
        .args(["synth", "--dataset", "blocker/data", "--count", "1", "--width", "64", "--height", "48"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let config = root.join("pipeline.toml");
    std::fs::write(
        &config,
        "seed = 5\ndataset = \"from_config\"\n[synth]\ncount = 2\nwidth = 64\nheight = 48\nterrain_grid = 64\n",
    )
    .unwrap();
    let c = config.display().to_string();
    run(args(root, &format!("--config {c} synth"))).unwrap();
    let m = Dataset::open(root.join("from_config")).unwrap();
    assert_eq!((m.len(), m.manifest().seed), (2, 5));
    run(args(root, &format!("--config {c} --seed 9 --dataset flagged synth --count 3"))).unwrap();
    let m = Dataset::open(root.join("flagged")).unwrap();
    assert_eq!((m.len(), m.manifest().seed), (3, 9));
}

use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{checkpoint_paths, save_checkpoint, FusionModel};

/// Where an epoch's weights were stored.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointRef {
    pub epoch: usize,
    /// Store-specific location: a key for in-memory stores, a file stem
    /// relative to the checkpoint directory otherwise.
    pub location: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss_mean: f64,
    pub val_absrel: f64,
    pub val_delta1: f64,
    pub val_rmse: f64,
    /// Learning rates at the epoch's first step.
    pub lr_pretrained: f64,
    pub lr_new: f64,
    pub checkpoint: CheckpointRef,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationHistory {
    records: Vec<EpochRecord>,
}

impl ValidationHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record; epochs must be strictly increasing.
    pub fn push(&mut self, record: EpochRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.epoch <= last.epoch {
                return Err(Error::InvalidArgument(format!(
                    "epoch {} recorded after epoch {}",
                    record.epoch, last.epoch
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn absrel(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.val_absrel).collect()
    }
}

/// The record with the lowest validation AbsRel; ties go to the earliest
/// epoch.
pub fn best_epoch(history: &ValidationHistory) -> Result<&EpochRecord> {
    let mut best: Option<&EpochRecord> = None;
    for r in history.records() {
        if best.is_none_or(|b| r.val_absrel < b.val_absrel) {
            best = Some(r);
        }
    }
    best.ok_or(Error::EmptyHistory)
}

pub fn select_best_checkpoint(history: &ValidationHistory) -> Result<CheckpointRef> {
    Ok(best_epoch(history)?.checkpoint.clone())
}

pub trait CheckpointStore {
    fn save(&mut self, epoch: usize, model: &FusionModel) -> Result<CheckpointRef>;
    /// Overwrites `model`'s parameters with the stored ones.
    fn restore(&self, checkpoint: &CheckpointRef, model: &FusionModel) -> Result<()>;
}

#[derive(Default)]
pub struct MemoryCheckpoints {
    states: BTreeMap<String, HashMap<String, Tensor>>,
}

impl MemoryCheckpoints {
    pub fn new() -> Self {
        Self::default()
    }
}

impl CheckpointStore for MemoryCheckpoints {
    fn save(&mut self, epoch: usize, model: &FusionModel) -> Result<CheckpointRef> {
        let location = format!("epoch_{epoch:03}");
        self.states.insert(location.clone(), model.state()?);
        Ok(CheckpointRef { epoch, location })
    }

    fn restore(&self, checkpoint: &CheckpointRef, model: &FusionModel) -> Result<()> {
        let state = self
            .states
            .get(&checkpoint.location)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown checkpoint {}", checkpoint.location)))?;
        model.load_state(state)
    }
}

/// One `epoch_NNN.safetensors` + `epoch_NNN.json` pair per epoch.
pub struct DirCheckpoints {
    dir: PathBuf,
}

impl DirCheckpoints {
    pub fn new(dir: impl AsRef<Path>) -> Result<Self> {
        std::fs::create_dir_all(dir.as_ref())?;
        Ok(Self {
            dir: dir.as_ref().to_path_buf(),
        })
    }

    pub fn stem(&self, checkpoint: &CheckpointRef) -> PathBuf {
        self.dir.join(&checkpoint.location)
    }
}

impl CheckpointStore for DirCheckpoints {
    fn save(&mut self, epoch: usize, model: &FusionModel) -> Result<CheckpointRef> {
        let checkpoint = CheckpointRef {
            epoch,
            location: format!("epoch_{epoch:03}"),
        };
        save_checkpoint(model, &self.stem(&checkpoint))?;
        Ok(checkpoint)
    }

    fn restore(&self, checkpoint: &CheckpointRef, model: &FusionModel) -> Result<()> {
        let (weights, _) = checkpoint_paths(&self.stem(checkpoint));
        let state = candle_core::safetensors::load(weights, model.device())?;
        model.load_state(&state.into_iter().collect())
    }
}

pub const METRICS_LOG_COLUMNS: [&str; 7] = [
    "epoch",
    "train_loss_mean",
    "val_absrel",
    "val_delta1",
    "val_rmse",
    "lr_pretrained",
    "lr_new",
];

/// Append-only CSV with one row per epoch.
pub struct MetricsLog {
    path: PathBuf,
}

impl MetricsLog {
    /// Creates (truncating) the log and writes the header.
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        std::fs::write(&path, METRICS_LOG_COLUMNS.join(",") + "\n")?;
        Ok(Self { path })
    }

    pub fn append(&mut self, r: &EpochRecord) -> Result<()> {
        let mut file = OpenOptions::new().append(true).open(&self.path)?;
        writeln!(
            file,
            "{},{},{},{},{},{},{}",
            r.epoch, r.train_loss_mean, r.val_absrel, r.val_delta1, r.val_rmse, r.lr_pretrained, r.lr_new
        )?;
        Ok(())
    }
}

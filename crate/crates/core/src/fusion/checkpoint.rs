//! Checkpoints: a safetensors archive of named parameters plus a JSON
//! manifest with the model configuration and group assignment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use candle_core::{DType, Device};
use serde::{Deserialize, Serialize};

use super::{FusionModel, ModelConfig, ParamGroup};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub model: ModelConfig,
    pub groups: BTreeMap<String, ParamGroup>,
}

/// `<stem>.safetensors` and `<stem>.json`.
pub fn checkpoint_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("safetensors"), stem.with_extension("json"))
}

pub fn save_checkpoint(model: &FusionModel, stem: &Path) -> Result<()> {
    let (weights, manifest_path) = checkpoint_paths(stem);
    if let Some(dir) = stem.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let state = model.state()?;
    candle_core::safetensors::save(&state, &weights)?;
    let manifest = CheckpointManifest {
        model: model.config().clone(),
        groups: model.params().into_iter().map(|p| (p.name, p.group)).collect(),
    };
    std::fs::write(manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

pub fn load_checkpoint(stem: &Path, dtype: DType, device: &Device) -> Result<FusionModel> {
    let (weights, manifest_path) = checkpoint_paths(stem);
    let manifest: CheckpointManifest = serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)?;
    let model = FusionModel::new(&manifest.model, 0, dtype, device)?;
    for p in model.params() {
        if manifest.groups.get(&p.name) != Some(&p.group) {
            return Err(Error::format(
                &manifest_path,
                format!("group assignment of `{}` does not match the model", p.name),
            ));
        }
    }
    let state = candle_core::safetensors::load(&weights, device)?;
    model.load_state(&state.into_iter().collect())?;
    Ok(model)
}

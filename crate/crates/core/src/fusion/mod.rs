//! Depth model with a radar input channel and a per-pixel fusion weight.

mod checkpoint;
mod config;
mod inference;
mod net;
mod ops;
mod params;

pub use checkpoint::{checkpoint_paths, load_checkpoint, save_checkpoint, CheckpointManifest};
pub use config::{ModelConfig, ModelPreset};
pub use inference::{input_batch, predict, FusionOutput, Variant};
pub use net::{extend_patch_embedding, ForwardOutput, FusionModel, NEW_WEIGHT_RELATIVE_STD};
pub use ops::{fuse, fuse_with_mean, naive_scale, naive_scale_factor};
pub use params::{param_groups, NamedParam, ParamGroup};

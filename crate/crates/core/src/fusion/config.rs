use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub patch_size: usize,
    pub embed_dim: usize,
    pub num_heads: usize,
    pub num_blocks: usize,
    /// 3 (RGB) or 4 (RGB + sparse radar depth).
    pub input_channels: usize,
    /// 1 (depth) or 2 (depth + fusion weight).
    pub output_channels: usize,
    /// Depth head activation scale, meters: `d0 = max_depth · sigmoid(raw)`.
    pub max_depth: f64,
    /// Feature width of the upsampling head.
    pub head_channels: usize,
    pub mlp_ratio: usize,
    /// Patch grid (rows, cols) the positional embedding is learned on; other
    /// grids use a bilinearly resampled embedding.
    pub pos_grid: (usize, usize),
}

/// Desk-scale presets named after the small and base backbone sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelPreset {
    #[serde(rename = "toy-S")]
    ToyS,
    #[serde(rename = "toy-B")]
    ToyB,
}

impl ModelPreset {
    pub fn name(&self) -> &'static str {
        match self {
            ModelPreset::ToyS => "toy-S",
            ModelPreset::ToyB => "toy-B",
        }
    }

    /// Four-input, two-output configuration for `height × width` images.
    pub fn config(&self, height: usize, width: usize) -> Result<ModelConfig> {
        let (embed_dim, num_blocks, num_heads) = match self {
            ModelPreset::ToyS => (64, 4, 4),
            ModelPreset::ToyB => (128, 6, 8),
        };
        let patch_size = 8;
        let config = ModelConfig {
            patch_size,
            embed_dim,
            num_heads,
            num_blocks,
            input_channels: 4,
            output_channels: 2,
            max_depth: 100.0,
            head_channels: 16,
            mlp_ratio: 4,
            pos_grid: (height / patch_size, width / patch_size),
        };
        config.validate()?;
        config.check_image(height, width)?;
        Ok(config)
    }
}

impl std::str::FromStr for ModelPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "toy-s" | "s" => Ok(ModelPreset::ToyS),
            "toy-b" | "b" => Ok(ModelPreset::ToyB),
            _ => Err(Error::InvalidArgument(format!(
                "unknown preset `{s}` (expected toy-S or toy-B)"
            ))),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.patch_size == 0 || self.embed_dim == 0 || self.num_heads == 0 || self.head_channels == 0 {
            return bad("model sizes must be positive".into());
        }
        if self.embed_dim % self.num_heads != 0 {
            return bad(format!(
                "embed_dim {} is not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            ));
        }
        if !matches!(self.input_channels, 3 | 4) {
            return bad(format!("input_channels must be 3 or 4, got {}", self.input_channels));
        }
        if !matches!(self.output_channels, 1 | 2) {
            return bad(format!("output_channels must be 1 or 2, got {}", self.output_channels));
        }
        if !(self.max_depth > 0.0) {
            return bad("max_depth must be positive".into());
        }
        if self.pos_grid.0 == 0 || self.pos_grid.1 == 0 {
            return bad("positional grid must be non-empty".into());
        }
        Ok(())
    }

    pub fn check_image(&self, height: usize, width: usize) -> Result<()> {
        if height == 0 || width == 0 || height % self.patch_size != 0 || width % self.patch_size != 0 {
            return Err(Error::InvalidArgument(format!(
                "image {height}×{width} is not divisible by patch size {}",
                self.patch_size
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }

    /// The same backbone as the vision-only model it extends: RGB in, depth out.
    pub fn vision_only(&self) -> Self {
        Self {
            input_channels: 3,
            output_channels: 1,
            ..self.clone()
        }
    }

    /// The radar-fusion variant: RGB + radar in, depth + weight out.
    pub fn with_radar(&self) -> Self {
        Self {
            input_channels: 4,
            output_channels: 2,
            ..self.clone()
        }
    }
}

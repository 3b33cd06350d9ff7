//! On-disk dataset layout.
//!
//! ```text
//! <dataset>/manifest.json
//! <dataset>/<id>_rgb.png        8-bit RGB
//! <dataset>/<id>_depth.pfm      32-bit float z-depth, meters, 0 = invalid
//! <dataset>/<id>_radar.csv      optional projected radar, header u,v,depth
//! <dataset>/<id>_radar_log.csv  optional raw radar log (needs a calibration)
//! ```

use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::SynthConfig;
use crate::error::{Error, Result};
use crate::radar::{read_observations, read_radar_log, CameraIntrinsics, PixelObservation, RadarReturn};
use crate::raster::read_pfm;
use crate::DepthMap;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub scene_seed: u64,
    pub pose_seed: u64,
    pub radar_seed: u64,
    pub rgb: String,
    pub depth: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radar: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radar_log: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub name: String,
    pub seed: u64,
    pub intrinsics: CameraIntrinsics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<SynthConfig>,
    pub samples: Vec<SampleRecord>,
}

impl DatasetManifest {
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.as_ref().join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LoadedSample {
    pub id: String,
    pub rgb: RgbImage,
    pub depth: DepthMap,
    pub observations: Option<Vec<PixelObservation>>,
    pub radar_log: Option<Vec<RadarReturn>>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    dir: PathBuf,
    manifest: DatasetManifest,
}

impl Dataset {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let path = dir.join(MANIFEST_FILE);
        let manifest: DatasetManifest = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::format(path, format!(
                "unsupported format version {}",
                manifest.format_version
            )));
        }
        manifest.intrinsics.validate()?;
        Ok(Self { dir, manifest })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.manifest.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.samples.is_empty()
    }

    pub fn load(&self, index: usize) -> Result<LoadedSample> {
        let record = &self.manifest.samples[index];
        let rgb = image::open(self.dir.join(&record.rgb))?.to_rgb8();
        let depth = read_pfm(self.dir.join(&record.depth))?;
        let k = &self.manifest.intrinsics;
        if depth.dim() != (k.height, k.width) || rgb.dimensions() != (k.width as u32, k.height as u32) {
            return Err(Error::format(
                self.dir.join(&record.depth),
                "sample size does not match the manifest intrinsics",
            ));
        }
        let observations = record
            .radar
            .as_ref()
            .map(|f| read_observations(self.dir.join(f)))
            .transpose()?;
        let radar_log = record
            .radar_log
            .as_ref()
            .map(|f| read_radar_log(self.dir.join(f)))
            .transpose()?;
        Ok(LoadedSample {
            id: record.id.clone(),
            rgb,
            depth,
            observations,
            radar_log,
        })
    }
}

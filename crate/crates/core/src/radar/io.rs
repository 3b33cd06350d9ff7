use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{CameraIntrinsics, PixelObservation, RadarReturn, RigidTransform};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct RadarRow {
    timestamp_s: f64,
    x_m: f64,
    y_m: f64,
    z_m: f64,
    snr_db: f64,
}

/// Reads a radar log: one return per row, header
/// `timestamp_s,x_m,y_m,z_m,snr_db`.
pub fn read_radar_log(path: impl AsRef<Path>) -> Result<Vec<RadarReturn>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    require_columns(&mut reader, path, &["timestamp_s", "x_m", "y_m", "z_m", "snr_db"])?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let row: RadarRow = row?;
        let values = [row.timestamp_s, row.x_m, row.y_m, row.z_m, row.snr_db];
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::format(path, "non-finite radar return"));
        }
        out.push(RadarReturn {
            position: Vector3::new(row.x_m, row.y_m, row.z_m),
            snr_db: row.snr_db,
            timestamp: row.timestamp_s,
        });
    }
    Ok(out)
}

pub fn write_radar_log(path: impl AsRef<Path>, returns: &[RadarReturn]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for r in returns {
        writer.serialize(RadarRow {
            timestamp_s: r.timestamp,
            x_m: r.position.x,
            y_m: r.position.y,
            z_m: r.position.z,
            snr_db: r.snr_db,
        })?;
    }
    writer.flush()?;
    Ok(())
}

/// Splits a log into radar frames: maximal runs of equal timestamps.
pub fn group_frames(returns: &[RadarReturn]) -> Vec<Vec<RadarReturn>> {
    let mut frames: Vec<Vec<RadarReturn>> = Vec::new();
    for r in returns {
        match frames.last_mut() {
            Some(frame) if frame[0].timestamp == r.timestamp => frame.push(*r),
            _ => frames.push(vec![*r]),
        }
    }
    frames
}

/// Reads projected observations with header `u,v,depth`.
fn require_columns(reader: &mut csv::Reader<std::fs::File>, path: &Path, columns: &[&str]) -> Result<()> {
    let headers = reader.headers()?;
    for c in columns {
        if !headers.iter().any(|h| h == *c) {
            return Err(Error::format(path, format!("missing column `{c}`")));
        }
    }
    Ok(())
}

pub fn read_observations(path: impl AsRef<Path>) -> Result<Vec<PixelObservation>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    require_columns(&mut reader, path, &["u", "v", "depth"])?;
    reader
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn write_observations(path: impl AsRef<Path>, observations: &[PixelObservation]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for o in observations {
        writer.serialize(o)?;
    }
    writer.flush()?;
    Ok(())
}

/// Camera intrinsics plus the radar → camera transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: RigidTransform,
}

#[derive(Serialize, Deserialize)]
struct CalibrationFile {
    intrinsics: CameraIntrinsics,
    extrinsics: ExtrinsicsBlock,
}

#[derive(Serialize, Deserialize)]
struct ExtrinsicsBlock {
    /// Row-major 3×3.
    rotation: Vec<f64>,
    translation: Vec<f64>,
}

/// Reads a TOML calibration file with `[intrinsics]` and `[extrinsics]` blocks.
pub fn read_calibration(path: impl AsRef<Path>) -> Result<Calibration> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let file: CalibrationFile =
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    file.intrinsics.validate()?;
    let rotation: [f64; 9] = file
        .extrinsics
        .rotation
        .try_into()
        .map_err(|_| Error::format(path, "rotation needs 9 entries"))?;
    let translation: [f64; 3] = file
        .extrinsics
        .translation
        .try_into()
        .map_err(|_| Error::format(path, "translation needs 3 entries"))?;
    Ok(Calibration {
        intrinsics: file.intrinsics,
        extrinsics: RigidTransform::from_row_major(rotation, translation)?,
    })
}

pub fn write_calibration(path: impl AsRef<Path>, calibration: &Calibration) -> Result<()> {
    let path = path.as_ref();
    let file = CalibrationFile {
        intrinsics: calibration.intrinsics,
        extrinsics: ExtrinsicsBlock {
            rotation: calibration.extrinsics.rotation_row_major().to_vec(),
            translation: calibration.extrinsics.translation().iter().copied().collect(),
        },
    };
    let text = toml::to_string(&file).map_err(|e| Error::format(path, e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radar_log_round_trip_and_frames() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("radar.csv");
        let returns: Vec<RadarReturn> = [(0.0, 1.0), (0.0, 2.0), (0.05, 3.0), (0.1, 4.0)]
            .iter()
            .map(|&(t, x)| RadarReturn {
                position: Vector3::new(x, 0.5, 12.0),
                snr_db: 18.0,
                timestamp: t,
            })
            .collect();
        write_radar_log(&path, &returns).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("timestamp_s,x_m,y_m,z_m,snr_db\n"));
        let back = read_radar_log(&path).unwrap();
        assert_eq!(back, returns);
        let sizes: Vec<usize> = group_frames(&back).iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 1, 1]);
    }

    #[test]
    fn radar_log_requires_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("radar.csv");
        std::fs::write(&path, "0.0,1,2,3,20\n").unwrap();
        assert!(read_radar_log(&path).is_err());
    }

    #[test]
    fn calibration_file_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calib.toml");
        std::fs::write(
            &path,
            r#"
[intrinsics]
fx = 500.0
fy = 501.0
cx = 320.0
cy = 240.0
width = 640
height = 480

[extrinsics]
rotation = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
translation = [0.05, -0.02, 0.0]
"#,
        )
        .unwrap();
        let calib = read_calibration(&path).unwrap();
        assert_eq!(calib.intrinsics.fy, 501.0);
        assert_eq!(calib.extrinsics.translation().x, 0.05);

        let again = dir.path().join("again.toml");
        write_calibration(&again, &calib).unwrap();
        assert_eq!(read_calibration(&again).unwrap(), calib);
    }

    #[test]
    fn calibration_rejects_non_rotation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calib.toml");
        std::fs::write(
            &path,
            "[intrinsics]\nfx=1.0\nfy=1.0\ncx=1.0\ncy=1.0\nwidth=4\nheight=4\n\
             [extrinsics]\nrotation=[2.0,0,0,0,1,0,0,0,1]\ntranslation=[0,0,0]\n",
        )
        .unwrap();
        assert!(matches!(read_calibration(&path), Err(Error::InvalidTransform(_))));
    }
}

//! Single-channel 32-bit float rasters stored as Portable Float Maps (PFM).
//!
//! Rows are written bottom-to-top in little-endian byte order, as the format
//! prescribes. Values are meters; `0` marks "no observation" / invalid.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub fn write_pfm(path: impl AsRef<Path>, grid: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    let (height, width) = grid.dim();
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "Pf\n{width} {height}\n-1.0\n")?;
    for row in (0..height).rev() {
        for col in 0..width {
            out.write_all(&(grid[[row, col]] as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let mut reader = BufReader::new(File::open(path)?);

    let mut header = Vec::with_capacity(3);
    while header.len() < 3 {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::format(path, "truncated header"));
        }
        let line = line.trim();
        if !line.is_empty() {
            header.push(line.to_owned());
        }
    }
    if header[0] != "Pf" {
        return Err(Error::format(path, "not a single-channel PFM"));
    }
    let dims: Vec<usize> = header[1]
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| Error::format(path, "bad dimensions"))?;
    let [width, height] = dims[..] else {
        return Err(Error::format(path, "bad dimensions"));
    };
    let scale: f32 = header[2]
        .parse()
        .map_err(|_| Error::format(path, "bad scale"))?;
    let little_endian = scale < 0.0;

    let mut bytes = vec![0u8; width * height * 4];
    reader
        .read_exact(&mut bytes)
        .map_err(|_| Error::format(path, "truncated pixel data"))?;

    let mut grid = Array2::zeros((height, width));
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let value = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let row = height - 1 - i / width;
        grid[[row, i % width]] = value as f64;
    }
    Ok(grid)
}

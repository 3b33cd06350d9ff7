//! Periodic procedural terrain.
//!
//! The heightfield tiles the plane with period `extent` in x and y, so the
//! surface is unbounded and any downward camera ray eventually hits it.
//! Geometry and texture are generated in normalized coordinates and then
//! multiplied by a per-scene scale, so a scene and its scaled copy look the
//! same from proportionally scaled viewpoints: appearance alone does not
//! reveal absolute scale.

use nalgebra::Vector3;
use ndarray::{Array2, Array3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerrainParams {
    /// Grid cells per side for heightfield and texture.
    pub grid: usize,
    /// Side length of one terrain tile at scale 1, meters.
    pub base_extent: f64,
    /// Elevation amplitude at scale 1, meters.
    pub relief: f64,
    pub octaves: usize,
    /// Lattice cells per tile of the coarsest noise octave.
    pub base_frequency: usize,
    /// Scene scale multiplier is log-uniform in this range.
    pub scale_range: (f64, f64),
    /// Number of rectangular albedo patches painted over the base texture.
    pub patches: usize,
}

impl Default for TerrainParams {
    fn default() -> Self {
        Self {
            grid: 256,
            base_extent: 256.0,
            relief: 12.0,
            octaves: 5,
            base_frequency: 4,
            scale_range: (0.5, 2.0),
            patches: 90,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TerrainScene {
    heightfield: Array2<f64>,
    texture: Array3<f64>,
    extent: f64,
    sun: Vector3<f64>,
    ambient: f64,
    max_slope: f64,
    scale: f64,
}

impl TerrainScene {
    /// Builds a scene from a `rows × cols` heightfield and a `rows × cols × 3`
    /// albedo texture covering one `extent × extent` tile.
    pub fn new(heightfield: Array2<f64>, texture: Array3<f64>, extent: f64) -> Result<Self> {
        let (rows, cols) = heightfield.dim();
        if rows < 2 || cols < 2 {
            return Err(Error::InvalidArgument("heightfield needs at least 2×2 cells".into()));
        }
        if texture.dim() != (rows, cols, 3) {
            return Err(Error::ShapeMismatch {
                expected: vec![rows, cols, 3],
                actual: texture.shape().to_vec(),
            });
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::InvalidArgument("extent must be positive".into()));
        }
        if !heightfield.iter().all(|h| h.is_finite()) {
            return Err(Error::InvalidArgument("elevations must be finite".into()));
        }
        let mut scene = Self {
            heightfield,
            texture,
            extent,
            sun: Vector3::new(0.3, 0.2, 1.0).normalize(),
            ambient: 0.35,
            max_slope: 0.0,
            scale: 1.0,
        };
        scene.max_slope = scene.slope_bound();
        Ok(scene)
    }

    /// Constant-elevation gray plane.
    pub fn flat(elevation: f64, extent: f64) -> Result<Self> {
        Self::new(
            Array2::from_elem((8, 8), elevation),
            Array3::from_elem((8, 8, 3), 0.5),
            extent,
        )
    }

    pub fn generate(seed: u64, params: &TerrainParams) -> Result<Self> {
        let n = params.grid;
        if n < 8 || params.octaves == 0 || params.base_frequency == 0 {
            return Err(Error::InvalidArgument("terrain grid/octaves too small".into()));
        }
        let (lo, hi) = params.scale_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::InvalidArgument("scale range must be positive".into()));
        }
        let mut rng = rng_from(seed, &[0x7e77a1]);
        let scale = (lo.ln() + rng.random::<f64>() * (hi / lo).ln()).exp();

        let mut height = Array2::<f64>::zeros((n, n));
        let mut amplitude = 1.0;
        let mut total = 0.0;
        for octave in 0..params.octaves {
            let freq = params.base_frequency << octave;
            let lattice = random_lattice(&mut rng, freq);
            for ((r, c), h) in height.indexed_iter_mut() {
                *h += amplitude * value_noise(&lattice, freq, c as f64 / n as f64, r as f64 / n as f64);
            }
            total += amplitude;
            amplitude *= 0.5;
        }
        height.mapv_inplace(|h| (h / total - 0.5) * 2.0 * params.relief * scale);

        let texture = random_texture(&mut rng, n, params.patches);
        let mut scene = Self::new(height, texture, params.base_extent * scale)?;

        let azimuth = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let elevation = rng.random_range(35f64..70.0).to_radians();
        scene.sun = Vector3::new(
            elevation.cos() * azimuth.cos(),
            elevation.cos() * azimuth.sin(),
            elevation.sin(),
        );
        scene.scale = scale;
        Ok(scene)
    }

    pub fn heightfield(&self) -> &Array2<f64> {
        &self.heightfield
    }

    pub fn texture(&self) -> &Array3<f64> {
        &self.texture
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    /// Scale multiplier the scene was generated with (1 for hand-built scenes).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn sun(&self) -> &Vector3<f64> {
        &self.sun
    }

    pub fn ambient(&self) -> f64 {
        self.ambient
    }

    /// Upper bound on |∇h| anywhere on the surface.
    pub fn max_slope(&self) -> f64 {
        self.max_slope
    }

    pub fn min_elevation(&self) -> f64 {
        self.heightfield.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn cell(&self) -> (f64, f64) {
        let (rows, cols) = self.heightfield.dim();
        (self.extent / cols as f64, self.extent / rows as f64)
    }

    /// Grid-space bilinear weights with periodic wrap.
    fn locate(&self, x: f64, y: f64) -> ([usize; 2], [usize; 2], f64, f64) {
        let (rows, cols) = self.heightfield.dim();
        let (cw, ch) = self.cell();
        let gx = (x / cw).rem_euclid(cols as f64);
        let gy = (y / ch).rem_euclid(rows as f64);
        let (c0, r0) = (gx.floor() as usize % cols, gy.floor() as usize % rows);
        let (fx, fy) = (gx - gx.floor(), gy - gy.floor());
        ([c0, (c0 + 1) % cols], [r0, (r0 + 1) % rows], fx, fy)
    }

    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let ([c0, c1], [r0, r1], fx, fy) = self.locate(x, y);
        let h = &self.heightfield;
        let top = h[[r0, c0]] * (1.0 - fx) + h[[r0, c1]] * fx;
        let bottom = h[[r1, c0]] * (1.0 - fx) + h[[r1, c1]] * fx;
        top * (1.0 - fy) + bottom * fy
    }

    pub fn gradient_at(&self, x: f64, y: f64) -> (f64, f64) {
        let ([c0, c1], [r0, r1], fx, fy) = self.locate(x, y);
        let (cw, ch) = self.cell();
        let h = &self.heightfield;
        let dx = ((h[[r0, c1]] - h[[r0, c0]]) * (1.0 - fy) + (h[[r1, c1]] - h[[r1, c0]]) * fy) / cw;
        let dy = ((h[[r1, c0]] - h[[r0, c0]]) * (1.0 - fx) + (h[[r1, c1]] - h[[r0, c1]]) * fx) / ch;
        (dx, dy)
    }

    pub fn normal_at(&self, x: f64, y: f64) -> Vector3<f64> {
        let (dx, dy) = self.gradient_at(x, y);
        Vector3::new(-dx, -dy, 1.0).normalize()
    }

    pub fn albedo_at(&self, x: f64, y: f64) -> [f64; 3] {
        let ([c0, c1], [r0, r1], fx, fy) = self.locate(x, y);
        let t = &self.texture;
        std::array::from_fn(|k| {
            let top = t[[r0, c0, k]] * (1.0 - fx) + t[[r0, c1, k]] * fx;
            let bottom = t[[r1, c0, k]] * (1.0 - fx) + t[[r1, c1, k]] * fx;
            top * (1.0 - fy) + bottom * fy
        })
    }

    fn slope_bound(&self) -> f64 {
        let (rows, cols) = self.heightfield.dim();
        let (cw, ch) = self.cell();
        let h = &self.heightfield;
        let (mut dx, mut dy) = (0.0f64, 0.0f64);
        for r in 0..rows {
            for c in 0..cols {
                dx = dx.max((h[[r, (c + 1) % cols]] - h[[r, c]]).abs() / cw);
                dy = dy.max((h[[(r + 1) % rows, c]] - h[[r, c]]).abs() / ch);
            }
        }
        (dx * dx + dy * dy).sqrt()
    }
}

fn random_lattice(rng: &mut impl Rng, freq: usize) -> Array2<f64> {
    Array2::from_shape_fn((freq, freq), |_| rng.random::<f64>())
}

/// Periodic value noise on a `freq × freq` lattice, `x, y ∈ [0, 1)`.
fn value_noise(lattice: &Array2<f64>, freq: usize, x: f64, y: f64) -> f64 {
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let (gx, gy) = (x * freq as f64, y * freq as f64);
    let (c0, r0) = (gx.floor() as usize % freq, gy.floor() as usize % freq);
    let (c1, r1) = ((c0 + 1) % freq, (r0 + 1) % freq);
    let (fx, fy) = (smooth(gx - gx.floor()), smooth(gy - gy.floor()));
    let top = lattice[[r0, c0]] * (1.0 - fx) + lattice[[r0, c1]] * fx;
    let bottom = lattice[[r1, c0]] * (1.0 - fx) + lattice[[r1, c1]] * fx;
    top * (1.0 - fy) + bottom * fy
}

fn random_color(rng: &mut impl Rng) -> [f64; 3] {
    std::array::from_fn(|_| rng.random_range(0.1..0.95))
}

fn random_texture(rng: &mut impl Rng, n: usize, patches: usize) -> Array3<f64> {
    let (a, b) = (random_color(rng), random_color(rng));
    let freq = 8;
    let lattice = random_lattice(rng, freq);
    let mut texture = Array3::zeros((n, n, 3));
    for r in 0..n {
        for c in 0..n {
            let t = value_noise(&lattice, freq, c as f64 / n as f64, r as f64 / n as f64);
            for k in 0..3 {
                texture[[r, c, k]] = a[k] * (1.0 - t) + b[k] * t;
            }
        }
    }
    for _ in 0..patches {
        let color = random_color(rng);
        let (w, h) = (rng.random_range(n / 40..n / 8).max(2), rng.random_range(n / 40..n / 8).max(2));
        let (c0, r0) = (rng.random_range(0..n), rng.random_range(0..n));
        for r in r0..r0 + h {
            for c in c0..c0 + w {
                for k in 0..3 {
                    texture[[r % n, c % n, k]] = color[k];
                }
            }
        }
    }
    texture
}

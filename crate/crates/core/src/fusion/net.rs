//! Toy vision transformer with a radar input channel and a fusion-weight head.
//!
//! Layout: patch embedding (a stride-`p` convolution written as a matmul over
//! unfolded patches) → learned positional embedding → pre-norm transformer
//! blocks → bilinear upsampling head → 3×3 convolution → one 1×1 output per
//! head channel. The depth channel is `max_depth · sigmoid(raw)`, the weight
//! channel `sigmoid(raw)`.
//!
//! The RGB and radar slices of the patch embedding, and the depth and weight
//! rows of the output projection, live in separate variables. That keeps the
//! pretrained/new parameter split exact and lets the radar slice be swapped
//! or zeroed without touching the RGB weights.

use std::collections::HashMap;

use candle_core::{DType, Device, Tensor, Var, D};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use super::config::ModelConfig;
use super::params::{NamedParam, ParamGroup};
use crate::error::{Error, Result};
use crate::rng::rng_from;

const LN_EPS: f64 = 1e-6;
/// Standard deviation of new weights relative to the RMS of the pretrained
/// weights they sit next to.
pub const NEW_WEIGHT_RELATIVE_STD: f64 = 0.01;

#[derive(Clone)]
struct Linear {
    /// `[in, out]`
    weight: Var,
    bias: Var,
}

/// Parameter view: tracked for backprop, or detached so inference keeps no graph.
fn param(var: &Var, grad: bool) -> Tensor {
    if grad {
        var.as_tensor().clone()
    } else {
        var.as_tensor().detach()
    }
}

impl Linear {
    fn forward(&self, x: &Tensor, g: bool) -> Result<Tensor> {
        let dims = x.dims();
        let (rows, fan_in) = (x.elem_count() / dims[dims.len() - 1], dims[dims.len() - 1]);
        let y = x
            .reshape((rows, fan_in))?
            .matmul(&param(&self.weight, g))?
            .broadcast_add(&param(&self.bias, g))?;
        let mut out = dims.to_vec();
        *out.last_mut().expect("non-scalar input") = y.dim(1)?;
        Ok(y.reshape(out)?)
    }
}

#[derive(Clone)]
struct Norm {
    gamma: Var,
    beta: Var,
}

impl Norm {
    fn forward(&self, x: &Tensor, g: bool) -> Result<Tensor> {
        let mean = x.mean_keepdim(D::Minus1)?;
        let centered = x.broadcast_sub(&mean)?;
        let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
        let normed = centered.broadcast_div(&var.affine(1.0, LN_EPS)?.sqrt()?)?;
        Ok(normed
            .broadcast_mul(&param(&self.gamma, g))?
            .broadcast_add(&param(&self.beta, g))?)
    }
}

#[derive(Clone)]
struct Block {
    norm1: Norm,
    qkv: Linear,
    proj: Linear,
    norm2: Norm,
    fc1: Linear,
    fc2: Linear,
}

fn softmax_last(x: &Tensor) -> Result<Tensor> {
    let max = x.max_keepdim(D::Minus1)?.detach();
    let e = x.broadcast_sub(&max)?.exp()?;
    Ok(e.broadcast_div(&e.sum_keepdim(D::Minus1)?)?)
}

impl Block {
    fn forward(&self, x: &Tensor, num_heads: usize, g: bool) -> Result<Tensor> {
        let (b, n, d) = x.dims3()?;
        let hd = d / num_heads;
        let qkv = self
            .qkv
            .forward(&self.norm1.forward(x, g)?, g)?
            .reshape((b, n, 3, num_heads, hd))?
            .permute((2, 0, 3, 1, 4))?;
        let q = qkv.get(0)?.contiguous()?;
        let k = qkv.get(1)?.contiguous()?;
        let v = qkv.get(2)?.contiguous()?;
        let scores = q.matmul(&k.t()?.contiguous()?)?.affine(1.0 / (hd as f64).sqrt(), 0.0)?;
        let attended = softmax_last(&scores)?
            .matmul(&v)?
            .transpose(1, 2)?
            .reshape((b, n, d))?;
        let x = (x + self.proj.forward(&attended, g)?)?;
        let hidden = self.fc1.forward(&self.norm2.forward(&x, g)?, g)?.gelu_erf()?;
        Ok((&x + self.fc2.forward(&hidden, g)?)?)
    }
}

#[derive(Clone)]
struct PatchEmbed {
    /// `[D, 3, p, p]`
    rgb: Var,
    /// `[D, 1, p, p]`
    radar: Option<Var>,
    bias: Var,
}

#[derive(Clone)]
struct Head {
    proj: Linear,
    /// 3×3 convolution as `[9·C, C]` over unfolded neighborhoods.
    conv: Linear,
    depth: Linear,
    weight: Option<Linear>,
}

/// Raw network outputs, `[B, H, W]` each.
pub struct ForwardOutput {
    pub depth: Tensor,
    pub weight: Option<Tensor>,
}

#[derive(Clone)]
pub struct FusionModel {
    config: ModelConfig,
    device: Device,
    dtype: DType,
    patch: PatchEmbed,
    pos_embed: Var,
    blocks: Vec<Block>,
    norm: Norm,
    head: Head,
}

struct Init<'a> {
    rng: ChaCha8Rng,
    dtype: DType,
    device: &'a Device,
}

impl Init<'_> {
    fn normal(&mut self, shape: &[usize], std: f64) -> Result<Var> {
        let count: usize = shape.iter().product();
        let data: Vec<f64> = if std > 0.0 {
            let dist = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            (0..count).map(|_| self.rng.sample(dist)).collect()
        } else {
            vec![0.0; count]
        };
        let t = Tensor::from_vec(data, shape, self.device)?.to_dtype(self.dtype)?;
        Ok(Var::from_tensor(&t)?)
    }

    fn constant(&mut self, shape: &[usize], value: f64) -> Result<Var> {
        let t = Tensor::full(value, shape, self.device)?.to_dtype(self.dtype)?;
        Ok(Var::from_tensor(&t)?)
    }

    fn linear(&mut self, fan_in: usize, fan_out: usize) -> Result<Linear> {
        Ok(Linear {
            weight: self.normal(&[fan_in, fan_out], (1.0 / fan_in as f64).sqrt())?,
            bias: self.constant(&[fan_out], 0.0)?,
        })
    }

    fn norm(&mut self, dim: usize) -> Result<Norm> {
        Ok(Norm {
            gamma: self.constant(&[dim], 1.0)?,
            beta: self.constant(&[dim], 0.0)?,
        })
    }
}

fn rms(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.sqr()?.mean_all()?.sqrt()?.to_scalar::<f64>()?)
}

fn deep_copy(var: &Var) -> Result<Var> {
    Ok(Var::from_tensor(&var.as_tensor().copy()?)?)
}

/// Adds a radar slice to a pretrained `[D, 3, p, p]` patch-embedding kernel.
///
/// RGB slices are copied unchanged; the new slice is drawn from a zero-mean
/// normal with standard deviation `0.01 × RMS(RGB slices)`.
pub fn extend_patch_embedding(pretrained: &Tensor, init_seed: u64) -> Result<Tensor> {
    let (d, c, kh, kw) = pretrained.dims4()?;
    if c != 3 {
        return Err(Error::ShapeMismatch {
            expected: vec![d, 3, kh, kw],
            actual: pretrained.dims().to_vec(),
        });
    }
    let mut init = Init {
        rng: rng_from(init_seed, &[0xe47e]),
        dtype: pretrained.dtype(),
        device: pretrained.device(),
    };
    let std = NEW_WEIGHT_RELATIVE_STD * rms(pretrained)?;
    let slice = init.normal(&[d, 1, kh, kw], std)?;
    Ok(Tensor::cat(&[pretrained, slice.as_tensor()], 1)?)
}

/// Row-stochastic `[out, in]` matrix for 1-D bilinear resampling with
/// half-pixel centers.
fn bilinear_matrix(out: usize, input: usize) -> Vec<f64> {
    let mut m = vec![0.0; out * input];
    let scale = input as f64 / out as f64;
    for i in 0..out {
        let src = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (input - 1) as f64);
        let i0 = src.floor() as usize;
        let i1 = (i0 + 1).min(input - 1);
        let f = src - i0 as f64;
        m[i * input + i0] += 1.0 - f;
        m[i * input + i1] += f;
    }
    m
}

impl FusionModel {
    /// Randomly initialized model. For a 4-channel model the radar slice is
    /// initialized like the RGB slices.
    pub fn new(config: &ModelConfig, seed: u64, dtype: DType, device: &Device) -> Result<Self> {
        config.validate()?;
        let mut init = Init {
            rng: rng_from(seed, &[0x1417]),
            dtype,
            device,
        };
        let (d, p) = (config.embed_dim, config.patch_size);
        let embed_std = (1.0 / (config.input_channels * p * p) as f64).sqrt();
        let patch = PatchEmbed {
            rgb: init.normal(&[d, 3, p, p], embed_std)?,
            radar: if config.input_channels == 4 {
                Some(init.normal(&[d, 1, p, p], embed_std)?)
            } else {
                None
            },
            bias: init.constant(&[d], 0.0)?,
        };
        let (gh, gw) = config.pos_grid;
        let pos_embed = init.normal(&[gh * gw, d], 0.02)?;
        let hidden = d * config.mlp_ratio;
        let blocks = (0..config.num_blocks)
            .map(|_| {
                Ok(Block {
                    norm1: init.norm(d)?,
                    qkv: init.linear(d, 3 * d)?,
                    proj: init.linear(d, d)?,
                    norm2: init.norm(d)?,
                    fc1: init.linear(d, hidden)?,
                    fc2: init.linear(hidden, d)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let norm = init.norm(d)?;
        let c = config.head_channels;
        let head = Head {
            proj: init.linear(d, c)?,
            conv: Linear {
                weight: init.normal(&[9 * c, c], (2.0 / (9 * c) as f64).sqrt())?,
                bias: init.constant(&[c], 0.0)?,
            },
            depth: init.linear(c, 1)?,
            weight: if config.output_channels == 2 {
                Some(init.linear(c, 1)?)
            } else {
                None
            },
        };
        Ok(Self {
            config: config.clone(),
            device: device.clone(),
            dtype,
            patch,
            pos_embed,
            blocks,
            norm,
            head,
        })
    }

    /// Builds the radar-fusion model from a vision-only model: every existing
    /// parameter is copied, a radar slice is added to the patch embedding and
    /// a weight row to the output projection.
    pub fn extend(&self, init_seed: u64) -> Result<Self> {
        if self.config.input_channels != 3 || self.config.output_channels != 1 {
            return Err(Error::InvalidArgument(
                "only a 3-input, 1-output model can be extended".into(),
            ));
        }
        let mut model = self.clone_detached()?;
        model.config = self.config.with_radar();

        let kernel = extend_patch_embedding(self.patch.rgb.as_tensor(), init_seed)?;
        model.patch.radar = Some(Var::from_tensor(&kernel.narrow(1, 3, 1)?.contiguous()?)?);

        let mut init = Init {
            rng: rng_from(init_seed, &[0x4ead]),
            dtype: self.dtype,
            device: &self.device,
        };
        let std = NEW_WEIGHT_RELATIVE_STD * rms(self.head.depth.weight.as_tensor())?;
        model.head.weight = Some(Linear {
            weight: init.normal(&[self.config.head_channels, 1], std)?,
            bias: init.constant(&[1], 0.0)?,
        });
        Ok(model)
    }

    /// Copy that shares no storage with `self`.
    pub fn clone_detached(&self) -> Result<Self> {
        let mut copy = self.clone();
        for (dst, src) in copy.vars_mut().into_iter().zip(self.params()) {
            *dst = deep_copy(&src.var)?;
        }
        Ok(copy)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    /// The radar slice of the patch embedding, `[D, 1, p, p]`.
    pub fn radar_embedding(&self) -> Option<&Var> {
        self.patch.radar.as_ref()
    }

    /// The RGB slices of the patch embedding, `[D, 3, p, p]`.
    pub fn rgb_embedding(&self) -> &Var {
        &self.patch.rgb
    }

    /// Full `[D, C, p, p]` patch-embedding kernel.
    pub fn patch_kernel(&self) -> Result<Tensor> {
        self.kernel(true)
    }

    fn kernel(&self, g: bool) -> Result<Tensor> {
        Ok(match &self.patch.radar {
            Some(radar) => Tensor::cat(&[&param(&self.patch.rgb, g), &param(radar, g)], 1)?,
            None => param(&self.patch.rgb, g),
        })
    }

    pub fn params(&self) -> Vec<NamedParam> {
        use ParamGroup::{New, Pretrained};
        let mut out = Vec::new();
        let mut push = |name: String, var: &Var, group| {
            out.push(NamedParam {
                name,
                var: var.clone(),
                group,
            })
        };
        let linear = |push: &mut dyn FnMut(String, &Var, ParamGroup), prefix: &str, l: &Linear, g| {
            push(format!("{prefix}.weight"), &l.weight, g);
            push(format!("{prefix}.bias"), &l.bias, g);
        };
        push("patch_embed.rgb_weight".into(), &self.patch.rgb, Pretrained);
        if let Some(radar) = &self.patch.radar {
            push("patch_embed.radar_weight".into(), radar, New);
        }
        push("patch_embed.bias".into(), &self.patch.bias, Pretrained);
        push("pos_embed".into(), &self.pos_embed, Pretrained);
        for (i, b) in self.blocks.iter().enumerate() {
            push(format!("blocks.{i}.norm1.gamma"), &b.norm1.gamma, Pretrained);
            push(format!("blocks.{i}.norm1.beta"), &b.norm1.beta, Pretrained);
            linear(&mut push, &format!("blocks.{i}.qkv"), &b.qkv, Pretrained);
            linear(&mut push, &format!("blocks.{i}.proj"), &b.proj, Pretrained);
            push(format!("blocks.{i}.norm2.gamma"), &b.norm2.gamma, Pretrained);
            push(format!("blocks.{i}.norm2.beta"), &b.norm2.beta, Pretrained);
            linear(&mut push, &format!("blocks.{i}.fc1"), &b.fc1, Pretrained);
            linear(&mut push, &format!("blocks.{i}.fc2"), &b.fc2, Pretrained);
        }
        push("norm.gamma".into(), &self.norm.gamma, Pretrained);
        push("norm.beta".into(), &self.norm.beta, Pretrained);
        linear(&mut push, "head.proj", &self.head.proj, Pretrained);
        linear(&mut push, "head.conv", &self.head.conv, Pretrained);
        linear(&mut push, "head.depth", &self.head.depth, Pretrained);
        if let Some(w) = &self.head.weight {
            linear(&mut push, "head.fusion_weight", w, New);
        }
        out
    }

    /// Mutable handles in the same order as [`FusionModel::params`].
    fn vars_mut(&mut self) -> Vec<&mut Var> {
        let mut out: Vec<&mut Var> = vec![&mut self.patch.rgb];
        if let Some(radar) = &mut self.patch.radar {
            out.push(radar);
        }
        out.push(&mut self.patch.bias);
        out.push(&mut self.pos_embed);
        for b in &mut self.blocks {
            out.extend([&mut b.norm1.gamma, &mut b.norm1.beta]);
            out.extend([&mut b.qkv.weight, &mut b.qkv.bias, &mut b.proj.weight, &mut b.proj.bias]);
            out.extend([&mut b.norm2.gamma, &mut b.norm2.beta]);
            out.extend([&mut b.fc1.weight, &mut b.fc1.bias, &mut b.fc2.weight, &mut b.fc2.bias]);
        }
        out.extend([&mut self.norm.gamma, &mut self.norm.beta]);
        let h = &mut self.head;
        out.extend([&mut h.proj.weight, &mut h.proj.bias, &mut h.conv.weight, &mut h.conv.bias]);
        out.extend([&mut h.depth.weight, &mut h.depth.bias]);
        if let Some(w) = &mut h.weight {
            out.extend([&mut w.weight, &mut w.bias]);
        }
        out
    }

    /// Snapshot of every parameter by name (deep copies).
    pub fn state(&self) -> Result<HashMap<String, Tensor>> {
        self.params()
            .into_iter()
            .map(|p| Ok((p.name, p.var.as_tensor().copy()?)))
            .collect()
    }

    /// Overwrites parameters in place from a named snapshot.
    pub fn load_state(&self, state: &HashMap<String, Tensor>) -> Result<()> {
        for p in self.params() {
            let src = state
                .get(&p.name)
                .ok_or_else(|| Error::MissingParameter(p.name.clone()))?;
            if src.dims() != p.var.dims() {
                return Err(Error::ShapeMismatch {
                    expected: p.var.dims().to_vec(),
                    actual: src.dims().to_vec(),
                });
            }
            p.var.set(&src.to_dtype(self.dtype)?.to_device(&self.device)?)?;
        }
        Ok(())
    }

    fn positional(&self, gh: usize, gw: usize, g: bool) -> Result<Tensor> {
        let (h0, w0) = self.config.pos_grid;
        let pos = param(&self.pos_embed, g);
        if (gh, gw) == (h0, w0) {
            return Ok(pos);
        }
        let (rh, rw) = (bilinear_matrix(gh, h0), bilinear_matrix(gw, w0));
        let mut kron = vec![0.0; gh * gw * h0 * w0];
        for i in 0..gh {
            for j in 0..gw {
                for a in 0..h0 {
                    for b in 0..w0 {
                        kron[(i * gw + j) * (h0 * w0) + a * w0 + b] = rh[i * h0 + a] * rw[j * w0 + b];
                    }
                }
            }
        }
        let kron = Tensor::from_vec(kron, (gh * gw, h0 * w0), &self.device)?.to_dtype(self.dtype)?;
        Ok(kron.matmul(&pos)?)
    }

    /// Bilinear resize of a channels-last `[B, h, w, C]` map.
    fn upsample(&self, x: &Tensor, oh: usize, ow: usize) -> Result<Tensor> {
        let (b, h, w, c) = x.dims4()?;
        let rows = Tensor::from_vec(bilinear_matrix(oh, h), (oh, h), &self.device)?.to_dtype(self.dtype)?;
        let cols = Tensor::from_vec(bilinear_matrix(ow, w), (ow, w), &self.device)?.to_dtype(self.dtype)?;
        let x = rows.broadcast_matmul(&x.reshape((b, h, w * c))?)?.reshape((b * oh, w, c))?;
        Ok(cols.broadcast_matmul(&x)?.reshape((b, oh, ow, c))?)
    }

    /// `input`: `[B, C, H, W]`, RGB in 0–1 and (for 4 channels) sparse radar
    /// depth in meters. Builds the autodiff graph.
    pub fn forward(&self, input: &Tensor) -> Result<ForwardOutput> {
        self.run(input, true)
    }

    /// [`FusionModel::forward`] without gradient tracking.
    pub fn forward_eval(&self, input: &Tensor) -> Result<ForwardOutput> {
        self.run(input, false)
    }

    fn run(&self, input: &Tensor, g: bool) -> Result<ForwardOutput> {
        let cfg = &self.config;
        let (b, c, h, w) = input.dims4()?;
        if c != cfg.input_channels {
            return Err(Error::ShapeMismatch {
                expected: vec![b, cfg.input_channels, h, w],
                actual: input.dims().to_vec(),
            });
        }
        cfg.check_image(h, w)?;
        let input = input.to_dtype(self.dtype)?;
        let input = if c == 4 {
            let radar = input.narrow(1, 3, 1)?.affine(1.0 / cfg.max_depth, 0.0)?;
            Tensor::cat(&[&input.narrow(1, 0, 3)?, &radar], 1)?
        } else {
            input
        };

        let (p, d) = (cfg.patch_size, cfg.embed_dim);
        let (gh, gw) = (h / p, w / p);
        let patches = input
            .reshape((b, c, gh, p, gw, p))?
            .permute((0, 2, 4, 1, 3, 5))?
            .contiguous()?
            .reshape((b, gh * gw, c * p * p))?;
        let kernel = self.kernel(g)?.reshape((d, c * p * p))?.t()?.contiguous()?;
        let tokens = patches
            .broadcast_matmul(&kernel)?
            .broadcast_add(&param(&self.patch.bias, g))?
            .broadcast_add(&self.positional(gh, gw, g)?)?;

        let mut x = tokens;
        for block in &self.blocks {
            x = block.forward(&x, cfg.num_heads, g)?;
        }
        let x = self.norm.forward(&x, g)?;

        // Head, channels-last: features at twice the patch grid, 3×3 conv,
        // per-pixel logits, bilinear upsampling of the logits to full size.
        let ch = cfg.head_channels;
        let (fh, fw) = (2 * gh, 2 * gw);
        let feat = self.head.proj.forward(&x, g)?.reshape((b, gh, gw, ch))?;
        let feat = self.upsample(&feat, fh, fw)?;

        let padded = feat.pad_with_zeros(1, 1, 1)?.pad_with_zeros(2, 1, 1)?;
        let mut taps = Vec::with_capacity(9);
        for dy in 0..3 {
            for dx in 0..3 {
                taps.push(padded.narrow(1, dy, fh)?.narrow(2, dx, fw)?);
            }
        }
        let unfolded = Tensor::cat(&taps, 3)?.reshape((b, fh * fw, 9 * ch))?;
        let feat = self.head.conv.forward(&unfolded, g)?.relu()?;

        let cols_t = Tensor::from_vec(bilinear_matrix(w, fw), (w, fw), &self.device)?
            .to_dtype(self.dtype)?
            .t()?
            .contiguous()?;
        let rows = Tensor::from_vec(bilinear_matrix(h, fh), (h, fh), &self.device)?.to_dtype(self.dtype)?;
        let logits = |l: &Linear| -> Result<Tensor> {
            let raw = l.forward(&feat, g)?.reshape((b * fh, fw))?;
            let raw = raw.matmul(&cols_t)?.reshape((b, fh, w))?;
            Ok(rows.broadcast_matmul(&raw)?)
        };
        let depth = candle_nn::ops::sigmoid(&logits(&self.head.depth)?)?.affine(cfg.max_depth, 0.0)?;
        let weight = match &self.head.weight {
            Some(head) => Some(candle_nn::ops::sigmoid(&logits(head)?)?),
            None => None,
        };
        Ok(ForwardOutput { depth, weight })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::ModelPreset;

    fn small_config() -> ModelConfig {
        ModelConfig {
            patch_size: 4,
            embed_dim: 16,
            num_heads: 2,
            num_blocks: 2,
            input_channels: 4,
            output_channels: 2,
            max_depth: 100.0,
            head_channels: 4,
            mlp_ratio: 2,
            pos_grid: (4, 4),
        }
    }

    fn random_input(b: usize, c: usize, h: usize, w: usize, seed: u64) -> Tensor {
        let mut rng = rng_from(seed, &[]);
        let data: Vec<f32> = (0..b * c * h * w)
            .map(|i| {
                let ch = (i / (h * w)) % c;
                if ch == 3 {
                    if rng.random::<f32>() < 0.2 { rng.random_range(1.0..60.0) } else { 0.0 }
                } else {
                    rng.random::<f32>()
                }
            })
            .collect();
        Tensor::from_vec(data, (b, c, h, w), &Device::Cpu).unwrap()
    }

    #[test]
    fn bilinear_rows_sum_to_one() {
        for (o, i) in [(8, 3), (3, 8), (5, 5), (48, 6)] {
            let m = bilinear_matrix(o, i);
            for r in 0..o {
                let s: f64 = m[r * i..(r + 1) * i].iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
        let m = bilinear_matrix(4, 4);
        for r in 0..4 {
            assert_eq!(m[r * 4 + r], 1.0);
        }
    }

    #[test]
    fn output_shapes_and_ranges() {
        let model = FusionModel::new(&small_config(), 0, DType::F32, &Device::Cpu).unwrap();
        let out = model.forward(&random_input(2, 4, 16, 24, 1)).unwrap();
        assert_eq!(out.depth.dims(), &[2, 16, 24]);
        let w = out.weight.unwrap();
        assert_eq!(w.dims(), &[2, 16, 24]);
        let w: Vec<f32> = w.flatten_all().unwrap().to_vec1().unwrap();
        assert!(w.iter().all(|&x| x > 0.0 && x < 1.0));
        let d: Vec<f32> = out.depth.flatten_all().unwrap().to_vec1().unwrap();
        assert!(d.iter().all(|&x| x > 0.0 && x < 100.0));
    }

    #[test]
    fn full_resolution_preset() {
        let config = ModelPreset::ToyS.config(480, 640).unwrap();
        let model = FusionModel::new(&config, 0, DType::F32, &Device::Cpu).unwrap();
        let out = model.forward_eval(&random_input(1, 4, 480, 640, 2)).unwrap();
        assert_eq!(out.depth.dims(), &[1, 480, 640]);
        assert_eq!(out.weight.unwrap().dims(), &[1, 480, 640]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let model = FusionModel::new(&small_config(), 0, DType::F32, &Device::Cpu).unwrap();
        assert!(model.forward(&random_input(1, 4, 15, 16, 0)).is_err());
        assert!(model.forward(&random_input(1, 3, 16, 16, 0)).is_err());
    }

    #[test]
    fn zero_weights_give_constant_maps() {
        let model = FusionModel::new(&small_config(), 0, DType::F64, &Device::Cpu).unwrap();
        for p in model.params() {
            let z = p.var.zeros_like().unwrap();
            p.var.set(&z).unwrap();
        }
        let one = |v: &Var, x: f64| v.set(&Tensor::full(x, v.dims(), &Device::Cpu).unwrap()).unwrap();
        one(&model.head.depth.bias, 0.5);
        one(&model.head.weight.as_ref().unwrap().bias, -1.0);
        let out = model.forward(&random_input(1, 4, 16, 16, 3)).unwrap();
        let d: Vec<f64> = out.depth.flatten_all().unwrap().to_vec1().unwrap();
        let w: Vec<f64> = out.weight.unwrap().flatten_all().unwrap().to_vec1().unwrap();
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        assert!(d.iter().all(|&x| (x - 100.0 * sig(0.5)).abs() < 1e-12));
        assert!(w.iter().all(|&x| (x - sig(-1.0)).abs() < 1e-12));
    }

    #[test]
    fn positional_grid_resampling() {
        let model = FusionModel::new(&small_config(), 0, DType::F32, &Device::Cpu).unwrap();
        // 16×16 matches the learned 4×4 grid; 32×24 needs resampling.
        assert!(model.forward(&random_input(1, 4, 32, 24, 4)).is_ok());
    }

    #[test]
    fn extension_copies_rgb_and_adds_small_radar_slice() {
        let stub = FusionModel::new(&small_config().vision_only(), 5, DType::F32, &Device::Cpu).unwrap();
        let rgb_before: Vec<f32> = stub.rgb_embedding().flatten_all().unwrap().to_vec1().unwrap();
        let kernel = extend_patch_embedding(stub.rgb_embedding().as_tensor(), 9).unwrap();
        assert_eq!(kernel.dims(), &[16, 4, 4, 4]);
        let rgb_after: Vec<f32> = kernel.narrow(1, 0, 3).unwrap().flatten_all().unwrap().to_vec1().unwrap();
        assert_eq!(rgb_before, rgb_after);
        let slice_rms = rms(&kernel.narrow(1, 3, 1).unwrap()).unwrap();
        let rgb_rms = rms(stub.rgb_embedding().as_tensor()).unwrap();
        assert!(slice_rms > 0.0 && slice_rms < 0.03 * rgb_rms);

        let bad = Tensor::zeros((16, 4, 4, 4), DType::F32, &Device::Cpu).unwrap();
        assert!(matches!(extend_patch_embedding(&bad, 0), Err(Error::ShapeMismatch { .. })));

        let extended = stub.extend(9).unwrap();
        assert_eq!(extended.config().input_channels, 4);
        let radar: Vec<f32> = extended.radar_embedding().unwrap().flatten_all().unwrap().to_vec1().unwrap();
        let expected: Vec<f32> = kernel.narrow(1, 3, 1).unwrap().flatten_all().unwrap().to_vec1().unwrap();
        assert_eq!(radar, expected);
        // Extension must not alias the stub's storage.
        extended.rgb_embedding().set(&extended.rgb_embedding().zeros_like().unwrap()).unwrap();
        let still: Vec<f32> = stub.rgb_embedding().flatten_all().unwrap().to_vec1().unwrap();
        assert_eq!(still, rgb_before);
        assert!(extended.extend(1).is_err());
    }

    #[test]
    fn state_round_trip() {
        let a = FusionModel::new(&small_config(), 1, DType::F32, &Device::Cpu).unwrap();
        let b = FusionModel::new(&small_config(), 2, DType::F32, &Device::Cpu).unwrap();
        b.load_state(&a.state().unwrap()).unwrap();
        let x = random_input(1, 4, 16, 16, 7);
        let da: Vec<f32> = a.forward(&x).unwrap().depth.flatten_all().unwrap().to_vec1().unwrap();
        let db: Vec<f32> = b.forward(&x).unwrap().depth.flatten_all().unwrap().to_vec1().unwrap();
        assert_eq!(da, db);
        let mut partial = a.state().unwrap();
        partial.remove("pos_embed");
        assert!(matches!(b.load_state(&partial), Err(Error::MissingParameter(_))));
    }
}

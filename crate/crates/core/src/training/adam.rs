use candle_core::backprop::GradStore;
use candle_core::Tensor;

use crate::error::Result;
use crate::fusion::{NamedParam, ParamGroup};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with one learning rate per parameter group and optional global-norm
/// gradient clipping.
pub struct Adam {
    params: Vec<NamedParam>,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
    config: AdamConfig,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    /// Norm of the gradients of the new group alone.
    pub new_group_grad_norm: f64,
}

impl Adam {
    pub fn new(params: Vec<NamedParam>, config: AdamConfig) -> Result<Self> {
        let m = params
            .iter()
            .map(|p| p.var.zeros_like())
            .collect::<candle_core::Result<Vec<_>>>()?;
        let v = m.clone();
        Ok(Self { params, m, v, t: 0, config })
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, grads: &GradStore, lr_pretrained: f64, lr_new: f64, clip_norm: Option<f64>) -> Result<StepStats> {
        let mut total = 0.0;
        let mut new_total = 0.0;
        for p in &self.params {
            if let Some(g) = grads.get(p.var.as_tensor()) {
                let sq = g.detach().sqr()?.sum_all()?.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?;
                total += sq;
                if p.group == ParamGroup::New {
                    new_total += sq;
                }
            }
        }
        let grad_norm = total.sqrt();
        let scale = match clip_norm {
            Some(c) if grad_norm > c => c / grad_norm,
            _ => 1.0,
        };

        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let bias1 = 1.0 - beta1.powi(self.t as i32);
        let bias2 = 1.0 - beta2.powi(self.t as i32);
        for (i, p) in self.params.iter().enumerate() {
            let Some(g) = grads.get(p.var.as_tensor()) else {
                continue;
            };
            // Gradients and moments must not keep the autodiff graph alive.
            let g = g.detach().affine(scale, 0.0)?;
            let m = ((&self.m[i] * beta1)? + (&g * (1.0 - beta1))?)?;
            let v = ((&self.v[i] * beta2)? + (g.sqr()? * (1.0 - beta2))?)?;
            let lr = match p.group {
                ParamGroup::Pretrained => lr_pretrained,
                ParamGroup::New => lr_new,
            };
            let update = (m.affine(1.0 / bias1, 0.0)? / v.affine(1.0 / bias2, 0.0)?.sqrt()?.affine(1.0, eps)?)?;
            p.var.set(&(p.var.as_tensor() - update.affine(lr, 0.0)?)?)?;
            self.m[i] = m.detach();
            self.v[i] = v.detach();
        }
        Ok(StepStats {
            grad_norm,
            new_group_grad_norm: new_total.sqrt(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{Device, Var};

    fn param(name: &str, value: f64, group: ParamGroup) -> NamedParam {
        NamedParam {
            name: name.into(),
            var: Var::new(&[value], &Device::Cpu).unwrap(),
            group,
        }
    }

    fn value(p: &NamedParam) -> f64 {
        p.var.as_tensor().to_vec1::<f64>().unwrap()[0]
    }

    #[test]
    fn first_step_moves_by_lr_per_group() {
        let a = param("a", 1.0, ParamGroup::Pretrained);
        let b = param("b", 1.0, ParamGroup::New);
        let mut opt = Adam::new(vec![a.clone(), b.clone()], AdamConfig::default()).unwrap();
        let loss = (a.var.as_tensor().sqr().unwrap() * 3.0).unwrap().sum_all().unwrap()
            + b.var.as_tensor().sum_all().unwrap();
        let grads = loss.unwrap().backward().unwrap();
        let stats = opt.step(&grads, 0.01, 0.1, None).unwrap();
        // Bias-corrected first step is lr · sign(g) up to eps.
        assert!((value(&a) - 0.99).abs() < 1e-9);
        assert!((value(&b) - 0.9).abs() < 1e-9);
        assert!((stats.grad_norm - 37f64.sqrt()).abs() < 1e-12);
        assert!((stats.new_group_grad_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let a = param("a", 5.0, ParamGroup::Pretrained);
        let mut opt = Adam::new(vec![a.clone()], AdamConfig::default()).unwrap();
        for _ in 0..2000 {
            let loss = (a.var.as_tensor() - 2.0).unwrap().sqr().unwrap().sum_all().unwrap();
            let grads = loss.backward().unwrap();
            opt.step(&grads, 0.05, 0.0, Some(1.0)).unwrap();
        }
        assert!((value(&a) - 2.0).abs() < 1e-3);
        assert_eq!(opt.steps_taken(), 2000);
    }
}

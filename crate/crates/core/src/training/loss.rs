//! Scale-invariant log loss.

use candle_core::{Tensor, D};

use crate::error::{Error, Result};
use crate::{DepthMap, Mask};

/// Added under the square root of the batched tensor loss so its gradient
/// stays finite when the residual variance vanishes.
pub const SILOG_TENSOR_EPS: f64 = 1e-8;

fn log_residuals(pred: &DepthMap, gt: &DepthMap, mask: &Mask) -> Result<Vec<((usize, usize), f64)>> {
    if pred.dim() != gt.dim() || mask.dim() != gt.dim() {
        return Err(Error::ShapeMismatch {
            expected: gt.shape().to_vec(),
            actual: if pred.dim() != gt.dim() { pred.shape() } else { mask.shape() }.to_vec(),
        });
    }
    let mut out = Vec::new();
    for ((idx, &m), (&p, &g)) in mask.indexed_iter().zip(pred.iter().zip(gt)) {
        if !m {
            continue;
        }
        for v in [p, g] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NonPositiveDepth { row: idx.0, col: idx.1, value: v });
            }
        }
        out.push((idx, p.ln() - g.ln()));
    }
    if out.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(out)
}

/// `S = mean(g²) − λ·mean(g)²`, evaluated as `var(g) + (1 − λ)·mean(g)²` to
/// avoid cancellation.
fn moments(g: &[((usize, usize), f64)], lambda: f64) -> (f64, f64) {
    let n = g.len() as f64;
    let mean = g.iter().map(|(_, x)| x).sum::<f64>() / n;
    let var = g.iter().map(|(_, x)| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var + (1.0 - lambda) * mean * mean)
}

/// `α · sqrt(mean(g²) − λ·mean(g)²)` with `g = log pred − log gt` on the mask.
pub fn silog_loss(pred: &DepthMap, gt: &DepthMap, mask: &Mask, lambda: f64, alpha: f64) -> Result<f64> {
    let g = log_residuals(pred, gt, mask)?;
    Ok(alpha * moments(&g, lambda).1.sqrt())
}

/// Gradient of [`silog_loss`] with respect to `pred`; zero off the mask.
///
/// `∂L/∂pred_i = α (g_i − λ ḡ) / (n · sqrt(S) · pred_i)`. Where `S = 0` the
/// loss is at its minimum and the zero subgradient is returned.
pub fn silog_grad(pred: &DepthMap, gt: &DepthMap, mask: &Mask, lambda: f64, alpha: f64) -> Result<DepthMap> {
    let g = log_residuals(pred, gt, mask)?;
    let (mean, s) = moments(&g, lambda);
    let mut grad = DepthMap::zeros(pred.dim());
    if s > 0.0 {
        let scale = alpha / (g.len() as f64 * s.sqrt());
        for (idx, gi) in g {
            grad[idx] = scale * (gi - lambda * mean) / pred[idx];
        }
    }
    Ok(grad)
}

/// Per-sample SILog over `[B, H, W]` tensors, averaged over the batch.
///
/// `mask` is 1 on supervised pixels and 0 elsewhere; `gt` may hold any
/// positive placeholder off the mask. Every sample needs at least one
/// supervised pixel.
pub fn silog_loss_tensor(pred: &Tensor, gt: &Tensor, mask: &Tensor, lambda: f64, alpha: f64) -> Result<Tensor> {
    let (b, h, w) = pred.dims3()?;
    let flat = |t: &Tensor| t.reshape((b, h * w));
    let mask = flat(mask)?.to_dtype(pred.dtype())?;
    let g = ((flat(pred)?.log()? - flat(gt)?.to_dtype(pred.dtype())?.log()?)? * &mask)?;
    let n = mask.sum_keepdim(D::Minus1)?;
    let mean = g.sum_keepdim(D::Minus1)?.div(&n)?;
    let centered = (g.broadcast_sub(&mean)? * &mask)?;
    let var = centered.sqr()?.sum_keepdim(D::Minus1)?.div(&n)?;
    let s = (var + mean.sqr()?.affine(1.0 - lambda, 0.0)?)?;
    let per_sample = s.affine(1.0, SILOG_TENSOR_EPS)?.sqrt()?.affine(alpha, 0.0)?;
    Ok(per_sample.mean_all()?)
}

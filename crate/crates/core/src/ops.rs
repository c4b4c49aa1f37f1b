//! Pointwise activations, global average pooling, the classification head
//! and the categorical cross-entropy loss.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Lower clamp applied to probabilities before taking logarithms.
pub const PROB_CLAMP: f32 = 1e-9;

pub fn relu(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// ReLU gradient, masked by the forward *output* (out > 0 iff in > 0).
pub fn relu_backward(grad_out: &Tensor, forward_out: &Tensor) -> Tensor {
    let mut gx = grad_out.clone();
    for (g, &o) in gx.data_mut().iter_mut().zip(forward_out.data()) {
        if o <= 0.0 {
            *g = 0.0;
        }
    }
    gx
}

/// Global average pooling over the time axis: `(B, C, L) -> (B, C)` means,
/// returned as row-major `B x C`.
pub fn gap(x: &Tensor) -> Result<Vec<f32>> {
    let (b, c, l) = x.shape();
    if l == 0 {
        return Err(Error::Invalid("global average pooling requires length >= 1".into()));
    }
    let mut out = vec![0.0f32; b * c];
    for bi in 0..b {
        for ci in 0..c {
            let mut sum = 0.0f32;
            for &v in x.channel(bi, ci) {
                sum += v;
            }
            out[bi * c + ci] = sum / l as f32;
        }
    }
    Ok(out)
}

/// Spread feature gradients evenly back over the time axis.
pub fn gap_backward(grad_feat: &[f32], batch: usize, channels: usize, length: usize) -> Tensor {
    let mut gx = Tensor::zeros(batch, channels, length);
    for bi in 0..batch {
        for ci in 0..channels {
            let g = grad_feat[bi * channels + ci] / length as f32;
            gx.channel_mut(bi, ci).fill(g);
        }
    }
    gx
}

/// Numerically stable softmax (max-subtraction) over each row of `logits`.
pub fn softmax_rows(logits: &[f32], rows: usize, cols: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; rows * cols];
    for r in 0..rows {
        let row = &logits[r * cols..(r + 1) * cols];
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let mut sum = 0.0f32;
        let o = &mut out[r * cols..(r + 1) * cols];
        for (i, &v) in row.iter().enumerate() {
            let e = (v - max).exp();
            o[i] = e;
            sum += e;
        }
        for v in o.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Fully connected head: `logits = W . features + b`, then softmax.
///
/// `features` is row-major `B x F`, `w` row-major `K x F`, `b` length `K`.
/// Returns row-major `B x K` probabilities; each row sums to 1 within 1e-6.
pub fn dense_softmax(features: &[f32], batch: usize, w: &[f32], b: &[f32]) -> Result<Vec<f32>> {
    if batch == 0 {
        return Err(Error::Invalid("dense head requires at least one sample".into()));
    }
    if features.len() % batch != 0 {
        return Err(Error::Shape(format!(
            "feature buffer of {} values does not divide into {batch} rows",
            features.len()
        )));
    }
    let f = features.len() / batch;
    let k = b.len();
    if w.len() != k * f {
        return Err(Error::Shape(format!(
            "dense weight has {} values, expected {k} x {f}",
            w.len()
        )));
    }
    let mut logits = vec![0.0f32; batch * k];
    for bi in 0..batch {
        let feat = &features[bi * f..(bi + 1) * f];
        for ki in 0..k {
            let wk = &w[ki * f..(ki + 1) * f];
            let mut acc = b[ki];
            for (x, wv) in feat.iter().zip(wk) {
                acc += x * wv;
            }
            logits[bi * k + ki] = acc;
        }
    }
    Ok(softmax_rows(&logits, batch, k))
}

/// Categorical cross-entropy of one probability row against a one-hot target.
/// Probabilities are clamped at [`PROB_CLAMP`] before the logarithm.
pub fn cross_entropy(pred: &[f32], target: &[f32]) -> Result<f32> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "prediction has {} classes, target has {}",
            pred.len(),
            target.len()
        )));
    }
    validate_one_hot(target)?;
    let mut loss = 0.0f32;
    for (&p, &t) in pred.iter().zip(target) {
        if t != 0.0 {
            loss -= t * p.max(PROB_CLAMP).ln();
        }
    }
    Ok(loss)
}

/// Combined softmax + cross-entropy gradient with respect to the logits:
/// `pred - target`, one row per sample.
pub fn softmax_ce_grad(pred: &[f32], target: &[f32]) -> Vec<f32> {
    pred.iter().zip(target).map(|(p, t)| p - t).collect()
}

fn validate_one_hot(target: &[f32]) -> Result<()> {
    let ones = target.iter().filter(|&&t| t == 1.0).count();
    let zeros = target.iter().filter(|&&t| t == 0.0).count();
    if ones != 1 || ones + zeros != target.len() {
        return Err(Error::Invalid(format!("target {target:?} is not one-hot")));
    }
    Ok(())
}

//! Per-channel batch normalization over the (batch, length) axes.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const BN_EPSILON: f32 = 1e-5;
pub const BN_MOMENTUM: f32 = 0.99;

/// Trainable scale/shift plus running statistics for one normalization layer.
///
/// `gamma` and `beta` are the only trainable values: exactly two parameters
/// per channel. Running statistics are carried by checkpoints but never
/// counted as trainable. The first training batch seeds the running
/// estimates directly (there is nothing to average before any data has been
/// seen); every later update is an exponential moving average.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub momentum: f32,
    pub epsilon: f32,
    /// False until the first training batch seeds the running statistics.
    pub stats_initialized: bool,
}

impl BatchNormState {
    /// Fresh state: gamma 1, beta 0, running mean 0, running variance 1.
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: BN_MOMENTUM,
            epsilon: BN_EPSILON,
            stats_initialized: false,
        }
    }

    /// Fold one batch's statistics into the running estimates.
    pub fn update_running(&mut self, mean: &[f32], var: &[f32]) {
        if !self.stats_initialized {
            self.running_mean.copy_from_slice(mean);
            self.running_var.copy_from_slice(var);
            self.stats_initialized = true;
            return;
        }
        for c in 0..self.channels() {
            self.running_mean[c] = self.momentum * self.running_mean[c] + (1.0 - self.momentum) * mean[c];
            self.running_var[c] = self.momentum * self.running_var[c] + (1.0 - self.momentum) * var[c];
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, x: &Tensor) -> Result<()> {
        if x.channels() != self.channels() {
            return Err(Error::Shape(format!(
                "batch norm over {} channels applied to input of shape {:?}",
                self.channels(),
                x.shape()
            )));
        }
        Ok(())
    }
}

/// Per-channel batch statistics over all (batch, length) positions.
/// Variance is the population variance.
pub fn batch_stats(x: &Tensor) -> (Vec<f32>, Vec<f32>) {
    let (b, c, l) = x.shape();
    let m = (b * l) as f32;
    let mut mean = vec![0.0f32; c];
    let mut var = vec![0.0f32; c];
    for ci in 0..c {
        let mut sum = 0.0f32;
        for bi in 0..b {
            for &v in x.channel(bi, ci) {
                sum += v;
            }
        }
        mean[ci] = sum / m;
        let mut sq = 0.0f32;
        for bi in 0..b {
            for &v in x.channel(bi, ci) {
                let d = v - mean[ci];
                sq += d * d;
            }
        }
        var[ci] = sq / m;
    }
    (mean, var)
}

/// Everything the backward pass needs from a training-mode forward.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    /// Normalized values (x - mean) / sqrt(var + eps), before scale/shift.
    pub x_hat: Tensor,
    /// Per-channel 1 / sqrt(var + eps).
    pub inv_std: Vec<f32>,
}

/// Normalize with explicit statistics; used by both training and inference paths.
fn normalize(x: &Tensor, mean: &[f32], var: &[f32], state: &BatchNormState) -> (Tensor, BatchNormCache) {
    let (b, c, l) = x.shape();
    let mut out = Tensor::zeros(b, c, l);
    let mut x_hat = Tensor::zeros(b, c, l);
    let inv_std: Vec<f32> = var.iter().map(|&v| 1.0 / (v + state.epsilon).sqrt()).collect();
    for bi in 0..b {
        for ci in 0..c {
            let xc = x.channel(bi, ci);
            let (g, be, mu, is) = (state.gamma[ci], state.beta[ci], mean[ci], inv_std[ci]);
            let xh = x_hat.channel_mut(bi, ci);
            for (t, &v) in xc.iter().enumerate() {
                xh[t] = (v - mu) * is;
            }
            let oc = out.channel_mut(bi, ci);
            for t in 0..l {
                oc[t] = g * x_hat.channel(bi, ci)[t] + be;
            }
        }
    }
    (out, BatchNormCache { x_hat, inv_std })
}

/// Training-mode forward: normalize with batch statistics and fold them
/// into the running estimates (first batch seeds them, then
/// `running = momentum * running + (1 - momentum) * batch`).
pub fn batchnorm_train(x: &Tensor, state: &mut BatchNormState) -> Result<(Tensor, BatchNormCache)> {
    state.check(x)?;
    let (mean, var) = batch_stats(x);
    let (out, cache) = normalize(x, &mean, &var, state);
    state.update_running(&mean, &var);
    Ok((out, cache))
}

/// Training-mode forward without mutating the state; returns the statistics
/// so the caller can apply the running-average update itself.
pub fn batchnorm_train_functional(
    x: &Tensor,
    state: &BatchNormState,
) -> Result<(Tensor, BatchNormCache, (Vec<f32>, Vec<f32>))> {
    state.check(x)?;
    let (mean, var) = batch_stats(x);
    let (out, cache) = normalize(x, &mean, &var, state);
    Ok((out, cache, (mean, var)))
}

/// Inference-mode forward using the running statistics.
pub fn batchnorm_infer(x: &Tensor, state: &BatchNormState) -> Result<Tensor> {
    state.check(x)?;
    let (out, _) = normalize(x, &state.running_mean, &state.running_var, state);
    Ok(out)
}

/// `out = gamma * (x - mu) / sqrt(var + eps) + beta` per channel;
/// training mode uses batch statistics and updates the running averages.
pub fn batchnorm_forward(x: &Tensor, state: &mut BatchNormState, training: bool) -> Result<Tensor> {
    if training {
        Ok(batchnorm_train(x, state)?.0)
    } else {
        batchnorm_infer(x, state)
    }
}

/// Gradients of a training-mode batch norm.
#[derive(Debug, Clone)]
pub struct BatchNormGrads {
    pub grad_x: Tensor,
    pub grad_gamma: Vec<f32>,
    pub grad_beta: Vec<f32>,
}

/// Backward through training-mode normalization (batch statistics are a
/// function of `x`, which the input gradient accounts for).
pub fn batchnorm_backward(grad_out: &Tensor, cache: &BatchNormCache, state: &BatchNormState) -> BatchNormGrads {
    let (b, c, l) = grad_out.shape();
    let m = (b * l) as f32;
    let mut grad_gamma = vec![0.0f32; c];
    let mut grad_beta = vec![0.0f32; c];
    let mut grad_x = Tensor::zeros(b, c, l);
    for ci in 0..c {
        let mut sum_g = 0.0f32;
        let mut sum_g_xhat = 0.0f32;
        for bi in 0..b {
            let g = grad_out.channel(bi, ci);
            let xh = cache.x_hat.channel(bi, ci);
            for t in 0..l {
                sum_g += g[t];
                sum_g_xhat += g[t] * xh[t];
            }
        }
        grad_beta[ci] = sum_g;
        grad_gamma[ci] = sum_g_xhat;
        let scale = state.gamma[ci] * cache.inv_std[ci] / m;
        for bi in 0..b {
            let g = grad_out.channel(bi, ci);
            let xh = cache.x_hat.channel(bi, ci);
            let gx = grad_x.channel_mut(bi, ci);
            for t in 0..l {
                gx[t] = scale * (m * g[t] - sum_g - xh[t] * sum_g_xhat);
            }
        }
    }
    BatchNormGrads { grad_x, grad_gamma, grad_beta }
}

//! 1-D convolutions: standard, depthwise and pointwise, with dilation,
//! stride 1 and same padding, plus their hand-written backward passes.
//!
//! Same padding places `pad_left = (E - 1) / 2` zeros before the series and
//! `E - 1 - pad_left` after, where `E = 1 + d * (k - 1)` is the effective
//! kernel extent. Even extents therefore pad one more position on the right.
//! Output length always equals input length.
//!
//! Weight layouts (row-major, flat `&[f32]`):
//!
//! * standard:  `[out_channels, in_channels, kernel]`
//! * depthwise: `[channels, kernel]` (one filter per input channel)
//! * pointwise: `[out_channels, in_channels]`

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// How a convolution maps input channels to output channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMode {
    /// Every output channel sees every input channel.
    Standard,
    /// One filter per input channel; output channels equal input channels.
    Depthwise,
    /// Kernel size 1, dilation 1: a channel-mixing projection.
    Pointwise,
}

/// Validated description of a convolution layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub mode: ConvMode,
    pub use_bias: bool,
}

impl ConvSpec {
    pub fn standard(in_channels: usize, out_channels: usize, kernel: usize, dilation: usize, use_bias: bool) -> Result<Self> {
        Self::new(in_channels, out_channels, kernel, dilation, ConvMode::Standard, use_bias)
    }

    pub fn depthwise(channels: usize, kernel: usize, dilation: usize) -> Result<Self> {
        Self::new(channels, channels, kernel, dilation, ConvMode::Depthwise, false)
    }

    pub fn pointwise(in_channels: usize, out_channels: usize, use_bias: bool) -> Result<Self> {
        Self::new(in_channels, out_channels, 1, 1, ConvMode::Pointwise, use_bias)
    }

    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        dilation: usize,
        mode: ConvMode,
        use_bias: bool,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || kernel == 0 {
            return Err(Error::Invalid("conv spec requires positive channel counts and kernel size".into()));
        }
        if dilation < 1 {
            return Err(Error::Invalid("conv dilation must be >= 1".into()));
        }
        match mode {
            ConvMode::Pointwise if kernel != 1 || dilation != 1 => {
                return Err(Error::Invalid(format!(
                    "pointwise conv forces kernel 1 and dilation 1, got k={kernel}, d={dilation}"
                )));
            }
            ConvMode::Depthwise if out_channels != in_channels => {
                return Err(Error::Invalid(format!(
                    "depthwise conv forces out_channels == in_channels, got {out_channels} != {in_channels}"
                )));
            }
            _ => {}
        }
        Ok(Self { in_channels, out_channels, kernel, dilation, mode, use_bias })
    }

    /// Effective kernel extent `1 + d * (k - 1)`.
    pub fn effective_extent(&self) -> usize {
        1 + self.dilation * (self.kernel - 1)
    }

    /// Left zero padding under same padding: `(E - 1) / 2`.
    pub fn pad_left(&self) -> usize {
        (self.effective_extent() - 1) / 2
    }

    /// Number of weight values this spec expects.
    pub fn weight_len(&self) -> usize {
        match self.mode {
            ConvMode::Standard => self.out_channels * self.in_channels * self.kernel,
            ConvMode::Depthwise => self.in_channels * self.kernel,
            ConvMode::Pointwise => self.out_channels * self.in_channels,
        }
    }

    fn validate_x_w(&self, x: &Tensor, w: &[f32]) -> Result<()> {
        if x.channels() != self.in_channels {
            return Err(Error::Shape(format!(
                "conv input has shape {:?} but spec expects {} input channels",
                x.shape(),
                self.in_channels
            )));
        }
        if w.len() != self.weight_len() {
            return Err(Error::Shape(format!(
                "conv weight has {} values, spec {:?} expects {}",
                w.len(),
                self,
                self.weight_len()
            )));
        }
        Ok(())
    }

    fn validate(&self, x: &Tensor, w: &[f32], bias: Option<&[f32]>) -> Result<()> {
        self.validate_x_w(x, w)?;
        match (self.use_bias, bias) {
            (true, Some(b)) if b.len() != self.out_channels => {
                return Err(Error::Shape(format!(
                    "conv bias has {} values, spec expects {}",
                    b.len(),
                    self.out_channels
                )));
            }
            (true, None) => return Err(Error::Shape("conv spec uses bias but none was given".into())),
            (false, Some(_)) => return Err(Error::Shape("conv spec is bias-free but a bias was given".into())),
            _ => {}
        }
        Ok(())
    }
}

/// Accumulate `acc[t] += w_j * x[t - pad_left + j*d]` for one kernel tap,
/// skipping the zero-padded region by clamping the valid `t` range.
#[inline]
fn add_tap(acc: &mut [f32], x: &[f32], w_j: f32, shift: isize) {
    let l = x.len() as isize;
    let t_lo = (-shift).max(0);
    let t_hi = (l - shift).min(l);
    for t in t_lo..t_hi {
        acc[t as usize] += w_j * x[(t + shift) as usize];
    }
}

/// Forward convolution. Output length equals input length (same padding).
///
/// `out[b, o, t] = bias[o] + sum_{c, j} x[b, c, t - pad_left + j*d] * w[o, c, j]`,
/// with padded positions reading zero. Taps are accumulated channel-major,
/// kernel-minor, so the summation order is fixed.
pub fn conv1d_forward(x: &Tensor, w: &[f32], bias: Option<&[f32]>, spec: &ConvSpec) -> Result<Tensor> {
    spec.validate(x, w, bias)?;
    let (b, _, l) = x.shape();
    let pad_left = spec.pad_left() as isize;
    let d = spec.dilation as isize;
    let mut out = Tensor::zeros(b, spec.out_channels, l);
    for bi in 0..b {
        for o in 0..spec.out_channels {
            let acc = out.channel_mut(bi, o);
            if let Some(bias) = bias {
                acc.fill(bias[o]);
            }
            match spec.mode {
                ConvMode::Standard => {
                    for c in 0..spec.in_channels {
                        let xc = x.channel(bi, c);
                        let w_oc = &w[(o * spec.in_channels + c) * spec.kernel..][..spec.kernel];
                        for (j, &w_j) in w_oc.iter().enumerate() {
                            add_tap(acc, xc, w_j, j as isize * d - pad_left);
                        }
                    }
                }
                ConvMode::Depthwise => {
                    let xc = x.channel(bi, o);
                    let w_c = &w[o * spec.kernel..][..spec.kernel];
                    for (j, &w_j) in w_c.iter().enumerate() {
                        add_tap(acc, xc, w_j, j as isize * d - pad_left);
                    }
                }
                ConvMode::Pointwise => {
                    for c in 0..spec.in_channels {
                        let xc = x.channel(bi, c);
                        let w_oc = w[o * spec.in_channels + c];
                        for (t, a) in acc.iter_mut().enumerate() {
                            *a += w_oc * xc[t];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv1d_forward`] with respect to input, weights and bias.
#[derive(Debug, Clone)]
pub struct ConvGrads {
    /// Present only when requested (`need_grad_x`).
    pub grad_x: Option<Tensor>,
    pub grad_w: Vec<f32>,
    pub grad_bias: Option<Vec<f32>>,
}

/// Exact partial derivatives of the forward contract.
///
/// `need_grad_x = false` skips the input gradient (first layers sit on raw
/// data). Frozen kernels simply discard `grad_w` at the call site.
pub fn conv1d_backward(
    x: &Tensor,
    w: &[f32],
    grad_out: &Tensor,
    spec: &ConvSpec,
    need_grad_x: bool,
) -> Result<ConvGrads> {
    spec.validate_x_w(x, w)?;
    if grad_out.shape() != (x.batch(), spec.out_channels, x.length()) {
        return Err(Error::Shape(format!(
            "conv grad_out has shape {:?}, expected ({}, {}, {})",
            grad_out.shape(),
            x.batch(),
            spec.out_channels,
            x.length()
        )));
    }
    let (b, _, l) = x.shape();
    let pad_left = spec.pad_left() as isize;
    let d = spec.dilation as isize;
    let mut grad_w = vec![0.0f32; spec.weight_len()];
    let mut grad_x = need_grad_x.then(|| Tensor::zeros(b, spec.in_channels, l));
    let grad_bias = spec.use_bias.then(|| {
        let mut gb = vec![0.0f32; spec.out_channels];
        for bi in 0..b {
            for o in 0..spec.out_channels {
                gb[o] += grad_out.channel(bi, o).iter().sum::<f32>();
            }
        }
        gb
    });

    for bi in 0..b {
        for o in 0..spec.out_channels {
            let g = grad_out.channel(bi, o);
            match spec.mode {
                ConvMode::Standard => {
                    for c in 0..spec.in_channels {
                        let xc = x.channel(bi, c);
                        let gw = &mut grad_w[(o * spec.in_channels + c) * spec.kernel..][..spec.kernel];
                        accumulate_taps(gw, g, xc, d, pad_left);
                        if let Some(gx) = grad_x.as_mut() {
                            let w_oc = &w[(o * spec.in_channels + c) * spec.kernel..][..spec.kernel];
                            scatter_taps(gx.channel_mut(bi, c), g, w_oc, d, pad_left);
                        }
                    }
                }
                ConvMode::Depthwise => {
                    let xc = x.channel(bi, o);
                    let gw = &mut grad_w[o * spec.kernel..][..spec.kernel];
                    accumulate_taps(gw, g, xc, d, pad_left);
                    if let Some(gx) = grad_x.as_mut() {
                        let w_c = &w[o * spec.kernel..][..spec.kernel];
                        scatter_taps(gx.channel_mut(bi, o), g, w_c, d, pad_left);
                    }
                }
                ConvMode::Pointwise => {
                    for c in 0..spec.in_channels {
                        let xc = x.channel(bi, c);
                        let mut acc = 0.0f32;
                        for t in 0..l {
                            acc += g[t] * xc[t];
                        }
                        grad_w[o * spec.in_channels + c] += acc;
                        if let Some(gx) = grad_x.as_mut() {
                            let w_oc = w[o * spec.in_channels + c];
                            let gxc = gx.channel_mut(bi, c);
                            for t in 0..l {
                                gxc[t] += w_oc * g[t];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(ConvGrads { grad_x, grad_w, grad_bias })
}

/// `gw[j] += sum_t g[t] * x[t + j*d - pad_left]` over the valid range.
#[inline]
fn accumulate_taps(gw: &mut [f32], g: &[f32], x: &[f32], d: isize, pad_left: isize) {
    let l = x.len() as isize;
    for (j, gw_j) in gw.iter_mut().enumerate() {
        let shift = j as isize * d - pad_left;
        let t_lo = (-shift).max(0);
        let t_hi = (l - shift).min(l);
        let mut acc = 0.0f32;
        for t in t_lo..t_hi {
            acc += g[t as usize] * x[(t + shift) as usize];
        }
        *gw_j += acc;
    }
}

/// `gx[t + j*d - pad_left] += w[j] * g[t]`: the transpose of the forward taps.
#[inline]
fn scatter_taps(gx: &mut [f32], g: &[f32], w: &[f32], d: isize, pad_left: isize) {
    let l = gx.len() as isize;
    for (j, &w_j) in w.iter().enumerate() {
        let shift = j as isize * d - pad_left;
        let t_lo = (-shift).max(0);
        let t_hi = (l - shift).min(l);
        for t in t_lo..t_hi {
            gx[(t + shift) as usize] += w_j * g[t as usize];
        }
    }
}

/// Depthwise convolution followed by a pointwise projection, with no
/// activation between the phases. Implemented as the literal composition of
/// [`conv1d_forward`] calls, so it is bit-exact with applying them separately.
pub fn dwsc_forward(
    x: &Tensor,
    depthwise_w: &[f32],
    pointwise_w: &[f32],
    depthwise: &ConvSpec,
    pointwise: &ConvSpec,
) -> Result<Tensor> {
    let mid = conv1d_forward(x, depthwise_w, None, depthwise)?;
    conv1d_forward(&mid, pointwise_w, None, pointwise)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(vals: &[f32]) -> Tensor {
        Tensor::from_series(vals)
    }

    #[test]
    fn hand_convolution_k3() {
        let spec = ConvSpec::standard(1, 1, 3, 1, false).unwrap();
        let out = conv1d_forward(&series(&[1.0, 2.0, 3.0, 4.0]), &[1.0, 0.0, -1.0], None, &spec).unwrap();
        assert_eq!(out.data(), &[-2.0, -2.0, -2.0, 3.0]);
    }

    #[test]
    fn hand_convolution_k2_dilated() {
        // Effective extent 3, pad_left 1.
        let spec = ConvSpec::standard(1, 1, 2, 2, false).unwrap();
        let out = conv1d_forward(&series(&[1.0, 2.0, 3.0, 4.0]), &[1.0, -1.0], None, &spec).unwrap();
        assert_eq!(out.data(), &[-2.0, -2.0, -2.0, 3.0]);
    }

    #[test]
    fn identity_kernel_preserves_input() {
        let spec = ConvSpec::standard(1, 1, 1, 1, false).unwrap();
        let x = series(&[0.5, -1.5, 7.0]);
        let out = conv1d_forward(&x, &[1.0], None, &spec).unwrap();
        assert_eq!(out.data(), x.data());
    }

    #[test]
    fn kernel_longer_than_input_is_permitted() {
        let spec = ConvSpec::standard(1, 1, 5, 1, false).unwrap();
        let out = conv1d_forward(&series(&[1.0, 1.0]), &[1.0; 5], None, &spec).unwrap();
        assert_eq!(out.length(), 2);
        assert_eq!(out.data(), &[2.0, 2.0]);
    }

    #[test]
    fn channel_mismatch_rejected_with_both_shapes() {
        let spec = ConvSpec::standard(2, 1, 3, 1, false).unwrap();
        let err = conv1d_forward(&series(&[1.0, 2.0]), &[0.0; 6], None, &spec).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(1, 1, 2)") && msg.contains('2'), "unhelpful message: {msg}");
    }

    #[test]
    fn identity_kernel_backward_passes_grad_through() {
        let spec = ConvSpec::standard(1, 1, 1, 1, false).unwrap();
        let x = series(&[1.0, 2.0, 3.0, 4.0]);
        let g = series(&[0.1, 0.2, 0.3, 0.4]);
        let grads = conv1d_backward(&x, &[1.0], &g, &spec, true).unwrap();
        assert_eq!(grads.grad_x.unwrap().data(), g.data());
    }

    #[test]
    fn scalar_chain_rule() {
        let spec = ConvSpec::standard(1, 1, 1, 1, false).unwrap();
        let x = series(&[3.0]);
        let g = series(&[1.5]);
        let grads = conv1d_backward(&x, &[2.0], &g, &spec, true).unwrap();
        assert_eq!(grads.grad_w, vec![1.5 * 3.0]);
        assert_eq!(grads.grad_x.unwrap().data(), &[1.5 * 2.0]);
    }

    #[test]
    fn dwsc_identity_composition() {
        // Identity depthwise then channel-summing pointwise.
        let x = Tensor::from_vec(1, 2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let dw = ConvSpec::depthwise(2, 1, 1).unwrap();
        let pw = ConvSpec::pointwise(2, 1, false).unwrap();
        let out = dwsc_forward(&x, &[1.0, 1.0], &[1.0, 1.0], &dw, &pw).unwrap();
        assert_eq!(out.data(), &[5.0, 7.0, 9.0]);
    }

    #[test]
    fn dwsc_double_identity() {
        let x = Tensor::from_vec(1, 2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let dw = ConvSpec::depthwise(2, 1, 1).unwrap();
        let pw = ConvSpec::pointwise(2, 2, false).unwrap();
        let out = dwsc_forward(&x, &[1.0, 1.0], &[1.0, 0.0, 0.0, 1.0], &dw, &pw).unwrap();
        assert_eq!(out.data(), x.data());
    }

    #[test]
    fn pointwise_spec_rejects_k_above_1() {
        assert!(ConvSpec::new(2, 3, 2, 1, ConvMode::Pointwise, false).is_err());
    }

    #[test]
    fn depthwise_spec_rejects_channel_change() {
        assert!(ConvSpec::new(2, 3, 2, 1, ConvMode::Depthwise, false).is_err());
    }
}

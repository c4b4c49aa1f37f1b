//! Fixed, non-trainable convolution kernels that respond to increasing
//! intervals, decreasing intervals and peaks. They run in parallel with the
//! first learned layer, are excluded from gradient updates and contribute
//! zero trainable parameters.

use serde::{Deserialize, Serialize};

use crate::conv::{conv1d_forward, ConvSpec};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Kernel sizes of the increase detectors in the default bank.
pub const INCREASE_SIZES: [usize; 6] = [2, 4, 8, 16, 32, 64];
/// Kernel sizes of the decrease detectors in the default bank.
pub const DECREASE_SIZES: [usize; 6] = [2, 4, 8, 16, 32, 64];
/// Kernel sizes of the peak detectors in the default bank.
pub const PEAK_SIZES: [usize; 5] = [6, 12, 24, 48, 96];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Increase,
    Decrease,
    Peak,
}

impl FilterKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Increase => "increase",
            Self::Decrease => "decrease",
            Self::Peak => "peak",
        }
    }
}

/// One fixed kernel with its provenance tag.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomFilter {
    pub kind: FilterKind,
    pub size: usize,
    pub coefficients: Vec<f32>,
}

/// The full set of fixed kernels, ordered increase sizes ascending, then
/// decrease sizes ascending, then peak sizes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub filters: Vec<CustomFilter>,
}

/// Alternating -1/+1 taps: negative at even indices, positive at odd ones,
/// so a strictly increasing window produces a strictly positive response.
pub fn make_increase_filter(k: usize) -> Result<Vec<f32>> {
    if k < 2 || k % 2 != 0 {
        return Err(Error::Invalid(format!("increase filter size must be even and >= 2, got {k}")));
    }
    Ok((0..k).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect())
}

/// Negation of the increase filter of the same size.
pub fn make_decrease_filter(k: usize) -> Result<Vec<f32>> {
    Ok(make_increase_filter(k)?.into_iter().map(|c| -c).collect())
}

/// Six quadratic segments `[-l, -rev(l), 2l, 2 rev(l), -l, -rev(l)]` with
/// `l_i = ((i + 1) / s)^2` and segment length `s = k / 6`. The result is
/// zero-sum and palindromic, with a positive center and negative flanks.
pub fn make_peak_filter(k: usize) -> Result<Vec<f32>> {
    if k == 0 || k % 6 != 0 {
        return Err(Error::Invalid(format!("peak filter size must be divisible by 6, got {k}")));
    }
    let s = k / 6;
    let l: Vec<f32> = (0..s).map(|i| ((i + 1) as f32 / s as f32).powi(2)).collect();
    let rev: Vec<f32> = l.iter().rev().copied().collect();
    let mut out = Vec::with_capacity(k);
    out.extend(l.iter().map(|v| -v));
    out.extend(rev.iter().map(|v| -v));
    out.extend(l.iter().map(|v| 2.0 * v));
    out.extend(rev.iter().map(|v| 2.0 * v));
    out.extend(l.iter().map(|v| -v));
    out.extend(rev.iter().map(|v| -v));
    Ok(out)
}

impl FilterBank {
    /// The default 17-kernel bank: 6 increase + 6 decrease + 5 peak detectors.
    pub fn standard() -> Self {
        Self::from_sizes(&INCREASE_SIZES, &DECREASE_SIZES, &PEAK_SIZES).expect("default sizes are valid")
    }

    /// Build a bank from explicit size lists, ordered increase, decrease, peak.
    pub fn from_sizes(increase: &[usize], decrease: &[usize], peak: &[usize]) -> Result<Self> {
        let mut filters = Vec::with_capacity(increase.len() + decrease.len() + peak.len());
        for &k in increase {
            filters.push(CustomFilter { kind: FilterKind::Increase, size: k, coefficients: make_increase_filter(k)? });
        }
        for &k in decrease {
            filters.push(CustomFilter { kind: FilterKind::Decrease, size: k, coefficients: make_decrease_filter(k)? });
        }
        for &k in peak {
            filters.push(CustomFilter { kind: FilterKind::Peak, size: k, coefficients: make_peak_filter(k)? });
        }
        Ok(Self { filters })
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    /// Output channel count when applied to `in_channels` input channels.
    pub fn out_channels(&self, in_channels: usize, multivariate_mode: bool) -> usize {
        if multivariate_mode {
            self.len() * in_channels
        } else {
            self.len()
        }
    }

    /// Forward-pass multiplications performed by the bank on inputs of
    /// length `l` with `in_channels` channels.
    pub fn mult_count(&self, in_channels: usize, l: usize) -> u64 {
        // Both modes touch every (channel, tap, position) combination once.
        self.filters.iter().map(|f| (in_channels * f.size * l) as u64).sum()
    }
}

/// Run every kernel of the bank over `x` (same padding, dilation 1, no bias).
///
/// Univariate mode sums each kernel's response over all input channels
/// (17 output channels). Multivariate mode applies each kernel to each
/// channel independently and concatenates channel-major: output channel
/// `c * bank.len() + f` holds filter `f` on input channel `c`.
pub fn apply_bank(x: &Tensor, bank: &FilterBank, multivariate_mode: bool) -> Result<Tensor> {
    if bank.is_empty() {
        return Err(Error::Invalid("custom filter bank is empty".into()));
    }
    let (b, c, l) = x.shape();
    let mut parts: Vec<Tensor> = Vec::new();
    if multivariate_mode {
        let mut out = Tensor::zeros(b, bank.len() * c, l);
        for ci in 0..c {
            for (fi, filter) in bank.filters.iter().enumerate() {
                let spec = ConvSpec::standard(1, 1, filter.size, 1, false)?;
                for bi in 0..b {
                    let xc = Tensor::from_vec(1, 1, l, x.channel(bi, ci).to_vec())?;
                    let resp = conv1d_forward(&xc, &filter.coefficients, None, &spec)?;
                    out.channel_mut(bi, ci * bank.len() + fi).copy_from_slice(resp.channel(0, 0));
                }
            }
        }
        return Ok(out);
    }
    for filter in &bank.filters {
        // Standard convolution with the same taps replicated on every input
        // channel: responses sum over channels.
        let spec = ConvSpec::standard(c, 1, filter.size, 1, false)?;
        let w: Vec<f32> = (0..c).flat_map(|_| filter.coefficients.iter().copied()).collect();
        parts.push(conv1d_forward(x, &w, None, &spec)?);
    }
    let refs: Vec<&Tensor> = parts.iter().collect();
    Tensor::concat_channels(&refs)
}

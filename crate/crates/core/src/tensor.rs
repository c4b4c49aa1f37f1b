//! Dense rank-3 tensor of `f32`, the medium of all layer computation.
//!
//! Layout is `(batch, channels, length)` in row-major order: batch
//! outermost, time axis innermost. All layer kernels in this crate
//! accumulate in `f32` with a fixed summation order, so identical inputs
//! produce bit-identical outputs across runs.

use crate::error::{Error, Result};

/// A `(batch, channels, length)` array of `f32` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    batch: usize,
    channels: usize,
    length: usize,
    data: Vec<f32>,
}

impl Tensor {
    /// Wrap an existing buffer. `data.len()` must equal `batch * channels * length`.
    pub fn from_vec(batch: usize, channels: usize, length: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != batch * channels * length {
            return Err(Error::Shape(format!(
                "tensor data has {} values, shape ({batch}, {channels}, {length}) needs {}",
                data.len(),
                batch * channels * length
            )));
        }
        Ok(Self { batch, channels, length, data })
    }

    /// All-zero tensor of the given shape.
    pub fn zeros(batch: usize, channels: usize, length: usize) -> Self {
        Self { batch, channels, length, data: vec![0.0; batch * channels * length] }
    }

    /// Single-sample, single-channel tensor from a plain series.
    pub fn from_series(series: &[f32]) -> Self {
        Self { batch: 1, channels: 1, length: series.len(), data: series.to_vec() }
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.channels, self.length)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// One channel of one sample, as a contiguous slice over the time axis.
    pub fn channel(&self, b: usize, c: usize) -> &[f32] {
        let start = (b * self.channels + c) * self.length;
        &self.data[start..start + self.length]
    }

    pub fn channel_mut(&mut self, b: usize, c: usize) -> &mut [f32] {
        let start = (b * self.channels + c) * self.length;
        &mut self.data[start..start + self.length]
    }

    pub fn get(&self, b: usize, c: usize, t: usize) -> f32 {
        self.data[(b * self.channels + c) * self.length + t]
    }

    pub fn set(&mut self, b: usize, c: usize, t: usize, v: f32) {
        self.data[(b * self.channels + c) * self.length + t] = v;
    }

    /// True when every value is finite. Forward and backward passes on
    /// finite inputs must keep this true; a NaN/Inf is a contract violation.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Concatenate along the channel axis. All inputs must share batch and length.
    pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
        let first = parts.first().ok_or_else(|| Error::Invalid("concat of zero tensors".into()))?;
        let (b, _, l) = first.shape();
        let mut channels = 0;
        for p in parts {
            if p.batch != b || p.length != l {
                return Err(Error::Shape(format!(
                    "concat_channels: ({}, {}, {}) does not align with ({b}, _, {l})",
                    p.batch, p.channels, p.length
                )));
            }
            channels += p.channels;
        }
        let mut out = Tensor::zeros(b, channels, l);
        for bi in 0..b {
            let mut c_off = 0;
            for p in parts {
                for c in 0..p.channels {
                    out.channel_mut(bi, c_off + c).copy_from_slice(p.channel(bi, c));
                }
                c_off += p.channels;
            }
        }
        Ok(out)
    }

    /// Split along the channel axis into parts of the given widths.
    pub fn split_channels(&self, widths: &[usize]) -> Result<Vec<Tensor>> {
        let total: usize = widths.iter().sum();
        if total != self.channels {
            return Err(Error::Shape(format!(
                "split_channels: widths sum to {total}, tensor has {} channels",
                self.channels
            )));
        }
        let mut parts = Vec::with_capacity(widths.len());
        let mut c_off = 0;
        for &w in widths {
            let mut part = Tensor::zeros(self.batch, w, self.length);
            for b in 0..self.batch {
                for c in 0..w {
                    part.channel_mut(b, c).copy_from_slice(self.channel(b, c_off + c));
                }
            }
            c_off += w;
            parts.push(part);
        }
        Ok(parts)
    }
}

//! Binary64 reference implementations used as independent oracles by the
//! test suites: each layer's forward contract restated in plain `f64` code,
//! a naive DFT resampler, and a shadow model for finite-difference gradient
//! checks. Nothing here calls into the `f32` kernels.

use crate::model::{Branch, ModelState};
use crate::tensor::Tensor;

/// Dense `(batch, channels, length)` array of `f64`, row-major.
#[derive(Debug, Clone)]
pub struct Array3 {
    pub b: usize,
    pub c: usize,
    pub l: usize,
    pub data: Vec<f64>,
}

impl Array3 {
    pub fn zeros(b: usize, c: usize, l: usize) -> Self {
        Self { b, c, l, data: vec![0.0; b * c * l] }
    }

    pub fn from_tensor(t: &Tensor) -> Self {
        let (b, c, l) = t.shape();
        Self { b, c, l, data: t.data().iter().map(|&v| v as f64).collect() }
    }

    pub fn get(&self, b: usize, c: usize, t: usize) -> f64 {
        self.data[(b * self.c + c) * self.l + t]
    }

    pub fn set(&mut self, b: usize, c: usize, t: usize, v: f64) {
        self.data[(b * self.c + c) * self.l + t] = v;
    }
}

fn pad_left(k: usize, d: usize) -> isize {
    ((1 + d * (k - 1) - 1) / 2) as isize
}

/// Standard convolution, same padding, stride 1; `w` is `[c_out][c_in][k]`.
pub fn conv_standard(x: &Array3, w: &[f64], bias: Option<&[f64]>, c_out: usize, k: usize, d: usize) -> Array3 {
    let pl = pad_left(k, d);
    let mut out = Array3::zeros(x.b, c_out, x.l);
    for b in 0..x.b {
        for o in 0..c_out {
            for t in 0..x.l {
                let mut acc = bias.map_or(0.0, |bv| bv[o]);
                for c in 0..x.c {
                    for j in 0..k {
                        let src = t as isize - pl + (j * d) as isize;
                        if src >= 0 && (src as usize) < x.l {
                            acc += x.get(b, c, src as usize) * w[(o * x.c + c) * k + j];
                        }
                    }
                }
                out.set(b, o, t, acc);
            }
        }
    }
    out
}

/// Depthwise convolution; `w` is `[c][k]`.
pub fn conv_depthwise(x: &Array3, w: &[f64], k: usize, d: usize) -> Array3 {
    let pl = pad_left(k, d);
    let mut out = Array3::zeros(x.b, x.c, x.l);
    for b in 0..x.b {
        for c in 0..x.c {
            for t in 0..x.l {
                let mut acc = 0.0;
                for j in 0..k {
                    let src = t as isize - pl + (j * d) as isize;
                    if src >= 0 && (src as usize) < x.l {
                        acc += x.get(b, c, src as usize) * w[c * k + j];
                    }
                }
                out.set(b, c, t, acc);
            }
        }
    }
    out
}

/// Pointwise (kernel 1) convolution; `w` is `[c_out][c_in]`.
pub fn conv_pointwise(x: &Array3, w: &[f64], c_out: usize) -> Array3 {
    let mut out = Array3::zeros(x.b, c_out, x.l);
    for b in 0..x.b {
        for o in 0..c_out {
            for t in 0..x.l {
                let mut acc = 0.0;
                for c in 0..x.c {
                    acc += x.get(b, c, t) * w[o * x.c + c];
                }
                out.set(b, o, t, acc);
            }
        }
    }
    out
}

/// Training-mode batch normalization with per-channel batch statistics.
pub fn batchnorm_training(x: &Array3, gamma: &[f64], beta: &[f64], eps: f64) -> Array3 {
    let m = (x.b * x.l) as f64;
    let mut out = Array3::zeros(x.b, x.c, x.l);
    for c in 0..x.c {
        let mut sum = 0.0;
        for b in 0..x.b {
            for t in 0..x.l {
                sum += x.get(b, c, t);
            }
        }
        let mean = sum / m;
        let mut sq = 0.0;
        for b in 0..x.b {
            for t in 0..x.l {
                sq += (x.get(b, c, t) - mean).powi(2);
            }
        }
        let var = sq / m;
        let inv = 1.0 / (var + eps).sqrt();
        for b in 0..x.b {
            for t in 0..x.l {
                out.set(b, c, t, gamma[c] * (x.get(b, c, t) - mean) * inv + beta[c]);
            }
        }
    }
    out
}

pub fn relu(x: &Array3) -> Array3 {
    Array3 { b: x.b, c: x.c, l: x.l, data: x.data.iter().map(|&v| v.max(0.0)).collect() }
}

/// Per-channel means over the time axis, row-major `B x C`.
pub fn gap(x: &Array3) -> Vec<f64> {
    let mut out = vec![0.0; x.b * x.c];
    for b in 0..x.b {
        for c in 0..x.c {
            let mut sum = 0.0;
            for t in 0..x.l {
                sum += x.get(b, c, t);
            }
            out[b * x.c + c] = sum / x.l as f64;
        }
    }
    out
}

/// Dense head + stable softmax; `w` is `[k][f]`, features row-major `B x f`.
pub fn dense_softmax(features: &[f64], batch: usize, w: &[f64], bias: &[f64]) -> Vec<f64> {
    let k = bias.len();
    let f = features.len() / batch;
    let mut probs = vec![0.0; batch * k];
    for bi in 0..batch {
        let feat = &features[bi * f..(bi + 1) * f];
        let mut logits = vec![0.0; k];
        for ki in 0..k {
            let mut acc = bias[ki];
            for fi in 0..f {
                acc += feat[fi] * w[ki * f + fi];
            }
            logits[ki] = acc;
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for ki in 0..k {
            let e = (logits[ki] - max).exp();
            probs[bi * k + ki] = e;
            sum += e;
        }
        for ki in 0..k {
            probs[bi * k + ki] /= sum;
        }
    }
    probs
}

/// Mean categorical cross-entropy over one-hot targets, clamped at 1e-9.
pub fn mean_cross_entropy(probs: &[f64], targets: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut rows = 0.0;
    for (p, t) in probs.iter().zip(targets) {
        if *t != 0.0 {
            total -= t * p.max(1e-9).ln();
            rows += t;
        }
    }
    total / rows
}

/// Direct-definition DFT resampler (O(n^2)), mirroring the resample
/// contract: truncate/zero-pad the spectrum, split the Nyquist bin evenly on
/// even-length upsampling, fold it on even-target downsampling, inverse
/// transform, real part, amplitude rescaled by target/source.
pub fn naive_resample(x: &[f64], target: usize) -> Vec<f64> {
    let n = x.len();
    let m = target;
    // Forward DFT from the definition.
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    for (k, (rk, ik)) in re.iter_mut().zip(im.iter_mut()).enumerate() {
        for (t, &v) in x.iter().enumerate() {
            let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
            *rk += v * ang.cos();
            *ik += v * ang.sin();
        }
    }
    let mut yre = vec![0.0; m];
    let mut yim = vec![0.0; m];
    let keep = n.min(m);
    yre[0] = re[0];
    yim[0] = im[0];
    let positive = (keep - 1) / 2;
    for k in 1..=positive {
        yre[k] = re[k];
        yim[k] = im[k];
        yre[m - k] = re[n - k];
        yim[m - k] = im[n - k];
    }
    if keep % 2 == 0 {
        let half = keep / 2;
        match m.cmp(&n) {
            std::cmp::Ordering::Equal => {
                yre[half] = re[half];
                yim[half] = im[half];
            }
            std::cmp::Ordering::Greater => {
                yre[half] = re[half] * 0.5;
                yim[half] = im[half] * 0.5;
                yre[m - half] = re[half] * 0.5;
                yim[m - half] = im[half] * 0.5;
            }
            std::cmp::Ordering::Less => {
                yre[half] = re[half] + re[n - half];
                yim[half] = im[half] + im[n - half];
            }
        }
    }
    // Inverse DFT from the definition, already folding in the 1/m
    // normalization and the m/n amplitude rescale.
    let mut out = vec![0.0; m];
    for (t, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in 0..m {
            let ang = 2.0 * std::f64::consts::PI * (k * t) as f64 / m as f64;
            acc += yre[k] * ang.cos() - yim[k] * ang.sin();
        }
        *o = acc / n as f64;
    }
    out
}

// ── Shadow model ─────────────────────────────────────────────────────

/// One convolution of the shadow model.
#[derive(Debug, Clone)]
pub enum ShadowConv {
    Standard { w: Vec<f64>, bias: Option<Vec<f64>>, c_out: usize, k: usize, d: usize },
    Depthwise { w: Vec<f64>, k: usize, d: usize },
    Pointwise { w: Vec<f64>, c_out: usize },
}

impl ShadowConv {
    fn forward(&self, x: &Array3) -> Array3 {
        match self {
            Self::Standard { w, bias, c_out, k, d } => conv_standard(x, w, bias.as_deref(), *c_out, *k, *d),
            Self::Depthwise { w, k, d } => conv_depthwise(x, w, *k, *d),
            Self::Pointwise { w, c_out } => conv_pointwise(x, w, *c_out),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShadowBlock {
    /// Each branch is one or two convolutions applied in sequence.
    pub branches: Vec<Vec<ShadowConv>>,
    pub use_bank: bool,
    pub bank_multivariate: bool,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub eps: f64,
}

/// An `f64` mirror of a [`ModelState`], evaluated with training-mode batch
/// norm: the differentiation target for finite-difference checks.
#[derive(Debug, Clone)]
pub struct ShadowModel {
    pub blocks: Vec<ShadowBlock>,
    pub bank_kernels: Vec<Vec<f64>>,
    pub head_w: Vec<f64>,
    pub head_b: Vec<f64>,
    pub n_classes: usize,
}

impl ShadowModel {
    pub fn from_model(model: &ModelState) -> Self {
        let to64 = |v: &[f32]| v.iter().map(|&x| x as f64).collect::<Vec<f64>>();
        let blocks = model
            .blocks
            .iter()
            .map(|block| {
                let branches = block
                    .branches
                    .iter()
                    .map(|branch| match branch {
                        Branch::Standard(c) => vec![ShadowConv::Standard {
                            w: to64(&c.w),
                            bias: c.bias.as_ref().map(|b| to64(b)),
                            c_out: c.spec.out_channels,
                            k: c.spec.kernel,
                            d: c.spec.dilation,
                        }],
                        Branch::Dwsc { depthwise, pointwise } => vec![
                            ShadowConv::Depthwise { w: to64(&depthwise.w), k: depthwise.spec.kernel, d: depthwise.spec.dilation },
                            ShadowConv::Pointwise { w: to64(&pointwise.w), c_out: pointwise.spec.out_channels },
                        ],
                        Branch::BottleneckStandard { bottleneck, conv } => vec![
                            ShadowConv::Pointwise { w: to64(&bottleneck.w), c_out: bottleneck.spec.out_channels },
                            ShadowConv::Standard {
                                w: to64(&conv.w),
                                bias: None,
                                c_out: conv.spec.out_channels,
                                k: conv.spec.kernel,
                                d: conv.spec.dilation,
                            },
                        ],
                    })
                    .collect();
                ShadowBlock {
                    branches,
                    use_bank: block.use_bank,
                    bank_multivariate: block.bank_multivariate,
                    gamma: to64(&block.bn.gamma),
                    beta: to64(&block.bn.beta),
                    eps: block.bn.epsilon as f64,
                }
            })
            .collect();
        Self {
            blocks,
            bank_kernels: model
                .bank
                .as_ref()
                .map(|b| b.filters.iter().map(|f| to64(&f.coefficients)).collect())
                .unwrap_or_default(),
            head_w: to64(&model.head_w),
            head_b: to64(&model.head_b),
            n_classes: model.n_classes,
        }
    }

    fn apply_bank(&self, x: &Array3, multivariate: bool) -> Array3 {
        let nf = self.bank_kernels.len();
        if multivariate {
            let mut out = Array3::zeros(x.b, nf * x.c, x.l);
            for c in 0..x.c {
                for (fi, kern) in self.bank_kernels.iter().enumerate() {
                    let mut single = Array3::zeros(x.b, 1, x.l);
                    for b in 0..x.b {
                        for t in 0..x.l {
                            single.set(b, 0, t, x.get(b, c, t));
                        }
                    }
                    let resp = conv_standard(&single, kern, None, 1, kern.len(), 1);
                    for b in 0..x.b {
                        for t in 0..x.l {
                            out.set(b, c * nf + fi, t, resp.get(b, 0, t));
                        }
                    }
                }
            }
            out
        } else {
            let mut out = Array3::zeros(x.b, nf, x.l);
            for (fi, kern) in self.bank_kernels.iter().enumerate() {
                let w: Vec<f64> = (0..x.c).flat_map(|_| kern.iter().copied()).collect();
                let resp = conv_standard(x, &w, None, 1, kern.len(), 1);
                for b in 0..x.b {
                    for t in 0..x.l {
                        out.set(b, fi, t, resp.get(b, 0, t));
                    }
                }
            }
            out
        }
    }

    /// Mean cross-entropy loss on a batch, training-mode batch norm.
    pub fn loss(&self, x: &Array3, targets: &[f64]) -> f64 {
        let mut current = x.clone();
        for block in &self.blocks {
            let mut parts: Vec<Array3> = block.branches.iter().map(|convs| {
                let mut h = current.clone();
                for conv in convs {
                    h = conv.forward(&h);
                }
                h
            }).collect();
            if block.use_bank {
                parts.push(self.apply_bank(&current, block.bank_multivariate));
            }
            let channels: usize = parts.iter().map(|p| p.c).sum();
            let mut concat = Array3::zeros(current.b, channels, current.l);
            let mut off = 0;
            for p in &parts {
                for b in 0..p.b {
                    for c in 0..p.c {
                        for t in 0..p.l {
                            concat.set(b, off + c, t, p.get(b, c, t));
                        }
                    }
                }
                off += p.c;
            }
            current = relu(&batchnorm_training(&concat, &block.gamma, &block.beta, block.eps));
        }
        let features = gap(&current);
        let probs = dense_softmax(&features, current.b, &self.head_w, &self.head_b);
        mean_cross_entropy(&probs, targets)
    }

    /// Number of trainable tensors, in the same order the engine visits them.
    pub fn slot_count(&self) -> usize {
        self.with_slots(|slots| slots.len())
    }

    pub fn slot_len(&self, slot: usize) -> usize {
        self.with_slots(|slots| slots[slot].len())
    }

    pub fn get(&self, slot: usize, idx: usize) -> f64 {
        self.with_slots(|slots| slots[slot][idx])
    }

    pub fn set(&mut self, slot: usize, idx: usize, value: f64) {
        let mut slots = self.slots_mut();
        slots[slot][idx] = value;
    }

    fn with_slots<R>(&self, f: impl FnOnce(&[&Vec<f64>]) -> R) -> R {
        let mut slots: Vec<&Vec<f64>> = Vec::new();
        for block in &self.blocks {
            for branch in &block.branches {
                for conv in branch {
                    match conv {
                        ShadowConv::Standard { w, bias, .. } => {
                            slots.push(w);
                            if let Some(b) = bias {
                                slots.push(b);
                            }
                        }
                        ShadowConv::Depthwise { w, .. } | ShadowConv::Pointwise { w, .. } => slots.push(w),
                    }
                }
            }
            slots.push(&block.gamma);
            slots.push(&block.beta);
        }
        slots.push(&self.head_w);
        slots.push(&self.head_b);
        f(&slots)
    }

    /// Central finite difference of the loss along one parameter coordinate.
    pub fn fd_grad(&mut self, x: &Array3, targets: &[f64], slot: usize, idx: usize, h: f64) -> f64 {
        let original = self.get(slot, idx);
        self.set(slot, idx, original + h);
        let plus = self.loss(x, targets);
        self.set(slot, idx, original - h);
        let minus = self.loss(x, targets);
        self.set(slot, idx, original);
        (plus - minus) / (2.0 * h)
    }

    fn slots_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut slots: Vec<&mut Vec<f64>> = Vec::new();
        for block in &mut self.blocks {
            for branch in &mut block.branches {
                for conv in branch {
                    match conv {
                        ShadowConv::Standard { w, bias, .. } => {
                            slots.push(w);
                            if let Some(b) = bias {
                                slots.push(b);
                            }
                        }
                        ShadowConv::Depthwise { w, .. } | ShadowConv::Pointwise { w, .. } => slots.push(w),
                    }
                }
            }
            slots.push(&mut block.gamma);
            slots.push(&mut block.beta);
        }
        slots.push(&mut self.head_w);
        slots.push(&mut self.head_b);
        slots
    }
}

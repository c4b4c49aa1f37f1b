//! Concrete model state: weight tensors laid out per a [`ModelPlan`],
//! forward passes with cached activations, and the full backward pass.
//!
//! Trainable tensors are visited in a fixed order (blocks in depth order,
//! branches left to right, batch-norm scale then shift, head last); the
//! optimizer, the gradient buffers and the serialized container all rely on
//! that order.

use crate::arch::{model_plan, ArchConfig, ConvPlan, LiteConfig, ModelPlan};
use crate::conv::{conv1d_backward, conv1d_forward, ConvSpec};
use crate::error::{Error, Result};
use crate::filters::{apply_bank, FilterBank};
use crate::init::{glorot_uniform, Rng};
use crate::norm::{batchnorm_backward, batchnorm_infer, batchnorm_train_functional, BatchNormCache, BatchNormState};
use crate::ops::{cross_entropy, dense_softmax, gap, gap_backward, relu, relu_backward};
use crate::tensor::Tensor;

/// One convolution with its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub spec: ConvSpec,
    pub w: Vec<f32>,
    pub bias: Option<Vec<f32>>,
}

impl ConvLayer {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        conv1d_forward(x, &self.w, self.bias.as_deref(), &self.spec)
    }
}

/// A parallel path through a block.
#[derive(Debug, Clone, PartialEq)]
pub enum Branch {
    Standard(ConvLayer),
    Dwsc { depthwise: ConvLayer, pointwise: ConvLayer },
    BottleneckStandard { bottleneck: ConvLayer, conv: ConvLayer },
}

/// Gradients for one branch, tensor-ordered exactly like its parameters.
type BranchGrads = Vec<Vec<f32>>;

impl Branch {
    fn forward(&self, x: &Tensor) -> Result<(Tensor, Option<Tensor>)> {
        match self {
            Self::Standard(conv) => Ok((conv.forward(x)?, None)),
            Self::Dwsc { depthwise, pointwise } => {
                let mid = depthwise.forward(x)?;
                let out = pointwise.forward(&mid)?;
                Ok((out, Some(mid)))
            }
            Self::BottleneckStandard { bottleneck, conv } => {
                let mid = bottleneck.forward(x)?;
                let out = conv.forward(&mid)?;
                Ok((out, Some(mid)))
            }
        }
    }

    fn backward(
        &self,
        x: &Tensor,
        mid: Option<&Tensor>,
        grad_out: &Tensor,
        need_grad_x: bool,
    ) -> Result<(BranchGrads, Option<Tensor>)> {
        match self {
            Self::Standard(conv) => {
                let g = conv1d_backward(x, &conv.w, grad_out, &conv.spec, need_grad_x)?;
                let mut grads = vec![g.grad_w];
                if let Some(gb) = g.grad_bias {
                    grads.push(gb);
                }
                Ok((grads, g.grad_x))
            }
            Self::Dwsc { depthwise, pointwise } | Self::BottleneckStandard { bottleneck: depthwise, conv: pointwise } => {
                let mid = mid.ok_or_else(|| Error::Invalid("two-phase branch backward needs its cached intermediate".into()))?;
                let second = conv1d_backward(mid, &pointwise.w, grad_out, &pointwise.spec, true)?;
                let grad_mid = second.grad_x.expect("requested");
                let first = conv1d_backward(x, &depthwise.w, &grad_mid, &depthwise.spec, need_grad_x)?;
                Ok((vec![first.grad_w, second.grad_w], first.grad_x))
            }
        }
    }

    fn tensor_count(&self) -> usize {
        match self {
            Self::Standard(c) => 1 + usize::from(c.bias.is_some()),
            _ => 2,
        }
    }
}

/// Parallel branches, optional custom-filter bank, shared batch norm + ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub branches: Vec<Branch>,
    pub use_bank: bool,
    pub bank_multivariate: bool,
    pub bn: BatchNormState,
}

/// Complete model: architecture description plus every tensor it owns.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub arch: ArchConfig,
    pub in_channels: usize,
    pub n_classes: usize,
    pub seed: u64,
    pub blocks: Vec<Block>,
    /// Frozen custom filters; present only when the architecture uses them.
    pub bank: Option<FilterBank>,
    /// Feature width entering the head (= channels entering GAP).
    pub features: usize,
    /// Head weights, row-major `n_classes x features`, Glorot-initialized;
    /// the head bias starts at zero.
    pub head_w: Vec<f32>,
    pub head_b: Vec<f32>,
}

/// A named, shaped view of one stored tensor.
#[derive(Debug, Clone)]
pub struct NamedTensor<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f32],
}

impl<'a> NamedTensor<'a> {
    fn new(name: String, shape: Vec<usize>, data: &'a [f32]) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len(), "{name}");
        Self { name, shape, data }
    }
}

/// Per-block activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct BlockCache {
    branch_mids: Vec<Option<Tensor>>,
    bn: Option<BatchNormCache>,
    /// Post-ReLU block output.
    pub output: Tensor,
}

/// Activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Tensor,
    blocks: Vec<BlockCache>,
    /// Row-major `B x features` GAP output.
    pub features: Vec<f32>,
    /// Row-major `B x n_classes` probabilities.
    pub probs: Vec<f32>,
}

impl ForwardCache {
    /// Output of the last convolutional block: the input to GAP, which is
    /// what class activation maps are computed over.
    pub fn gap_input(&self) -> &Tensor {
        &self.blocks.last().expect("models have at least one block").output
    }
}

/// Deferred running-statistics update from one training-mode forward.
struct BnUpdate {
    mean: Vec<f32>,
    var: Vec<f32>,
}

/// Build LITE or any of its flag variants.
pub fn build_lite(config: &LiteConfig, in_channels: usize, n_classes: usize, seed: u64) -> Result<ModelState> {
    build_model(&ArchConfig::Lite(config.clone()), in_channels, n_classes, seed)
}

/// Build the FCN baseline (three biased conv blocks, 128/256/128 filters).
pub fn build_fcn(in_channels: usize, n_classes: usize, seed: u64) -> Result<ModelState> {
    build_model(&ArchConfig::Fcn, in_channels, n_classes, seed)
}

pub fn build_model(arch: &ArchConfig, in_channels: usize, n_classes: usize, seed: u64) -> Result<ModelState> {
    if n_classes < 2 {
        return Err(Error::Invalid(format!("classification needs at least 2 classes, got {n_classes}")));
    }
    let plan = model_plan(arch, in_channels)?;
    let mut rng = Rng::seed_from(seed);
    let mut blocks = Vec::with_capacity(plan.blocks.len());
    for bp in &plan.blocks {
        let branches: Vec<Branch> = bp.branches.iter().map(|cp| init_branch(cp, &mut rng)).collect::<Result<_>>()?;
        blocks.push(Block {
            branches,
            use_bank: bp.bank_channels > 0,
            bank_multivariate: bp.bank_multivariate,
            bn: BatchNormState::new(bp.out_channels()),
        });
    }
    let bank = match arch {
        ArchConfig::Lite(c) if c.use_custom_filters => Some(c.filter_bank()?),
        _ => None,
    };
    let head_w = glorot_uniform(&mut rng, plan.features, n_classes, n_classes * plan.features);
    Ok(ModelState {
        arch: arch.clone(),
        in_channels,
        n_classes,
        seed,
        blocks,
        bank,
        features: plan.features,
        head_w,
        head_b: vec![0.0; n_classes],
    })
}

fn init_branch(plan: &ConvPlan, rng: &mut Rng) -> Result<Branch> {
    Ok(match *plan {
        ConvPlan::Standard { in_channels, out_channels, kernel, dilation, bias } => {
            let spec = ConvSpec::standard(in_channels, out_channels, kernel, dilation, bias)?;
            let w = glorot_uniform(rng, in_channels * kernel, out_channels * kernel, spec.weight_len());
            Branch::Standard(ConvLayer { spec, w, bias: bias.then(|| vec![0.0; out_channels]) })
        }
        ConvPlan::Dwsc { in_channels, out_channels, kernel, dilation } => {
            let dw_spec = ConvSpec::depthwise(in_channels, kernel, dilation)?;
            let dw = glorot_uniform(rng, kernel, kernel, dw_spec.weight_len());
            let pw_spec = ConvSpec::pointwise(in_channels, out_channels, false)?;
            let pw = glorot_uniform(rng, in_channels, out_channels, pw_spec.weight_len());
            Branch::Dwsc {
                depthwise: ConvLayer { spec: dw_spec, w: dw, bias: None },
                pointwise: ConvLayer { spec: pw_spec, w: pw, bias: None },
            }
        }
        ConvPlan::BottleneckStandard { in_channels, bottleneck, out_channels, kernel, dilation } => {
            let bn_spec = ConvSpec::pointwise(in_channels, bottleneck, false)?;
            let bw = glorot_uniform(rng, in_channels, bottleneck, bn_spec.weight_len());
            let conv_spec = ConvSpec::standard(bottleneck, out_channels, kernel, dilation, false)?;
            let cw = glorot_uniform(rng, bottleneck * kernel, out_channels * kernel, conv_spec.weight_len());
            Branch::BottleneckStandard {
                bottleneck: ConvLayer { spec: bn_spec, w: bw, bias: None },
                conv: ConvLayer { spec: conv_spec, w: cw, bias: None },
            }
        }
    })
}

impl ModelState {
    pub fn plan(&self) -> Result<ModelPlan> {
        model_plan(&self.arch, self.in_channels)
    }

    /// Forward pass. Training mode normalizes with batch statistics and
    /// updates the running averages; inference mode uses the running
    /// statistics and leaves the model untouched (see [`ModelState::predict`]).
    pub fn forward(&mut self, x: &Tensor, training: bool) -> Result<ForwardCache> {
        let (cache, updates) = self.forward_pass(x, training)?;
        for (block, update) in self.blocks.iter_mut().zip(updates) {
            if let Some(u) = update {
                let m = block.bn.momentum;
                for c in 0..block.bn.channels() {
                    block.bn.running_mean[c] = m * block.bn.running_mean[c] + (1.0 - m) * u.mean[c];
                    block.bn.running_var[c] = m * block.bn.running_var[c] + (1.0 - m) * u.var[c];
                }
            }
        }
        Ok(cache)
    }

    /// Inference probabilities, row-major `B x n_classes`.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<f32>> {
        Ok(self.forward_infer(x)?.probs)
    }

    /// Inference forward keeping the activation cache (for CAM).
    pub fn forward_infer(&self, x: &Tensor) -> Result<ForwardCache> {
        Ok(self.forward_pass(x, false)?.0)
    }

    /// Forward with batch statistics (training-mode normalization) but
    /// without touching the running averages. This is the evaluation mode
    /// behind the monitored training loss.
    pub fn forward_batch_stats(&self, x: &Tensor) -> Result<ForwardCache> {
        Ok(self.forward_pass(x, true)?.0)
    }

    fn forward_pass(&self, x: &Tensor, training: bool) -> Result<(ForwardCache, Vec<Option<BnUpdate>>)> {
        if x.channels() != self.in_channels {
            return Err(Error::Shape(format!(
                "model expects {} input channels, got tensor of shape {:?}",
                self.in_channels,
                x.shape()
            )));
        }
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut updates = Vec::with_capacity(self.blocks.len());
        let mut current = x.clone();
        for block in &self.blocks {
            let mut parts = Vec::with_capacity(block.branches.len() + 1);
            let mut mids = Vec::with_capacity(block.branches.len());
            for branch in &block.branches {
                let (out, mid) = branch.forward(&current)?;
                parts.push(out);
                mids.push(mid);
            }
            if block.use_bank {
                let bank = self.bank.as_ref().ok_or_else(|| Error::Invalid("block uses a custom-filter bank but the model has none".into()))?;
                parts.push(apply_bank(&current, bank, block.bank_multivariate)?);
            }
            let refs: Vec<&Tensor> = parts.iter().collect();
            let concat = Tensor::concat_channels(&refs)?;
            let (normed, bn_cache, update) = if training {
                let (out, cache, (mean, var)) = batchnorm_train_functional(&concat, &block.bn)?;
                (out, Some(cache), Some(BnUpdate { mean, var }))
            } else {
                (batchnorm_infer(&concat, &block.bn)?, None, None)
            };
            let output = relu(&normed);
            blocks.push(BlockCache { branch_mids: mids, bn: bn_cache, output });
            updates.push(update);
            current = blocks.last().unwrap().output.clone();
        }
        let gap_in = &blocks.last().expect("at least one block").output;
        let features = gap(gap_in)?;
        let probs = dense_softmax(&features, x.batch(), &self.head_w, &self.head_b)?;
        Ok((ForwardCache { input: x.clone(), blocks, features, probs }, updates))
    }

    /// Mean cross-entropy of cached probabilities against one-hot targets
    /// (row-major `B x n_classes`).
    pub fn batch_loss(&self, cache: &ForwardCache, targets: &[f32]) -> Result<f32> {
        let k = self.n_classes;
        let b = cache.probs.len() / k;
        if targets.len() != b * k {
            return Err(Error::Shape(format!("targets have {} values, expected {}", targets.len(), b * k)));
        }
        let mut total = 0.0f32;
        for bi in 0..b {
            total += cross_entropy(&cache.probs[bi * k..(bi + 1) * k], &targets[bi * k..(bi + 1) * k])?;
        }
        Ok(total / b as f32)
    }

    /// Backward pass for mean cross-entropy over the batch. Returns gradient
    /// buffers aligned with the trainable-tensor visit order. Requires a
    /// training-mode cache (batch-norm backward differentiates through the
    /// batch statistics).
    pub fn backward(&self, cache: &ForwardCache, targets: &[f32]) -> Result<Vec<Vec<f32>>> {
        let k = self.n_classes;
        let f = self.features;
        let b = cache.probs.len() / k;
        if targets.len() != b * k {
            return Err(Error::Shape(format!("targets have {} values, expected {}", targets.len(), b * k)));
        }

        // Softmax + cross-entropy combined: d logits = (p - t) / B.
        let inv_b = 1.0 / b as f32;
        let dlogits: Vec<f32> = cache.probs.iter().zip(targets).map(|(p, t)| (p - t) * inv_b).collect();

        let mut head_w_grad = vec![0.0f32; k * f];
        let mut head_b_grad = vec![0.0f32; k];
        let mut dfeat = vec![0.0f32; b * f];
        for bi in 0..b {
            for ki in 0..k {
                let g = dlogits[bi * k + ki];
                head_b_grad[ki] += g;
                for fi in 0..f {
                    head_w_grad[ki * f + fi] += g * cache.features[bi * f + fi];
                    dfeat[bi * f + fi] += g * self.head_w[ki * f + fi];
                }
            }
        }

        let gap_in = cache.gap_input();
        let mut grad = gap_backward(&dfeat, b, f, gap_in.length());

        // Walk blocks in reverse, collecting per-block gradient bundles.
        let mut rev_block_grads: Vec<Vec<Vec<f32>>> = Vec::with_capacity(self.blocks.len());
        for (i, block) in self.blocks.iter().enumerate().rev() {
            let bc = &cache.blocks[i];
            let bn_cache = bc
                .bn
                .as_ref()
                .ok_or_else(|| Error::Invalid("backward requires a training-mode forward cache".into()))?;
            let g_relu = relu_backward(&grad, &bc.output);
            let bn_grads = batchnorm_backward(&g_relu, bn_cache, &block.bn);

            let mut widths: Vec<usize> = block.branches.iter().map(|br| branch_out_channels(br)).collect();
            let bank_width = block.bn.channels() - widths.iter().sum::<usize>();
            if bank_width > 0 {
                widths.push(bank_width);
            }
            let mut slices = bn_grads.grad_x.split_channels(&widths)?;
            if bank_width > 0 {
                slices.pop(); // the bank is frozen and sits on the raw input
            }

            let input = if i == 0 { &cache.input } else { &cache.blocks[i - 1].output };
            let need_grad_x = i > 0;
            let mut grad_input = need_grad_x.then(|| Tensor::zeros(input.batch(), input.channels(), input.length()));
            let mut bundle: Vec<Vec<f32>> = Vec::new();
            for (j, branch) in block.branches.iter().enumerate() {
                let (grads, gx) = branch.backward(input, bc.branch_mids[j].as_ref(), &slices[j], need_grad_x)?;
                bundle.extend(grads);
                if let (Some(acc), Some(gx)) = (grad_input.as_mut(), gx) {
                    for (a, v) in acc.data_mut().iter_mut().zip(gx.data()) {
                        *a += v;
                    }
                }
            }
            bundle.push(bn_grads.grad_gamma);
            bundle.push(bn_grads.grad_beta);
            rev_block_grads.push(bundle);
            if let Some(gi) = grad_input {
                grad = gi;
            }
        }

        let mut out: Vec<Vec<f32>> = Vec::new();
        for bundle in rev_block_grads.into_iter().rev() {
            out.extend(bundle);
        }
        out.push(head_w_grad);
        out.push(head_b_grad);
        debug_assert_eq!(out.len(), self.trainable_tensor_count());
        Ok(out)
    }

    /// Visit every trainable tensor mutably, in the canonical order.
    pub fn for_each_trainable_mut(&mut self, f: &mut impl FnMut(&mut Vec<f32>)) {
        for block in &mut self.blocks {
            for branch in &mut block.branches {
                match branch {
                    Branch::Standard(c) => {
                        f(&mut c.w);
                        if let Some(b) = c.bias.as_mut() {
                            f(b);
                        }
                    }
                    Branch::Dwsc { depthwise, pointwise } | Branch::BottleneckStandard { bottleneck: depthwise, conv: pointwise } => {
                        f(&mut depthwise.w);
                        f(&mut pointwise.w);
                    }
                }
            }
            f(&mut block.bn.gamma);
            f(&mut block.bn.beta);
        }
        f(&mut self.head_w);
        f(&mut self.head_b);
    }

    /// Visit every trainable tensor, in the canonical order.
    pub fn for_each_trainable(&self, f: &mut impl FnMut(&Vec<f32>)) {
        for block in &self.blocks {
            for branch in &block.branches {
                match branch {
                    Branch::Standard(c) => {
                        f(&c.w);
                        if let Some(b) = c.bias.as_ref() {
                            f(b);
                        }
                    }
                    Branch::Dwsc { depthwise, pointwise } | Branch::BottleneckStandard { bottleneck: depthwise, conv: pointwise } => {
                        f(&depthwise.w);
                        f(&pointwise.w);
                    }
                }
            }
            f(&block.bn.gamma);
            f(&block.bn.beta);
        }
        f(&self.head_w);
        f(&self.head_b);
    }

    pub fn trainable_tensor_count(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.branches.iter().map(Branch::tensor_count).sum::<usize>() + 2)
            .sum::<usize>()
            + 2
    }

    /// Total trainable values, head included. Matches the analytic
    /// [`ModelPlan::backbone_params`] plus [`ModelPlan::head_params`].
    pub fn trainable_param_count(&self) -> u64 {
        let mut n = 0u64;
        self.for_each_trainable(&mut |t| n += t.len() as u64);
        n
    }

    /// Every tensor the checkpoint carries — named and shaped, in
    /// serialization order: trainable tensors, running statistics, then
    /// frozen bank kernels.
    pub fn named_tensors(&self) -> Vec<NamedTensor<'_>> {
        let mut out: Vec<NamedTensor<'_>> = Vec::new();
        for (i, block) in self.blocks.iter().enumerate() {
            for (j, branch) in block.branches.iter().enumerate() {
                let base = format!("block{i}.branch{j}");
                match branch {
                    Branch::Standard(c) => {
                        out.push(NamedTensor::new(
                            format!("{base}.w"),
                            vec![c.spec.out_channels, c.spec.in_channels, c.spec.kernel],
                            &c.w,
                        ));
                        if let Some(b) = c.bias.as_ref() {
                            out.push(NamedTensor::new(format!("{base}.bias"), vec![c.spec.out_channels], b));
                        }
                    }
                    Branch::Dwsc { depthwise, pointwise } => {
                        out.push(NamedTensor::new(
                            format!("{base}.dw.w"),
                            vec![depthwise.spec.in_channels, depthwise.spec.kernel],
                            &depthwise.w,
                        ));
                        out.push(NamedTensor::new(
                            format!("{base}.pw.w"),
                            vec![pointwise.spec.out_channels, pointwise.spec.in_channels],
                            &pointwise.w,
                        ));
                    }
                    Branch::BottleneckStandard { bottleneck, conv } => {
                        out.push(NamedTensor::new(
                            format!("{base}.bneck.w"),
                            vec![bottleneck.spec.out_channels, bottleneck.spec.in_channels],
                            &bottleneck.w,
                        ));
                        out.push(NamedTensor::new(
                            format!("{base}.conv.w"),
                            vec![conv.spec.out_channels, conv.spec.in_channels, conv.spec.kernel],
                            &conv.w,
                        ));
                    }
                }
            }
            let c = block.bn.channels();
            out.push(NamedTensor::new(format!("block{i}.bn.gamma"), vec![c], &block.bn.gamma));
            out.push(NamedTensor::new(format!("block{i}.bn.beta"), vec![c], &block.bn.beta));
            out.push(NamedTensor::new(format!("block{i}.bn.running_mean"), vec![c], &block.bn.running_mean));
            out.push(NamedTensor::new(format!("block{i}.bn.running_var"), vec![c], &block.bn.running_var));
        }
        if let Some(bank) = &self.bank {
            for (idx, filt) in bank.filters.iter().enumerate() {
                out.push(NamedTensor::new(
                    format!("bank.{idx:02}.{}{}", filt.kind.as_str(), filt.size),
                    vec![filt.size],
                    &filt.coefficients,
                ));
            }
        }
        out.push(NamedTensor::new("head.w".into(), vec![self.n_classes, self.features], &self.head_w));
        out.push(NamedTensor::new("head.b".into(), vec![self.n_classes], &self.head_b));
        out
    }

    /// Mutable access to a named tensor, for checkpoint loading.
    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Vec<f32>> {
        let mut parts = name.split('.');
        let first = parts.next()?;
        if first == "head" {
            return match parts.next()? {
                "w" => Some(&mut self.head_w),
                "b" => Some(&mut self.head_b),
                _ => None,
            };
        }
        if first == "bank" {
            let idx: usize = parts.next()?.parse().ok()?;
            return self.bank.as_mut()?.filters.get_mut(idx).map(|f| &mut f.coefficients);
        }
        let block_idx: usize = first.strip_prefix("block")?.parse().ok()?;
        let block = self.blocks.get_mut(block_idx)?;
        match parts.next()? {
            "bn" => match parts.next()? {
                "gamma" => Some(&mut block.bn.gamma),
                "beta" => Some(&mut block.bn.beta),
                "running_mean" => Some(&mut block.bn.running_mean),
                "running_var" => Some(&mut block.bn.running_var),
                _ => None,
            },
            branch_name => {
                let branch_idx: usize = branch_name.strip_prefix("branch")?.parse().ok()?;
                let branch = block.branches.get_mut(branch_idx)?;
                match (branch, parts.next()?) {
                    (Branch::Standard(c), "w") => Some(&mut c.w),
                    (Branch::Standard(c), "bias") => c.bias.as_mut(),
                    (Branch::Dwsc { depthwise, .. }, "dw") => Some(&mut depthwise.w),
                    (Branch::Dwsc { pointwise, .. }, "pw") => Some(&mut pointwise.w),
                    (Branch::BottleneckStandard { bottleneck, .. }, "bneck") => Some(&mut bottleneck.w),
                    (Branch::BottleneckStandard { conv, .. }, "conv") => Some(&mut conv.w),
                    _ => None,
                }
            }
        }
    }
}

fn branch_out_channels(branch: &Branch) -> usize {
    match branch {
        Branch::Standard(c) => c.spec.out_channels,
        Branch::Dwsc { pointwise, .. } => pointwise.spec.out_channels,
        Branch::BottleneckStandard { conv, .. } => conv.spec.out_channels,
    }
}

/// One-hot encode integer labels, row-major `B x n_classes`.
pub fn one_hot(labels: &[usize], n_classes: usize) -> Result<Vec<f32>> {
    let mut out = vec![0.0f32; labels.len() * n_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_classes {
            return Err(Error::Invalid(format!("label {l} out of range for {n_classes} classes")));
        }
        out[i * n_classes + l] = 1.0;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_dense_weights_predict_uniform() {
        let mut model = build_lite(&LiteConfig::lite(), 1, 4, 0).unwrap();
        model.head_w.fill(0.0);
        model.head_b.fill(0.0);
        let x = Tensor::from_series(&[0.3, -0.1, 0.8, 0.2, -0.5, 0.0, 0.1, 0.9]);
        let probs = model.predict(&x).unwrap();
        assert_eq!(probs.len(), 4);
        for &p in &probs {
            assert!((p - 0.25).abs() < 1e-6);
        }
    }

    #[test]
    fn identical_rows_get_identical_predictions() {
        let mut model = build_lite(&LiteConfig::lite(), 1, 3, 1).unwrap();
        // Perturb the head so outputs are not uniform.
        model.head_w.iter_mut().enumerate().for_each(|(i, w)| *w = (i as f32 * 0.01).sin());
        let series: Vec<f32> = (0..32).map(|t| (t as f32 * 0.3).sin()).collect();
        let mut both = series.clone();
        both.extend(&series);
        let x = Tensor::from_vec(2, 1, 32, both).unwrap();
        let probs = model.predict(&x).unwrap();
        assert_eq!(probs[..3], probs[3..]);
    }

    #[test]
    fn output_shape_is_batch_by_classes() {
        let model = build_lite(&LiteConfig::lite(), 1, 5, 0).unwrap();
        let x = Tensor::zeros(3, 1, 20);
        let probs = model.predict(&x).unwrap();
        assert_eq!(probs.len(), 3 * 5);
    }

    #[test]
    fn trainable_count_matches_plan_for_every_variant() {
        let variants: Vec<(ArchConfig, usize)> = vec![
            (ArchConfig::Lite(LiteConfig::lite()), 1),
            (ArchConfig::Lite(LiteConfig::litemv()), 2),
            (ArchConfig::Lite(LiteConfig::litemv()), 3),
            (ArchConfig::Lite(LiteConfig::litemv()), 6),
            (ArchConfig::Lite(LiteConfig::striped()), 1),
            (ArchConfig::Lite(LiteConfig::striped_plus_custom_filters()), 1),
            (ArchConfig::Lite(LiteConfig::striped_plus_multiplexing()), 1),
            (ArchConfig::Lite(LiteConfig::striped_plus_dilation()), 1),
            (ArchConfig::Lite(LiteConfig { use_dwsc: false, ..LiteConfig::lite() }), 1),
            (ArchConfig::Fcn, 1),
        ];
        for (arch, c) in variants {
            let n_classes = 4;
            let model = build_model(&arch, c, n_classes, 9).unwrap();
            let plan = model_plan(&arch, c).unwrap();
            assert_eq!(
                model.trainable_param_count(),
                plan.backbone_params() + plan.head_params(n_classes),
                "{arch:?} with {c} channels"
            );
        }
    }

    #[test]
    fn rejects_too_few_classes_and_wrong_channels() {
        assert!(build_lite(&LiteConfig::lite(), 1, 1, 0).is_err());
        let model = build_lite(&LiteConfig::lite(), 1, 3, 0).unwrap();
        assert!(model.predict(&Tensor::zeros(1, 2, 10)).is_err());
    }

    #[test]
    fn litemv_accepts_single_channel_input() {
        // Degenerate but permitted: the multivariate wiring at C = 1.
        let model = build_lite(&LiteConfig::litemv(), 1, 2, 0).unwrap();
        let probs = model.predict(&Tensor::zeros(1, 1, 16)).unwrap();
        assert_eq!(probs.len(), 2);
    }

    #[test]
    fn same_seed_builds_identical_models() {
        let a = build_lite(&LiteConfig::lite(), 1, 3, 5).unwrap();
        let b = build_lite(&LiteConfig::lite(), 1, 3, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn backward_produces_one_buffer_per_trainable_tensor() {
        let mut model = build_lite(&LiteConfig::lite(), 1, 2, 0).unwrap();
        let x = Tensor::zeros(2, 1, 16);
        let cache = model.forward(&x, true).unwrap();
        let targets = one_hot(&[0, 1], 2).unwrap();
        let grads = model.backward(&cache, &targets).unwrap();
        assert_eq!(grads.len(), model.trainable_tensor_count());
        let mut i = 0;
        model.for_each_trainable(&mut |t| {
            assert_eq!(t.len(), grads[i].len(), "tensor {i}");
            i += 1;
        });
    }

    #[test]
    fn backward_needs_training_cache() {
        let model = build_lite(&LiteConfig::lite(), 1, 2, 0).unwrap();
        let cache = model.forward_infer(&Tensor::zeros(1, 1, 16)).unwrap();
        let targets = one_hot(&[0], 2).unwrap();
        assert!(model.backward(&cache, &targets).is_err());
    }

    #[test]
    fn named_tensor_lookup_round_trips() {
        let mut model = build_lite(&LiteConfig::lite(), 1, 3, 2).unwrap();
        let entries: Vec<(String, usize)> = model.named_tensors().iter().map(|t| (t.name.clone(), t.data.len())).collect();
        for (name, len) in entries {
            let tensor = model.tensor_mut(&name).unwrap_or_else(|| panic!("missing {name}"));
            assert_eq!(tensor.len(), len, "{name}");
        }
    }
}

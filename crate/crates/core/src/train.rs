//! Adam optimization with reduce-on-plateau scheduling, best-model
//! checkpointing and seeded, bit-reproducible runs.
//!
//! The monitored quantity is the training loss, measured at the end of each
//! epoch by one full pass over the training set normalized with the set's
//! own batch statistics (training-mode batch norm, running averages left
//! untouched). Re-evaluating a returned checkpoint the same way reproduces
//! the recorded best loss exactly. Held-out data is always evaluated in
//! inference mode (running statistics), which in general yields a different
//! loss; see [`evaluate`] versus [`evaluate_batch_stats`].

use std::path::Path;

use crate::container::atomic_write;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::init::Rng;
use crate::model::{one_hot, ModelState};

/// Training protocol: Adam with reduce-on-plateau, batch 64, 1500 epochs.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
    pub plateau_factor: f32,
    pub plateau_patience: usize,
    pub min_learning_rate: f32,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1500,
            batch_size: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            plateau_factor: 0.5,
            plateau_patience: 50,
            min_learning_rate: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Invalid("epochs and batch size must be positive".into()));
        }
        if self.plateau_patience < 1 {
            return Err(Error::Invalid("plateau patience must be >= 1".into()));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return Err(Error::Invalid(format!("plateau factor must be in (0, 1), got {}", self.plateau_factor)));
        }
        if self.min_learning_rate > self.learning_rate {
            return Err(Error::Invalid("minimum learning rate exceeds the initial learning rate".into()));
        }
        Ok(())
    }
}

/// One Adam update on a single tensor. Bias-corrected first and second
/// moments; `t` is the 1-based step count.
pub fn adam_step(
    param: &mut [f32],
    grad: &[f32],
    m: &mut [f32],
    v: &mut [f32],
    t: usize,
    lr: f32,
    config: &TrainConfig,
) -> Result<()> {
    if grad.len() != param.len() || m.len() != param.len() || v.len() != param.len() {
        return Err(Error::Shape(format!(
            "adam buffers disagree: param {}, grad {}, m {}, v {}",
            param.len(),
            grad.len(),
            m.len(),
            v.len()
        )));
    }
    if t < 1 {
        return Err(Error::Invalid("adam step count starts at 1".into()));
    }
    let (b1, b2) = (config.beta1, config.beta2);
    let m_corr = 1.0 - b1.powi(t as i32);
    let v_corr = 1.0 - b2.powi(t as i32);
    for i in 0..param.len() {
        m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
        v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
        let m_hat = m[i] / m_corr;
        let v_hat = v[i] / v_corr;
        param[i] -= lr * m_hat / (v_hat.sqrt() + config.epsilon);
    }
    Ok(())
}

/// Per-tensor Adam moments aligned with the model's trainable visit order.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    t: usize,
}

impl AdamState {
    pub fn new(model: &ModelState) -> Self {
        let mut m = Vec::new();
        model.for_each_trainable(&mut |tensor| m.push(vec![0.0f32; tensor.len()]));
        let v = m.clone();
        Self { m, v, t: 0 }
    }

    /// Apply one update across every trainable tensor.
    pub fn step(&mut self, model: &mut ModelState, grads: &[Vec<f32>], lr: f32, config: &TrainConfig) -> Result<()> {
        self.t += 1;
        let mut i = 0;
        let mut status = Ok(());
        model.for_each_trainable_mut(&mut |tensor| {
            if status.is_ok() {
                status = adam_step(tensor, &grads[i], &mut self.m[i], &mut self.v[i], self.t, lr, config);
            }
            i += 1;
        });
        status
    }
}

/// Reduce-on-plateau state: when the monitored loss has not improved by more
/// than 1e-8 for `patience` consecutive epochs, the learning rate is halved
/// (clamped at the minimum) and the counter resets.
#[derive(Debug, Clone)]
pub struct PlateauScheduler {
    best: f32,
    wait: usize,
}

pub const IMPROVEMENT_THRESHOLD: f32 = 1e-8;

impl PlateauScheduler {
    pub fn new() -> Self {
        Self { best: f32::INFINITY, wait: 0 }
    }

    /// Observe one epoch-end loss; returns the learning rate for the next epoch.
    pub fn observe(&mut self, loss: f32, lr: f32, config: &TrainConfig) -> f32 {
        if loss < self.best - IMPROVEMENT_THRESHOLD {
            self.best = loss;
            self.wait = 0;
            return lr;
        }
        self.wait += 1;
        if self.wait >= config.plateau_patience {
            self.wait = 0;
            return (lr * config.plateau_factor).max(config.min_learning_rate);
        }
        lr
    }
}

impl Default for PlateauScheduler {
    fn default() -> Self {
        Self::new()
    }
}

/// Next learning rate given the monitored losses so far; equivalent to
/// replaying a [`PlateauScheduler`] over the whole history.
pub fn reduce_on_plateau(losses: &[f32], config: &TrainConfig) -> f32 {
    let mut sched = PlateauScheduler::new();
    let mut lr = config.learning_rate;
    for &loss in losses {
        lr = sched.observe(loss, lr, config);
    }
    lr
}

/// Per-epoch record of one training run.
#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub losses: Vec<f32>,
    pub accuracies: Vec<f32>,
    pub learning_rates: Vec<f32>,
    /// Epoch (0-based) whose checkpoint was returned: minimum monitored
    /// loss, earliest on ties.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best_loss(&self) -> f32 {
        self.losses[self.best_epoch]
    }

    /// Write `epoch,loss,accuracy,lr` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("epoch,loss,accuracy,lr\n");
        for e in 0..self.losses.len() {
            out.push_str(&format!("{},{},{},{}\n", e, self.losses[e], self.accuracies[e], self.learning_rates[e]));
        }
        atomic_write(path, out.as_bytes())
    }
}

/// Mean loss and accuracy of a model on a dataset, in inference mode
/// (running batch-norm statistics). Deterministic and side-effect free.
pub fn evaluate(model: &ModelState, dataset: &Dataset, batch_size: usize) -> Result<(f32, f32)> {
    let n = dataset.n_samples();
    if n == 0 {
        return Err(Error::Invalid("cannot evaluate on an empty dataset".into()));
    }
    let k = model.n_classes;
    let mut total_loss = 0.0f32;
    let mut correct = 0usize;
    let indices: Vec<usize> = (0..n).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let (x, labels) = dataset.batch(chunk);
        let cache = model.forward_infer(&x)?;
        let targets = one_hot(&labels, k)?;
        for (bi, &label) in labels.iter().enumerate() {
            let row = &cache.probs[bi * k..(bi + 1) * k];
            total_loss += crate::ops::cross_entropy(row, &targets[bi * k..(bi + 1) * k])?;
            let pred = argmax(row);
            if pred == label {
                correct += 1;
            }
        }
    }
    Ok((total_loss / n as f32, correct as f32 / n as f32))
}

/// Mean loss and accuracy over the whole dataset in one pass, normalized
/// with the set's own batch statistics (the monitored training loss).
/// A pure function of (model, dataset): repeated calls are bit-identical.
pub fn evaluate_batch_stats(model: &ModelState, dataset: &Dataset) -> Result<(f32, f32)> {
    let n = dataset.n_samples();
    if n == 0 {
        return Err(Error::Invalid("cannot evaluate on an empty dataset".into()));
    }
    let k = model.n_classes;
    let indices: Vec<usize> = (0..n).collect();
    let (x, labels) = dataset.batch(&indices);
    let cache = model.forward_batch_stats(&x)?;
    let targets = one_hot(&labels, k)?;
    let mut total_loss = 0.0f32;
    let mut correct = 0usize;
    for (bi, &label) in labels.iter().enumerate() {
        let row = &cache.probs[bi * k..(bi + 1) * k];
        total_loss += crate::ops::cross_entropy(row, &targets[bi * k..(bi + 1) * k])?;
        if argmax(row) == label {
            correct += 1;
        }
    }
    Ok((total_loss / n as f32, correct as f32 / n as f32))
}

/// Index of the largest value; first index wins ties.
pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Epoch-end snapshot passed to observers.
#[derive(Debug, Clone, Copy)]
pub struct EpochReport {
    /// 0-based epoch index.
    pub epoch: usize,
    pub loss: f32,
    pub accuracy: f32,
    pub learning_rate: f32,
}

/// Whether to keep training after an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochControl {
    Continue,
    Stop,
}

/// Train and return the best checkpoint (by monitored loss) plus the history.
pub fn train(model: ModelState, dataset: &Dataset, config: &TrainConfig) -> Result<(ModelState, TrainHistory)> {
    train_with_observer(model, dataset, config, |_, _| EpochControl::Continue)
}

/// [`train`], invoking `observer` after every epoch. The observer sees the
/// current (not best) model and may stop the run early; the best checkpoint
/// so far is still returned.
pub fn train_with_observer(
    mut model: ModelState,
    dataset: &Dataset,
    config: &TrainConfig,
    mut observer: impl FnMut(EpochReport, &ModelState) -> EpochControl,
) -> Result<(ModelState, TrainHistory)> {
    config.validate()?;
    let n = dataset.n_samples();
    if n == 0 {
        return Err(Error::Invalid("cannot train on an empty dataset".into()));
    }
    if dataset.n_channels() != model.in_channels {
        return Err(Error::Shape(format!(
            "dataset has {} channels, model expects {}",
            dataset.n_channels(),
            model.in_channels
        )));
    }
    if dataset.n_classes() > model.n_classes {
        return Err(Error::Invalid(format!(
            "dataset has {} classes, model was built for {}",
            dataset.n_classes(),
            model.n_classes
        )));
    }

    let mut rng = Rng::seed_from(config.seed);
    let mut adam = AdamState::new(&model);
    let mut scheduler = PlateauScheduler::new();
    let mut lr = config.learning_rate;
    let mut history = TrainHistory::default();
    let mut best: Option<(f32, ModelState)> = None;
    let mut indices: Vec<usize> = (0..n).collect();

    for epoch in 0..config.epochs {
        rng.shuffle(&mut indices);
        // The final partial batch is kept.
        for (batch_idx, chunk) in indices.chunks(config.batch_size).enumerate() {
            let (x, labels) = dataset.batch(chunk);
            let targets = one_hot(&labels, model.n_classes)?;
            let cache = model.forward(&x, true)?;
            let batch_loss = model.batch_loss(&cache, &targets)?;
            if !batch_loss.is_finite() {
                return Err(Error::NanLoss { epoch: epoch + 1, batch: batch_idx + 1 });
            }
            let grads = model.backward(&cache, &targets)?;
            adam.step(&mut model, &grads, lr, config)?;
        }

        let (loss, accuracy) = evaluate_batch_stats(&model, dataset)?;
        if !loss.is_finite() {
            return Err(Error::NanLoss { epoch: epoch + 1, batch: 0 });
        }
        history.losses.push(loss);
        history.accuracies.push(accuracy);
        history.learning_rates.push(lr);
        // Strict improvement only: ties keep the earliest epoch.
        if best.as_ref().map_or(true, |(b, _)| loss < *b) {
            best = Some((loss, model.clone()));
            history.best_epoch = epoch;
        }
        lr = scheduler.observe(loss, lr, config);

        let report = EpochReport { epoch, loss, accuracy, learning_rate: lr };
        if observer(report, &model) == EpochControl::Stop {
            break;
        }
    }

    let (_, best_model) = best.expect("at least one epoch ran");
    Ok((best_model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::LiteConfig;
    use crate::data::{Dataset, DatasetMeta};
    use crate::model::build_lite;
    use crate::tensor::Tensor;

    #[test]
    fn adam_first_step_matches_hand_computation() {
        let config = TrainConfig::default();
        let mut p = vec![0.0f32];
        let mut m = vec![0.0f32];
        let mut v = vec![0.0f32];
        adam_step(&mut p, &[1.0], &mut m, &mut v, 1, 1e-3, &config).unwrap();
        assert!((p[0] + 0.001).abs() < 1e-6, "{}", p[0]);
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let config = TrainConfig::default();
        let mut p = vec![0.7f32, -0.3];
        let mut m = vec![0.0f32; 2];
        let mut v = vec![0.0f32; 2];
        adam_step(&mut p, &[0.0, 0.0], &mut m, &mut v, 1, 1e-3, &config).unwrap();
        assert_eq!(p, vec![0.7, -0.3]);
    }

    #[test]
    fn adam_constant_gradient_keeps_descending() {
        let config = TrainConfig::default();
        let mut p = vec![0.0f32];
        let mut m = vec![0.0f32];
        let mut v = vec![0.0f32];
        let mut prev = 0.0f32;
        for t in 1..=2 {
            adam_step(&mut p, &[1.0], &mut m, &mut v, t, 1e-3, &config).unwrap();
            assert!(p[0] < prev, "step {t}: {} !< {prev}", p[0]);
            prev = p[0];
        }
    }

    #[test]
    fn adam_rejects_shape_mismatch() {
        let config = TrainConfig::default();
        let mut p = vec![0.0f32; 2];
        let mut m = vec![0.0f32; 2];
        let mut v = vec![0.0f32; 2];
        assert!(adam_step(&mut p, &[1.0], &mut m, &mut v, 1, 1e-3, &config).is_err());
    }

    #[test]
    fn plateau_halves_after_patience() {
        let config = TrainConfig::default();
        let losses = vec![1.0f32; 51]; // first sets best, then 50 non-improving
        assert!((reduce_on_plateau(&losses, &config) - 5e-4).abs() < 1e-9);
    }

    #[test]
    fn plateau_never_fires_on_monotone_losses() {
        let config = TrainConfig::default();
        let losses: Vec<f32> = (0..1500).map(|e| 1.0 / (e + 1) as f32).collect();
        assert_eq!(reduce_on_plateau(&losses, &config), 1e-3);
    }

    #[test]
    fn plateau_respects_floor() {
        let config = TrainConfig { learning_rate: 1e-4, ..TrainConfig::default() };
        let losses = vec![1.0f32; 200];
        assert_eq!(reduce_on_plateau(&losses, &config), 1e-4);
    }

    fn one_sample_dataset() -> Dataset {
        let series: Vec<f32> = (0..32).map(|t| (t as f32 / 31.0) * 2.0 - 1.0).collect();
        Dataset {
            series: Tensor::from_vec(1, 1, 32, series).unwrap(),
            labels: vec![0],
            class_names: vec!["down".into(), "up".into()],
            meta: DatasetMeta::default(),
        }
    }

    #[test]
    fn single_sample_memorization() {
        let ds = one_sample_dataset();
        let model = build_lite(&LiteConfig::lite(), 1, 2, 0).unwrap();
        let config = TrainConfig { epochs: 200, batch_size: 16, ..TrainConfig::default() };
        let (_, history) = train(model, &ds, &config).unwrap();
        assert!(history.best_loss() < 0.01, "best loss {}", history.best_loss());
    }

    #[test]
    fn training_is_seed_deterministic() {
        let ds = one_sample_dataset();
        let config = TrainConfig { epochs: 5, batch_size: 4, ..TrainConfig::default() };
        let run = || {
            let model = build_lite(&LiteConfig::lite(), 1, 2, 3).unwrap();
            train(model, &ds, &config).unwrap()
        };
        let (m1, h1) = run();
        let (m2, h2) = run();
        assert_eq!(m1, m2);
        assert_eq!(h1.losses, h2.losses);
    }

    #[test]
    fn best_checkpoint_reproduces_recorded_loss() {
        let ds = one_sample_dataset();
        let model = build_lite(&LiteConfig::lite(), 1, 2, 1).unwrap();
        let config = TrainConfig { epochs: 12, batch_size: 8, ..TrainConfig::default() };
        let (best, history) = train(model, &ds, &config).unwrap();
        let (loss, _) = evaluate_batch_stats(&best, &ds).unwrap();
        assert!((loss - history.best_loss()).abs() < 1e-5, "{loss} vs {}", history.best_loss());
        // The recorded best is the minimum of the whole history.
        let min = history.losses.iter().copied().fold(f32::INFINITY, f32::min);
        assert_eq!(history.best_loss(), min);
        // Learning rate sequence never increases.
        for w in history.learning_rates.windows(2) {
            assert!(w[1] <= w[0]);
        }
        // Inference-mode evaluation uses the running statistics instead and
        // in general records a different loss (documented mode difference).
        let (inference_loss, _) = evaluate(&best, &ds, config.batch_size).unwrap();
        assert!(inference_loss.is_finite());
    }

    #[test]
    fn frozen_bank_is_bit_identical_after_training() {
        let ds = one_sample_dataset();
        let model = build_lite(&LiteConfig::lite(), 1, 2, 2).unwrap();
        let before: Vec<Vec<f32>> = model.bank.as_ref().unwrap().filters.iter().map(|f| f.coefficients.clone()).collect();
        let config = TrainConfig { epochs: 3, batch_size: 8, ..TrainConfig::default() };
        let (best, _) = train(model, &ds, &config).unwrap();
        let after: Vec<Vec<f32>> = best.bank.as_ref().unwrap().filters.iter().map(|f| f.coefficients.clone()).collect();
        for (b, a) in before.iter().zip(&after) {
            assert_eq!(b.len(), a.len());
            for (x, y) in b.iter().zip(a) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn empty_dataset_rejected() {
        let ds = Dataset {
            series: Tensor::zeros(0, 1, 8),
            labels: vec![],
            class_names: vec!["a".into(), "b".into()],
            meta: DatasetMeta::default(),
        };
        let model = build_lite(&LiteConfig::lite(), 1, 2, 0).unwrap();
        assert!(train(model, &ds, &TrainConfig::default()).is_err());
    }
}

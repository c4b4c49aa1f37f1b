//! Ensembles of independently seeded models whose predicted class
//! distributions are averaged.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::arch::ArchConfig;
use crate::container::atomic_write;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{build_model, ModelState};
use crate::tensor::Tensor;
use crate::train::{train, TrainConfig, TrainHistory};

/// Ordered member checkpoints sharing one architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub members: Vec<ModelState>,
}

impl EnsembleModel {
    pub fn new(members: Vec<ModelState>) -> Result<Self> {
        let first = members.first().ok_or_else(|| Error::Invalid("an ensemble needs at least one member".into()))?;
        for (i, m) in members.iter().enumerate() {
            if m.n_classes != first.n_classes {
                return Err(Error::Invalid(format!(
                    "member {i} predicts {} classes, member 0 predicts {}",
                    m.n_classes, first.n_classes
                )));
            }
            if m.in_channels != first.in_channels {
                return Err(Error::Invalid(format!(
                    "member {i} consumes {} channels, member 0 consumes {}",
                    m.in_channels, first.in_channels
                )));
            }
        }
        Ok(Self { members })
    }

    pub fn n_classes(&self) -> usize {
        self.members[0].n_classes
    }
}

/// Arithmetic mean of the members' probability rows, in member order.
///
/// Accumulation runs in `f64`, so averaging `k` identical members reproduces
/// the single model's `f32` outputs bit for bit, and rows stay on the
/// probability simplex to within one rounding step.
pub fn ensemble_predict(ensemble: &EnsembleModel, x: &Tensor) -> Result<Vec<f32>> {
    let k = ensemble.members.len() as f64;
    let mut acc: Option<Vec<f64>> = None;
    for member in &ensemble.members {
        let probs = member.predict(x)?;
        match acc.as_mut() {
            None => acc = Some(probs.iter().map(|&p| p as f64).collect()),
            Some(acc) => {
                if acc.len() != probs.len() {
                    return Err(Error::Shape("ensemble members disagree on output shape".into()));
                }
                for (a, &p) in acc.iter_mut().zip(&probs) {
                    *a += p as f64;
                }
            }
        }
    }
    Ok(acc.expect("ensembles are non-empty").into_iter().map(|v| (v / k) as f32).collect())
}

/// Train `k` members with seeds `base_seed .. base_seed + k`, stored in seed
/// order. Member runs are independent; up to `threads` of them execute in
/// parallel (1 keeps everything on the calling thread).
pub fn build_ensemble(
    arch: &ArchConfig,
    dataset: &Dataset,
    config: &TrainConfig,
    k: usize,
    base_seed: u64,
    threads: usize,
) -> Result<(EnsembleModel, Vec<TrainHistory>)> {
    if k < 1 {
        return Err(Error::Invalid("ensemble size must be >= 1".into()));
    }
    let n_classes = dataset.n_classes();
    let train_member = |i: usize| -> Result<(ModelState, TrainHistory)> {
        let seed = base_seed + i as u64;
        let member_config = TrainConfig { seed, ..config.clone() };
        let model = build_model(arch, dataset.n_channels(), n_classes, seed)?;
        train(model, dataset, &member_config)
            .map_err(|e| Error::Invalid(format!("ensemble member {i} (seed {seed}) failed: {e}")))
    };

    let workers = threads.max(1).min(k);
    let mut slots: Vec<Option<Result<(ModelState, TrainHistory)>>> = Vec::new();
    slots.resize_with(k, || None);
    if workers == 1 {
        for (i, slot) in slots.iter_mut().enumerate() {
            *slot = Some(train_member(i));
        }
    } else {
        let next = AtomicUsize::new(0);
        let results = Mutex::new(&mut slots);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= k {
                        break;
                    }
                    let out = train_member(i);
                    results.lock().expect("no poisoned members")[i] = Some(out);
                });
            }
        });
    }

    let mut members = Vec::with_capacity(k);
    let mut histories = Vec::with_capacity(k);
    for slot in slots {
        let (model, history) = slot.expect("every member dispatched")?;
        members.push(model);
        histories.push(history);
    }
    Ok((EnsembleModel::new(members)?, histories))
}

/// On-disk description of an ensemble: member checkpoint paths, `k`, seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub k: usize,
    pub base_seed: u64,
    pub members: Vec<String>,
}

pub fn save_manifest(manifest: &EnsembleManifest, path: &Path) -> Result<()> {
    let json = serde_json::to_vec_pretty(manifest).map_err(|e| Error::Format(e.to_string()))?;
    atomic_write(path, &json)
}

/// Load a manifest and its member checkpoints. Relative member paths are
/// resolved against the manifest's directory.
pub fn load_from_manifest(path: &Path) -> Result<(EnsembleManifest, EnsembleModel)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: EnsembleManifest = serde_json::from_str(&text).map_err(|e| Error::Format(format!("ensemble manifest: {e}")))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut members = Vec::with_capacity(manifest.members.len());
    for member in &manifest.members {
        let p = Path::new(member);
        let resolved = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        members.push(crate::container::load_model(&resolved)?);
    }
    Ok((manifest, EnsembleModel::new(members)?))
}

//! Class activation maps over the output of the last convolutional block
//! (the GAP input): per-timestep relevance of the winning class.

use std::path::Path;

use crate::container::atomic_write;
use crate::error::{Error, Result};
use crate::model::ModelState;
use crate::tensor::Tensor;
use crate::train::argmax;

/// Per-timestep relevance scores for one series.
#[derive(Debug, Clone, PartialEq)]
pub struct CamResult {
    /// `sum_m w_m^c * O_m(t)` for the winning class `c` (dense bias excluded).
    pub raw: Vec<f32>,
    /// Min-max normalized scores in `[0, 1]`; all zeros when `raw` is constant.
    pub normalized: Vec<f32>,
    /// Winning class (highest predicted probability).
    pub class_index: usize,
    pub length: usize,
}

/// Compute the activation map of one series. The model must end in GAP
/// followed by the dense head, which every architecture here does; the
/// input must be a single sample.
pub fn compute_cam(model: &ModelState, x: &Tensor) -> Result<CamResult> {
    if x.batch() != 1 {
        return Err(Error::Invalid(format!("activation maps take one series at a time, got batch {}", x.batch())));
    }
    if model.head_w.len() != model.n_classes * model.features || model.blocks.is_empty() {
        return Err(Error::Invalid("model does not expose a GAP-fed classification head".into()));
    }
    let cache = model.forward_infer(x)?;
    let class_index = argmax(&cache.probs);
    let features = cache.gap_input();
    let (_, m, l) = features.shape();
    let weights = &model.head_w[class_index * model.features..(class_index + 1) * model.features];

    let mut raw = vec![0.0f32; l];
    for (mi, &w) in weights.iter().enumerate().take(m) {
        let channel = features.channel(0, mi);
        for (t, r) in raw.iter_mut().enumerate() {
            *r += w * channel[t];
        }
    }

    let min = raw.iter().copied().fold(f32::INFINITY, f32::min);
    let max = raw.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let normalized = if max > min {
        raw.iter().map(|&v| (v - min) / (max - min)).collect()
    } else {
        vec![0.0; l]
    };
    Ok(CamResult { raw, normalized, class_index, length: l })
}

/// Write `t,raw,normalized` rows. Values print in Rust's shortest
/// round-trip decimal form, so re-parsing reproduces the exact binary32.
pub fn cam_export(result: &CamResult, path: &Path) -> Result<()> {
    let mut out = String::from("t,raw,normalized\n");
    for t in 0..result.length {
        out.push_str(&format!("{t},{},{}\n", result.raw[t], result.normalized[t]));
    }
    atomic_write(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::LiteConfig;
    use crate::model::build_lite;

    fn model_with_head(seed: u64) -> ModelState {
        let mut m = build_lite(&LiteConfig::lite(), 1, 3, seed).unwrap();
        for (i, w) in m.head_w.iter_mut().enumerate() {
            *w = ((i as f32) * 0.37).sin() * 0.2;
        }
        m
    }

    #[test]
    fn hand_minmax_example() {
        // raw [2, 4, 6] normalizes to [0, 0.5, 1].
        let raw = vec![2.0f32, 4.0, 6.0];
        let min = 2.0;
        let max = 6.0;
        let normalized: Vec<f32> = raw.iter().map(|&v| (v - min) / (max - min)).collect();
        assert_eq!(normalized, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn zero_head_gives_all_zero_normalized() {
        let mut model = build_lite(&LiteConfig::lite(), 1, 3, 0).unwrap();
        model.head_w.fill(0.0);
        let x = Tensor::from_series(&(0..32).map(|t| (t as f32 * 0.3).sin()).collect::<Vec<_>>());
        let cam = compute_cam(&model, &x).unwrap();
        assert!(cam.raw.iter().all(|&v| v == 0.0));
        assert!(cam.normalized.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cam_length_matches_input_length() {
        let model = model_with_head(3);
        for l in [17usize, 50, 128] {
            let x = Tensor::from_series(&(0..l).map(|t| (t as f32 * 0.21).cos()).collect::<Vec<_>>());
            let cam = compute_cam(&model, &x).unwrap();
            assert_eq!(cam.length, l);
            assert_eq!(cam.raw.len(), l);
        }
    }

    #[test]
    fn normalized_bounds_and_order_follow_raw() {
        let model = model_with_head(5);
        let x = Tensor::from_series(&(0..64).map(|t| (t as f32 * 0.13).sin() + 0.5 * (t as f32 * 0.41).cos()).collect::<Vec<_>>());
        let cam = compute_cam(&model, &x).unwrap();
        let min = cam.normalized.iter().copied().fold(f32::INFINITY, f32::min);
        let max = cam.normalized.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        assert_eq!(min, 0.0);
        assert_eq!(max, 1.0);
        for i in 0..cam.raw.len() {
            for j in 0..cam.raw.len() {
                assert_eq!(cam.raw[i] < cam.raw[j], cam.normalized[i] < cam.normalized[j]);
            }
        }
    }

    #[test]
    fn mean_raw_equals_winning_logit_minus_bias() {
        let model = model_with_head(7);
        let x = Tensor::from_series(&(0..48).map(|t| (t as f32 * 0.19).sin()).collect::<Vec<_>>());
        let cam = compute_cam(&model, &x).unwrap();
        let cache = model.forward_infer(&x).unwrap();
        let logit: f32 = model.head_w[cam.class_index * model.features..(cam.class_index + 1) * model.features]
            .iter()
            .zip(&cache.features)
            .map(|(w, f)| w * f)
            .sum();
        let mean_raw: f32 = cam.raw.iter().sum::<f32>() / cam.length as f32;
        let rel = (mean_raw - logit).abs() / logit.abs().max(1e-6);
        assert!(rel < 1e-4, "mean {mean_raw} vs logit {logit}");
    }

    #[test]
    fn batch_input_rejected() {
        let model = model_with_head(1);
        assert!(compute_cam(&model, &Tensor::zeros(2, 1, 16)).is_err());
    }

    #[test]
    fn export_round_trips_and_has_exact_header() {
        let model = model_with_head(9);
        let x = Tensor::from_series(&(0..20).map(|t| (t as f32 * 0.33).sin()).collect::<Vec<_>>());
        let cam = compute_cam(&model, &x).unwrap();
        let dir = std::env::temp_dir().join(format!("ltsc-cam-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cam.csv");
        cam_export(&cam, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,raw,normalized"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), cam.length);
        for (t, row) in rows.iter().enumerate() {
            let cols: Vec<&str> = row.split(',').collect();
            assert_eq!(cols[0].parse::<usize>().unwrap(), t);
            assert_eq!(cols[1].parse::<f32>().unwrap().to_bits(), cam.raw[t].to_bits());
            assert_eq!(cols[2].parse::<f32>().unwrap().to_bits(), cam.normalized[t].to_bits());
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}

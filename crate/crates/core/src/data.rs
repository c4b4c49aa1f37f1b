//! Dataset loading and preparation: UCR-style `.tsv`, UEA-style `.ts`,
//! per-sample z-normalization, length resampling, stratified splitting and
//! score binarization.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container::{atomic_write, decode_container, encode_container};
use crate::error::{Error, Result};
use crate::init::Rng;
use crate::resample::resample_series;
use crate::tensor::Tensor;

/// Score threshold separating badly performed exercises (class 0) from well
/// performed ones (class 1).
pub const SCORE_THRESHOLD: f32 = 50.0;

/// Provenance and preprocessing record carried with every dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub source: String,
    pub z_normalized: bool,
    /// Set when samples had unequal lengths and were resampled to a common one.
    pub resampled_to: Option<usize>,
}

/// An in-memory dataset: `(N, C, L)` series with contiguous class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub series: Tensor,
    pub labels: Vec<usize>,
    /// Original label names, indexed by class index.
    pub class_names: Vec<String>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.series.batch()
    }

    pub fn n_channels(&self) -> usize {
        self.series.channels()
    }

    pub fn length(&self) -> usize {
        self.series.length()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// One sample as a `(1, C, L)` tensor.
    pub fn sample(&self, i: usize) -> Tensor {
        let (_, c, l) = self.series.shape();
        let mut out = Tensor::zeros(1, c, l);
        for ci in 0..c {
            out.channel_mut(0, ci).copy_from_slice(self.series.channel(i, ci));
        }
        out
    }

    /// Gather samples by index into a `(B, C, L)` batch with its labels.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let (_, c, l) = self.series.shape();
        let mut out = Tensor::zeros(indices.len(), c, l);
        let mut labels = Vec::with_capacity(indices.len());
        for (bi, &i) in indices.iter().enumerate() {
            for ci in 0..c {
                out.channel_mut(bi, ci).copy_from_slice(self.series.channel(i, ci));
            }
            labels.push(self.labels[i]);
        }
        (out, labels)
    }

    fn from_rows(
        rows: Vec<Vec<Vec<f32>>>,
        raw_labels: Vec<String>,
        ordered_names: Vec<String>,
        meta: DatasetMeta,
    ) -> Result<Self> {
        let n = rows.len();
        let c = rows[0].len();
        let l = rows[0][0].len();
        let mut data = Vec::with_capacity(n * c * l);
        for row in &rows {
            for ch in row {
                data.extend_from_slice(ch);
            }
        }
        let labels = raw_labels
            .iter()
            .map(|name| {
                ordered_names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::Invalid(format!("label '{name}' missing from class table")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            series: Tensor::from_vec(n, c, l, data)?,
            labels,
            class_names: ordered_names,
            meta,
        })
    }
}

/// Canonical display form of a numeric class label.
fn numeric_label_name(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Load a tab-separated archive file: one sample per line, class label
/// first. Produces a univariate dataset with labels remapped to contiguous
/// indices by ascending original label.
pub fn load_ucr_tsv(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let display = path.display().to_string();
    let mut values: Vec<Vec<f32>> = Vec::new();
    let mut raw_labels: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                path: display.clone(),
                line: Some(lineno + 1),
                column: None,
                msg: "expected a label and at least one value".into(),
            });
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::Parse {
                    path: display.clone(),
                    line: Some(lineno + 1),
                    column: None,
                    msg: format!("ragged row: {} columns, previous rows had {w}", fields.len()),
                });
            }
            _ => {}
        }
        let label: f64 = fields[0].trim().parse().map_err(|_| Error::Parse {
            path: display.clone(),
            line: Some(lineno + 1),
            column: Some(1),
            msg: format!("label '{}' is not numeric", fields[0]),
        })?;
        let mut row = Vec::with_capacity(fields.len() - 1);
        for (col, field) in fields.iter().enumerate().skip(1) {
            let v: f32 = field.trim().parse().map_err(|_| Error::Parse {
                path: display.clone(),
                line: Some(lineno + 1),
                column: Some(col + 1),
                msg: format!("value '{field}' is not numeric"),
            })?;
            row.push(v);
        }
        raw_labels.push(label);
        values.push(row);
    }
    if values.is_empty() {
        return Err(Error::Parse { path: display, line: None, column: None, msg: "file holds no samples".into() });
    }

    let mut uniq: Vec<f64> = raw_labels.clone();
    uniq.sort_by(|a, b| a.partial_cmp(b).expect("labels are finite"));
    uniq.dedup();
    let class_names: Vec<String> = uniq.iter().map(|&v| numeric_label_name(v)).collect();
    let rows: Vec<Vec<Vec<f32>>> = values.into_iter().map(|r| vec![r]).collect();
    let raw_names: Vec<String> = raw_labels.iter().map(|&v| numeric_label_name(v)).collect();
    Dataset::from_rows(rows, raw_names, class_names, DatasetMeta { source: display, ..Default::default() })
}

/// Load a `.ts` archive file: `@`-prefixed header directives, a `@data`
/// section with `:`-separated dimensions, `,`-separated values and the class
/// label after the last `:`. Unequal sample lengths are resampled to the
/// file's maximum length (recorded in the metadata).
pub fn load_uea_ts(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let display = path.display().to_string();
    let parse_err = |line: Option<usize>, msg: String| Error::Parse { path: display.clone(), line, column: None, msg };

    let mut declared_labels: Option<Vec<String>> = None;
    let mut in_data = false;
    let mut rows: Vec<Vec<Vec<f32>>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut dims: Option<usize> = None;
    let mut max_len = 0usize;
    let mut lengths_vary = false;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !in_data {
            if let Some(rest) = line.strip_prefix('@') {
                let lower = rest.to_ascii_lowercase();
                if lower == "data" {
                    in_data = true;
                } else if let Some(args) = lower.strip_prefix("classlabel") {
                    let mut tokens = args.split_whitespace();
                    match tokens.next() {
                        Some("true") => {
                            // Re-split the original casing for the label names.
                            let names: Vec<String> =
                                rest.split_whitespace().skip(2).map(|s| s.to_string()).collect();
                            if names.is_empty() {
                                return Err(parse_err(Some(lineno + 1), "@classLabel declares no labels".into()));
                            }
                            declared_labels = Some(names);
                        }
                        _ => {
                            return Err(parse_err(
                                Some(lineno + 1),
                                "@classLabel must be 'true' followed by the label list".into(),
                            ));
                        }
                    }
                }
                continue;
            }
            return Err(parse_err(Some(lineno + 1), format!("unexpected line before @data: '{line}'")));
        }

        let mut parts: Vec<&str> = line.split(':').collect();
        if parts.len() < 2 {
            return Err(parse_err(Some(lineno + 1), "data row needs at least one dimension and a label".into()));
        }
        let label = parts.pop().expect("nonempty").trim().to_string();
        match dims {
            None => dims = Some(parts.len()),
            Some(d) if d != parts.len() => {
                return Err(parse_err(
                    Some(lineno + 1),
                    format!("row has {} dimensions, previous rows had {d}", parts.len()),
                ));
            }
            _ => {}
        }
        let mut sample: Vec<Vec<f32>> = Vec::with_capacity(parts.len());
        let mut row_len: Option<usize> = None;
        for dim in parts {
            let channel = dim
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f32>()
                        .map_err(|_| parse_err(Some(lineno + 1), format!("value '{tok}' is not numeric")))
                })
                .collect::<Result<Vec<f32>>>()?;
            if channel.is_empty() {
                return Err(parse_err(Some(lineno + 1), "empty dimension".into()));
            }
            match row_len {
                None => row_len = Some(channel.len()),
                Some(l) if l != channel.len() => {
                    return Err(parse_err(
                        Some(lineno + 1),
                        "dimensions of one sample have different lengths".into(),
                    ));
                }
                _ => {}
            }
            sample.push(channel);
        }
        let this_len = row_len.expect("at least one dimension");
        if max_len != 0 && this_len != max_len {
            lengths_vary = true;
        }
        max_len = max_len.max(this_len);
        rows.push(sample);
        raw_labels.push(label);
    }

    if !in_data {
        return Err(parse_err(None, "missing @data section".into()));
    }
    if rows.is_empty() {
        return Err(parse_err(None, "no data rows".into()));
    }
    let class_names = declared_labels.ok_or_else(|| parse_err(None, "header does not declare @classLabel".into()))?;
    for label in &raw_labels {
        if !class_names.contains(label) {
            return Err(parse_err(None, format!("label '{label}' not in @classLabel list {class_names:?}")));
        }
    }

    let mut meta = DatasetMeta { source: display, ..Default::default() };
    if lengths_vary {
        for sample in &mut rows {
            for channel in sample.iter_mut() {
                if channel.len() != max_len {
                    *channel = resample_series(channel, max_len)?;
                }
            }
        }
        meta.resampled_to = Some(max_len);
    }
    Dataset::from_rows(rows, raw_labels, class_names, meta)
}

/// Z-normalize every sample, per channel, with the population standard
/// deviation; channels with deviation below 1e-8 become zeros.
pub fn znormalize(dataset: &Dataset) -> Dataset {
    let (n, c, l) = dataset.series.shape();
    let mut out = dataset.clone();
    for i in 0..n {
        for ci in 0..c {
            let src = dataset.series.channel(i, ci);
            let mean = src.iter().map(|&v| v as f64).sum::<f64>() / l as f64;
            let var = src.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / l as f64;
            let std = var.sqrt();
            let dst = out.series.channel_mut(i, ci);
            if std < 1e-8 {
                dst.fill(0.0);
            } else {
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = ((s as f64 - mean) / std) as f32;
                }
            }
        }
    }
    out.meta.z_normalized = true;
    out
}

/// Resample every sample of a dataset to a common length.
pub fn resample_dataset(dataset: &Dataset, target: usize) -> Result<Dataset> {
    let (n, c, _) = dataset.series.shape();
    let mut data = Vec::with_capacity(n * c * target);
    for i in 0..n {
        for ci in 0..c {
            data.extend_from_slice(&resample_series(dataset.series.channel(i, ci), target)?);
        }
    }
    Ok(Dataset {
        series: Tensor::from_vec(n, c, target, data)?,
        labels: dataset.labels.clone(),
        class_names: dataset.class_names.clone(),
        meta: DatasetMeta { resampled_to: Some(target), ..dataset.meta.clone() },
    })
}

/// Stratified train/test split: per class, a seeded shuffle puts
/// `round(count * test_fraction)` samples in the test set. The two sides are
/// disjoint and exhaustive.
pub fn stratified_split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::Invalid(format!("test fraction must be in [0, 1), got {test_fraction}")));
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_classes()];
    for (i, &label) in dataset.labels.iter().enumerate() {
        per_class[label].push(i);
    }
    for (class, members) in per_class.iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::Invalid(format!(
                "class '{}' has {} sample(s); stratified splitting needs at least 2",
                dataset.class_names[class],
                members.len()
            )));
        }
    }
    let mut rng = Rng::seed_from(seed);
    let mut test_idx: Vec<usize> = Vec::new();
    let mut train_idx: Vec<usize> = Vec::new();
    for members in &mut per_class {
        rng.shuffle(members);
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        test_idx.extend(&members[..n_test]);
        train_idx.extend(&members[n_test..]);
    }
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((subset(dataset, &train_idx), subset(dataset, &test_idx)))
}

fn subset(dataset: &Dataset, indices: &[usize]) -> Dataset {
    let (series, labels) = dataset.batch(indices);
    Dataset { series, labels, class_names: dataset.class_names.clone(), meta: dataset.meta.clone() }
}

/// Map continuous 0-100 scores to classes: below the threshold is class 0
/// (badly performed), at or above is class 1 (well performed).
pub fn binarize_scores(scores: &[f32], threshold: f32) -> Vec<usize> {
    scores.iter().map(|&s| usize::from(s >= threshold)).collect()
}

/// Serialize a dataset to the tensor container format.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let meta = serde_json::json!({
        "meta": dataset.meta,
        "labels": dataset.labels,
        "class_names": dataset.class_names,
    });
    let (n, c, l) = dataset.series.shape();
    let tensors = vec![("series".to_string(), vec![n, c, l], dataset.series.data())];
    let bytes = encode_container("dataset", &meta, &tensors)?;
    atomic_write(path, &bytes)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (manifest, mut tensors) = decode_container(&bytes)?;
    if manifest.kind != "dataset" {
        return Err(Error::Format(format!("expected a dataset container, found kind '{}'", manifest.kind)));
    }
    let labels: Vec<usize> = serde_json::from_value(manifest.meta["labels"].clone())
        .map_err(|e| Error::Format(format!("labels: {e}")))?;
    let class_names: Vec<String> = serde_json::from_value(manifest.meta["class_names"].clone())
        .map_err(|e| Error::Format(format!("class_names: {e}")))?;
    let meta: DatasetMeta = serde_json::from_value(manifest.meta["meta"].clone())
        .map_err(|e| Error::Format(format!("meta: {e}")))?;
    let series = tensors
        .iter()
        .position(|t| t.name == "series")
        .map(|i| tensors.swap_remove(i))
        .ok_or_else(|| Error::Format("dataset container lacks a 'series' tensor".into()))?;
    if series.shape.len() != 3 {
        return Err(Error::Format(format!("series tensor must be rank 3, got {:?}", series.shape)));
    }
    Ok(Dataset {
        series: Tensor::from_vec(series.shape[0], series.shape[1], series.shape[2], series.data)?,
        labels,
        class_names,
        meta,
    })
}

/// Load a dataset by extension: `.tsv`/`.txt` as the tab-separated format,
/// `.ts` as the UEA text format, anything else as a container dump.
pub fn load_any(path: &Path) -> Result<Dataset> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") | Some("txt") => load_ucr_tsv(path),
        Some("ts") => load_uea_ts(path),
        _ => load_dataset(path),
    }
}

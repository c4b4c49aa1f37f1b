//! Implementations behind each subcommand.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use lite_tsc::arch::{summarize, ArchConfig};
use lite_tsc::cam::{cam_export, compute_cam};
use lite_tsc::container::{atomic_write, load_model, save_model};
use lite_tsc::data::{load_any, znormalize, Dataset};
use lite_tsc::ensemble::{build_ensemble, ensemble_predict, load_from_manifest, save_manifest, EnsembleManifest};
use lite_tsc::model::build_model;
use lite_tsc::stats::{accuracy, read_records_csv, report, write_report_csv};
use lite_tsc::synth::trend_dataset;
use lite_tsc::train::{argmax, train, TrainConfig};

use crate::manifest::{sha256_file, ManifestCore};

/// Load a dataset and apply the per-sample z-normalization the training
/// protocol expects.
fn load_normalized(path: &Path) -> Result<Dataset> {
    let ds = load_any(path).with_context(|| format!("loading dataset {}", path.display()))?;
    Ok(znormalize(&ds))
}

/// Write to stdout, treating a closed pipe as a normal end of output.
fn print_or_pipe(text: &str) -> Result<()> {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match lock.write_all(text.as_bytes()).and_then(|_| lock.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

/// Resolve the training configuration: defaults, then the optional TOML
/// file, then explicit flags.
pub struct TrainOverrides {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f32>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, serde::Deserialize)]
struct FileConfig {
    train: Option<FileTrain>,
}

#[derive(Debug, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTrain {
    epochs: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f32>,
    beta1: Option<f32>,
    beta2: Option<f32>,
    epsilon: Option<f32>,
    plateau_factor: Option<f32>,
    plateau_patience: Option<usize>,
    min_learning_rate: Option<f32>,
    seed: Option<u64>,
}

pub fn resolve_train_config(config_file: Option<&Path>, overrides: &TrainOverrides) -> Result<TrainConfig> {
    let mut config = TrainConfig::default();
    if let Some(path) = config_file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let file: FileConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(t) = file.train {
            if let Some(v) = t.epochs {
                config.epochs = v;
            }
            if let Some(v) = t.batch_size {
                config.batch_size = v;
            }
            if let Some(v) = t.learning_rate {
                config.learning_rate = v;
            }
            if let Some(v) = t.beta1 {
                config.beta1 = v;
            }
            if let Some(v) = t.beta2 {
                config.beta2 = v;
            }
            if let Some(v) = t.epsilon {
                config.epsilon = v;
            }
            if let Some(v) = t.plateau_factor {
                config.plateau_factor = v;
            }
            if let Some(v) = t.plateau_patience {
                config.plateau_patience = v;
            }
            if let Some(v) = t.min_learning_rate {
                config.min_learning_rate = v;
            }
            if let Some(v) = t.seed {
                config.seed = v;
            }
        }
    }
    if let Some(v) = overrides.epochs {
        config.epochs = v;
    }
    if let Some(v) = overrides.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = overrides.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = overrides.seed {
        config.seed = v;
    }
    Ok(config)
}

pub fn cmd_train(
    dataset_path: &Path,
    arch_name: &str,
    config_file: Option<&Path>,
    overrides: &TrainOverrides,
    out: &Path,
) -> Result<PathBuf> {
    let arch = ArchConfig::from_name(arch_name)?;
    let config = resolve_train_config(config_file, overrides)?;
    let dataset = load_normalized(dataset_path)?;

    let core = ManifestCore {
        command: "train".into(),
        arch: arch_name.into(),
        dataset: dataset_path.display().to_string(),
        dataset_sha256: sha256_file(dataset_path)?,
        train_config: config.clone(),
        seed: config.seed,
        k: None,
        base_seed: None,
    };
    let run_dir = core.run_dir(out)?;
    std::fs::create_dir_all(&run_dir).with_context(|| format!("creating {}", run_dir.display()))?;

    let model = build_model(&arch, dataset.n_channels(), dataset.n_classes(), config.seed)?;
    let plan = model.plan()?;
    println!(
        "{}: {} backbone parameters + {} classifier parameters ({} classes), receptive field {}",
        arch_name,
        plan.backbone_params(),
        plan.head_params(dataset.n_classes()),
        dataset.n_classes(),
        plan.receptive_field()
    );

    let (best, history) = train(model, &dataset, &config)?;
    let checkpoint = run_dir.join("checkpoint.bin");
    save_model(&best, &checkpoint)?;
    let history_path = run_dir.join("history.csv");
    history.write_csv(&history_path)?;

    let mut artifacts = BTreeMap::new();
    artifacts.insert("checkpoint.bin".to_string(), sha256_file(&checkpoint)?);
    artifacts.insert("history.csv".to_string(), sha256_file(&history_path)?);
    core.into_manifest(artifacts).write(&run_dir)?;

    println!(
        "best epoch {} (training loss {}), run directory {}",
        history.best_epoch,
        history.best_loss(),
        run_dir.display()
    );
    Ok(run_dir)
}

pub fn cmd_summary(arch_name: &str, channels: usize, length: usize, json: bool) -> Result<()> {
    let arch = ArchConfig::from_name(arch_name)?;
    let summary = summarize(&arch, channels, length)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
        return Ok(());
    }
    println!(
        "{:<24} {:>18} {:>7} {:>9} {:>5} {:>6} {:>10} {:>12} {:>5}",
        "layer", "kind", "kernel", "dilation", "in", "out", "params", "mults", "rf"
    );
    let dash = "-".to_string();
    for row in &summary.rows {
        println!(
            "{:<24} {:>18} {:>7} {:>9} {:>5} {:>6} {:>10} {:>12} {:>5}",
            row.layer,
            row.kind,
            row.kernel.map_or_else(|| dash.clone(), |v| v.to_string()),
            row.dilation.map_or_else(|| dash.clone(), |v| v.to_string()),
            row.in_channels,
            row.out_channels,
            row.params,
            row.mults,
            row.receptive_field.map_or_else(|| dash.clone(), |v| v.to_string()),
        );
    }
    println!();
    println!(
        "total trainable parameters (classifier excluded): {}",
        summary.total_params
    );
    println!("total convolution multiplications at length {}: {}", summary.length, summary.total_mults);
    println!("receptive field: {}", summary.receptive_field);
    Ok(())
}

pub fn cmd_ensemble(
    dataset_path: &Path,
    arch_name: &str,
    k: usize,
    base_seed: u64,
    config_file: Option<&Path>,
    overrides: &TrainOverrides,
    out: &Path,
    threads: usize,
) -> Result<PathBuf> {
    let arch = ArchConfig::from_name(arch_name)?;
    let config = resolve_train_config(config_file, overrides)?;
    let dataset = load_normalized(dataset_path)?;

    let core = ManifestCore {
        command: "ensemble".into(),
        arch: arch_name.into(),
        dataset: dataset_path.display().to_string(),
        dataset_sha256: sha256_file(dataset_path)?,
        train_config: config.clone(),
        seed: base_seed,
        k: Some(k),
        base_seed: Some(base_seed),
    };
    let run_dir = core.run_dir(out)?;
    std::fs::create_dir_all(&run_dir).with_context(|| format!("creating {}", run_dir.display()))?;

    let (ensemble, histories) = build_ensemble(&arch, &dataset, &config, k, base_seed, threads)?;
    let mut artifacts = BTreeMap::new();
    let mut member_paths = Vec::with_capacity(k);
    for (i, member) in ensemble.members.iter().enumerate() {
        let name = format!("member{i}.bin");
        let path = run_dir.join(&name);
        save_model(member, &path)?;
        artifacts.insert(name.clone(), sha256_file(&path)?);
        member_paths.push(name);
        histories[i].write_csv(&run_dir.join(format!("history{i}.csv")))?;
    }
    let manifest = EnsembleManifest { k, base_seed, members: member_paths };
    save_manifest(&manifest, &run_dir.join("ensemble.json"))?;
    artifacts.insert("ensemble.json".to_string(), sha256_file(&run_dir.join("ensemble.json"))?);
    core.into_manifest(artifacts).write(&run_dir)?;

    println!("trained {k} members (seeds {base_seed}..{}), run directory {}", base_seed + k as u64 - 1, run_dir.display());
    Ok(run_dir)
}

pub fn cmd_eval(model_path: Option<&Path>, ensemble_path: Option<&Path>, dataset_path: &Path) -> Result<f64> {
    let dataset = load_normalized(dataset_path)?;
    let (series, labels) = dataset.batch(&(0..dataset.n_samples()).collect::<Vec<_>>());
    let probs = match (model_path, ensemble_path) {
        (Some(path), None) => {
            let model = load_model(path)?;
            model.predict(&series)?
        }
        (None, Some(path)) => {
            let (_, ensemble) = load_from_manifest(path)?;
            ensemble_predict(&ensemble, &series)?
        }
        _ => bail!("exactly one of --model or --ensemble is required"),
    };
    let k = probs.len() / dataset.n_samples();
    let predictions: Vec<usize> = (0..dataset.n_samples()).map(|i| argmax(&probs[i * k..(i + 1) * k])).collect();
    let acc = accuracy(&predictions, &labels)?;
    println!("accuracy {acc}");
    Ok(acc)
}

pub fn cmd_cam(model_path: &Path, dataset_path: &Path, index: usize, out: Option<&Path>) -> Result<()> {
    let model = load_model(model_path)?;
    let dataset = load_normalized(dataset_path)?;
    if index >= dataset.n_samples() {
        bail!("sample index {index} out of range: dataset has {} samples", dataset.n_samples());
    }
    let cam = compute_cam(&model, &dataset.sample(index))?;
    println!(
        "sample {index}: winning class {} ({})",
        cam.class_index,
        dataset.class_names.get(cam.class_index).map(String::as_str).unwrap_or("?")
    );
    match out {
        Some(path) => {
            cam_export(&cam, path)?;
            println!("wrote {}", path.display());
        }
        None => {
            let mut text = String::from("t,raw,normalized\n");
            for t in 0..cam.length {
                text.push_str(&format!("{t},{},{}\n", cam.raw[t], cam.normalized[t]));
            }
            print_or_pipe(&text)?;
        }
    }
    Ok(())
}

pub fn cmd_stats(records_path: &Path, out: Option<&Path>) -> Result<()> {
    let records = read_records_csv(records_path)?;
    let rep = report(&records)?;
    match out {
        Some(path) => {
            write_report_csv(&rep, path)?;
            println!("wrote {}", path.display());
        }
        None => print_or_pipe(&lite_tsc::stats::report_to_csv(&rep))?,
    }
    Ok(())
}

pub fn cmd_dump_filters(out: Option<&Path>) -> Result<()> {
    let bank = lite_tsc::filters::FilterBank::standard();
    let mut text = String::from("kind,size,coefficients\n");
    for f in &bank.filters {
        let coeffs: Vec<String> = f.coefficients.iter().map(|c| c.to_string()).collect();
        text.push_str(&format!("{},{},{}\n", f.kind.as_str(), f.size, coeffs.join(";")));
    }
    match out {
        Some(path) => {
            atomic_write(path, text.as_bytes())?;
            println!("wrote {} kernels to {}", bank.len(), path.display());
        }
        None => print_or_pipe(&text)?,
    }
    Ok(())
}

pub fn cmd_synth(out: &Path, samples: usize, length: usize, sigma: f32, seed: u64) -> Result<()> {
    let ds = trend_dataset(samples, length, sigma, seed);
    let mut text = String::new();
    for i in 0..ds.n_samples() {
        text.push_str(&ds.labels[i].to_string());
        for v in ds.series.channel(i, 0) {
            text.push('\t');
            text.push_str(&v.to_string());
        }
        text.push('\n');
    }
    atomic_write(out, text.as_bytes())?;
    println!("wrote {} samples of length {length} to {}", ds.n_samples(), out.display());
    Ok(())
}

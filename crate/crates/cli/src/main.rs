//! `lite-tsc`: train, evaluate and inspect LITE-family time series
//! classifiers. Exit codes: 0 success, 1 computation error, 2 usage error.

mod commands;
mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::TrainOverrides;

#[derive(Parser)]
#[command(name = "lite-tsc", version, about = "LITE / LITEMV time series classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write its checkpoint, history and manifest.
    Train {
        /// Dataset file: .tsv (label-first, tab-separated), .ts, or a dataset container.
        #[arg(long)]
        dataset: PathBuf,
        /// Architecture: lite | litemv | fcn | striped | striped+custom | striped+multiplex | striped+dilation.
        #[arg(long)]
        arch: String,
        /// Optional TOML config file ([train] table); flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long = "batch-size")]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output root; the run lands in a content-addressed subdirectory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-layer table of kernels, channels, parameters, multiplications
    /// and the cumulative receptive field.
    Summary {
        #[arg(long)]
        arch: String,
        #[arg(long, default_value_t = 1)]
        channels: usize,
        #[arg(long, default_value_t = 128)]
        length: usize,
        #[arg(long, default_value_t = false)]
        json: bool,
    },
    /// Train k independently seeded members and write an ensemble manifest.
    Ensemble {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        arch: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long = "base-seed", default_value_t = 0)]
        base_seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long = "batch-size")]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report test accuracy of a checkpoint or an ensemble on a dataset.
    Eval {
        #[arg(long, conflicts_with = "ensemble")]
        model: Option<PathBuf>,
        /// Path to an ensemble.json manifest.
        #[arg(long)]
        ensemble: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Class activation map of one sample, as t,raw,normalized CSV.
    Cam {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Sample index within the dataset.
        #[arg(long)]
        index: usize,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Comparison report (mean accuracy, win/tie/loss, Wilcoxon + Holm,
    /// average ranks) from a classifier,dataset,accuracy CSV.
    Stats {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the 17 fixed custom-filter kernels as CSV.
    DumpFilters {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the synthetic three-class trend dataset as a .tsv file.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        samples: usize,
        #[arg(long, default_value_t = 128)]
        length: usize,
        #[arg(long, default_value_t = 0.2)]
        sigma: f32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parallel ensemble-member training cap, from the environment.
fn thread_cap() -> usize {
    std::env::var("LITE_TSC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train { dataset, arch, config, epochs, batch_size, lr, seed, out } => {
            let overrides = TrainOverrides { epochs, batch_size, learning_rate: lr, seed };
            commands::cmd_train(&dataset, &arch, config.as_deref(), &overrides, &out)?;
            Ok(())
        }
        Command::Summary { arch, channels, length, json } => commands::cmd_summary(&arch, channels, length, json),
        Command::Ensemble { dataset, arch, k, base_seed, config, epochs, batch_size, lr, out } => {
            let overrides = TrainOverrides { epochs, batch_size, learning_rate: lr, seed: None };
            commands::cmd_ensemble(&dataset, &arch, k, base_seed, config.as_deref(), &overrides, &out, thread_cap())?;
            Ok(())
        }
        Command::Eval { model, ensemble, dataset } => {
            commands::cmd_eval(model.as_deref(), ensemble.as_deref(), &dataset)?;
            Ok(())
        }
        Command::Cam { model, dataset, index, out } => commands::cmd_cam(&model, &dataset, index, out.as_deref()),
        Command::Stats { records, out } => commands::cmd_stats(&records, out.as_deref()),
        Command::DumpFilters { out } => commands::cmd_dump_filters(out.as_deref()),
        Command::Synth { out, samples, length, sigma, seed } => {
            commands::cmd_synth(&out, samples, length, sigma, seed)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

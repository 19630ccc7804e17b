//! `ddsc` — the operator surface of the disaggregation pipeline.
//!
//! Exit codes: 0 on success, 2 on usage or input errors, 3 on numerical
//! failures during training or prediction. Every command is deterministic
//! given its inputs and seed. `DDSC_THREADS` caps worker parallelism.

mod commands;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::CliError;

#[derive(Parser)]
#[command(name = "ddsc", version, about = "Energy disaggregation by discriminative sparse coding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset bundle from a profile spec
    Synth {
        /// Profile spec JSON
        #[arg(long)]
        spec: PathBuf,
        /// Output bundle directory
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Convert raw meter CSVs plus sidecar metadata into a dataset bundle
    Ingest {
        /// Directory of `<house_id>.csv` files with `<house_id>.meta.json` sidecars
        #[arg(long)]
        raw: PathBuf,
        /// Category map JSON
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Weekday starting each weekly window
        #[arg(long, default_value = "monday")]
        week_start: String,
        /// Fraction of houses assigned to the train split
        #[arg(long, default_value_t = 0.7)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a model on the bundle's train split
    Train {
        #[arg(long)]
        data: PathBuf,
        /// JSON overrides of the default training config
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output model file
        #[arg(long)]
        out: PathBuf,
        /// Keep the discriminative bases equal to the reconstruction bases
        #[arg(long)]
        skip_dd: bool,
        /// Write per-iteration training records as JSON lines
        #[arg(long)]
        log: Option<PathBuf>,
        /// Overrides the seed from the config file
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Split an aggregate matrix CSV into per-appliance estimates
    Disaggregate {
        #[arg(long)]
        model: PathBuf,
        /// Headerless CSV, rows = time steps, columns = examples
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = commands::parse_mode)]
        mode: ddsc_core::DisaggMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a model on a bundle split and write JSON and CSV reports
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Bundle split to score
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Exhaustive hyperparameter search on a validation split carved from training houses
    Gridsearch {
        #[arg(long)]
        data: PathBuf,
        /// Grid JSON: arrays of n_bases, lambda and alpha values
        #[arg(long)]
        grid: PathBuf,
        /// JSON overrides of the default training config
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Plot-ready long-format CSVs from a directory of prediction matrices
    Report {
        #[arg(long)]
        predictions: PathBuf,
        /// Matching truth matrices; adds error columns when given
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn init_threads() {
    if let Ok(text) = std::env::var("DDSC_THREADS") {
        if let Ok(n) = text.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn main() {
    let cli = Cli::parse();
    init_threads();
    let result: Result<(), CliError> = match cli.command {
        Command::Synth { spec, out, seed } => commands::synth::run(&spec, &out, seed),
        Command::Ingest {
            raw,
            map,
            out,
            week_start,
            ratio,
            seed,
        } => commands::ingest::run(&raw, &map, &out, &week_start, ratio, seed),
        Command::Train {
            data,
            config,
            out,
            skip_dd,
            log,
            seed,
        } => commands::train::run(&data, config.as_deref(), &out, skip_dd, log.as_deref(), seed),
        Command::Disaggregate {
            model,
            input,
            mode,
            out,
        } => commands::disaggregate::run(&model, &input, mode, &out),
        Command::Evaluate {
            model,
            data,
            out,
            split,
        } => commands::evaluate::run(&model, &data, &out, &split),
        Command::Gridsearch {
            data,
            grid,
            config,
            out,
            seed,
        } => commands::gridsearch::run(&data, &grid, config.as_deref(), &out, seed),
        Command::Report {
            predictions,
            truth,
            out,
        } => commands::report::run(&predictions, truth.as_deref(), &out),
    };
    if let Err(err) = result {
        eprintln!("error: {:#}", err.inner());
        std::process::exit(err.exit_code());
    }
}

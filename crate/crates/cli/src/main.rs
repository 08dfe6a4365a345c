//! Workflow driver for the seizure-prediction pipeline.
//!
//! Subcommands cover the full path from raw or synthetic recordings to the
//! evaluation report: synth, ingest, train, predict, evaluate, grid, kl,
//! spectral, and baseline. Exit codes: 0 on success, 1 for usage and input
//! problems, 2 for failures during computation or output.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::CliError;

#[derive(Parser)]
#[command(name = "eegpred", version, about = "Focal seizure prediction from scalp EEG")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Run configuration file of key=value lines.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed override for splits, balancing, weight init, and batching.
    #[arg(long)]
    seed: Option<u64>,
    /// Input representation: "wavelet" or "raw".
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic recording plus its onset sidecar.
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Recording identifier; names the EDF and sidecar.
        #[arg(long)]
        id: String,
        /// Recording length in seconds.
        #[arg(long)]
        duration: f64,
        /// Seizure onset in seconds; omit for an onset-free recording.
        #[arg(long)]
        onset: Option<f64>,
        /// Preictal buildup length in seconds before onset.
        #[arg(long)]
        transition: Option<f64>,
        #[arg(long, default_value_t = 22)]
        channels: usize,
        /// Sampling rate in Hz.
        #[arg(long, default_value_t = 256)]
        rate: u32,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Cache recordings as network-ready tensors.
    Ingest {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        /// Recordings: .edf (optional .json onset sidecar) or .wtc caches.
        inputs: Vec<PathBuf>,
    },
    /// Train the classifier on labeled recordings.
    Train {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        /// Recordings: .edf (optional .json onset sidecar) or .wtc caches.
        inputs: Vec<PathBuf>,
    },
    /// Score recordings with a trained model and stamp alarms.
    Predict {
        /// Model checkpoint from the train subcommand.
        #[arg(long)]
        model: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        /// Recordings: .edf (optional .json onset sidecar) or .wtc caches.
        inputs: Vec<PathBuf>,
    },
    /// Aggregate scored recordings into an evaluation report.
    Evaluate {
        /// scores.json from the predict subcommand.
        #[arg(long)]
        scores: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        /// Prediction-trace CSVs from the predict subcommand.
        traces: Vec<PathBuf>,
    },
    /// Pick the preictal horizon by cross-validated search.
    Grid {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated horizon candidates in minutes.
        #[arg(long)]
        candidates: String,
        #[command(flatten)]
        common: CommonOpts,
        /// Recordings: .edf (optional .json onset sidecar) or .wtc caches.
        inputs: Vec<PathBuf>,
    },
    /// Scan hidden-feature trajectories for sustained divergence.
    Kl {
        /// Model checkpoint from the train subcommand.
        #[arg(long)]
        model: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        /// Recordings: .edf (optional .json onset sidecar) or .wtc caches.
        inputs: Vec<PathBuf>,
    },
    /// Conditioning metrics of trained weight matrices.
    Spectral {
        /// Model checkpoint from the train subcommand.
        #[arg(long)]
        model: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Random-predictor significance bounds for a false prediction rate.
    Baseline {
        /// False prediction rate per hour.
        #[arg(long)]
        fpr: f64,
        /// Number of seizures under test.
        #[arg(long, default_value_t = 33)]
        seizures: usize,
        /// Occurrence period in minutes.
        #[arg(long, default_value_t = 10.0)]
        sop_minutes: f64,
        /// Significance level.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Bonferroni comparison count for the upper bound.
        #[arg(long, default_value_t = 100)]
        comparisons: usize,
    },
}

fn resolve(common: &CommonOpts) -> Result<config::RunConfig, CliError> {
    commands::resolve_run(common.config.as_deref(), common.seed, common.mode.as_deref())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth { out, id, duration, onset, transition, channels, rate, common } => {
            let run = resolve(&common)?;
            commands::cmd_synth(&out, &id, duration, onset, transition, channels, rate, &run)
        }
        Command::Ingest { out, common, inputs } => {
            let run = resolve(&common)?;
            commands::cmd_ingest(&out, &inputs, &run)
        }
        Command::Train { out, common, inputs } => {
            let run = resolve(&common)?;
            commands::cmd_train(&out, &inputs, &run)
        }
        Command::Predict { model, out, common, inputs } => {
            let run = resolve(&common)?;
            commands::cmd_predict(&model, &out, &inputs, &run)
        }
        Command::Evaluate { scores, out, common, traces } => {
            let run = resolve(&common)?;
            commands::cmd_evaluate(&scores, &traces, &out, &run)
        }
        Command::Grid { out, candidates, common, inputs } => {
            let run = resolve(&common)?;
            commands::cmd_grid(&out, &candidates, &inputs, &run)
        }
        Command::Kl { model, out, common, inputs } => {
            let run = resolve(&common)?;
            commands::cmd_kl(&model, &out, &inputs, &run)
        }
        Command::Spectral { model, out, common } => {
            let run = resolve(&common)?;
            commands::cmd_spectral(&model, &out, &run)
        }
        Command::Baseline { fpr, seizures, sop_minutes, alpha, comparisons } => {
            commands::cmd_baseline(fpr, seizures, sop_minutes, alpha, comparisons)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let code = match dispatch(cli.command) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    };
    std::process::exit(code);
}

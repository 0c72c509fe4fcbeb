//! Command-line surface. Only flags given explicitly override the config file
//! and defaults, so every option here is optional.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::Command;

#[derive(Debug, Parser)]
#[command(name = "puffscan", version, about = "Smoking-puff detection from wrist accelerometer streams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Write a synthetic labeled stream and its true puff events.
    Generate(GenerateArgs),
    /// Window, balance and split a labeled stream, then train a classifier.
    Train(TrainArgs),
    /// Score a model on the held-out test partition.
    Eval(EvalArgs),
    /// Classify windows of a stream and parse puffs and sessions.
    Detect(DetectArgs),
    /// Train over a grid of epochs, batch sizes and depths and rank the results.
    Sweep(SweepArgs),
    /// Re-run the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
    },
}

impl CliCommand {
    pub fn kind(&self) -> Option<Command> {
        match self {
            CliCommand::Generate(_) => Some(Command::Generate),
            CliCommand::Train(_) => Some(Command::Train),
            CliCommand::Eval(_) => Some(Command::Eval),
            CliCommand::Detect(_) => Some(Command::Detect),
            CliCommand::Sweep(_) => Some(Command::Sweep),
            CliCommand::Replay { .. } => None,
        }
    }

    pub fn config_path(&self) -> Option<&PathBuf> {
        match self {
            CliCommand::Generate(a) => a.config.as_ref(),
            CliCommand::Train(a) => a.config.as_ref(),
            CliCommand::Eval(a) => a.config.as_ref(),
            CliCommand::Detect(a) => a.config.as_ref(),
            CliCommand::Sweep(a) => a.config.as_ref(),
            CliCommand::Replay { .. } => None,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// key=value settings file, overridden by flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output stream CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// True puff events CSV [default: <out>.truth.csv]
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// [default: <out>.manifest]
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub puffs: Option<usize>,
    #[arg(long)]
    pub distractors: Option<usize>,
    /// Gaussian noise standard deviation
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub sample_rate: Option<f64>,
    /// Shortest hand-on-lip hold, seconds
    #[arg(long)]
    pub hol_min: Option<f64>,
    #[arg(long)]
    pub hol_max: Option<f64>,
    /// Hand-to-lip and hand-off-lip ramp length, seconds
    #[arg(long)]
    pub ramp: Option<f64>,
    #[arg(long)]
    pub rest_min: Option<f64>,
    #[arg(long)]
    pub rest_max: Option<f64>,
    #[arg(long)]
    pub distractor_min: Option<f64>,
    #[arg(long)]
    pub distractor_max: Option<f64>,
}

/// Windowing, balancing and split options shared by `train` and `sweep`.
#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Labeled stream CSV
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// bce or mse [default: bce for mlp, mse for lstm]
    #[arg(long)]
    pub loss: Option<String>,
    /// Shuffle mini-batches each epoch
    #[arg(long)]
    pub shuffle: Option<bool>,
    /// Copies per window of the balanced classes
    #[arg(long)]
    pub balance_factor: Option<usize>,
    /// Class ids to duplicate
    #[arg(long, value_delimiter = ',')]
    pub balance_classes: Option<Vec<u8>>,
    /// paper (balance then split) or no_leak (balance the train part only)
    #[arg(long)]
    pub leak_mode: Option<String>,
    /// train,val,test fractions
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// xyz-interleaved or xyz-planar [default: from the dataset metadata]
    #[arg(long)]
    pub feature_order: Option<String>,
    /// Min-max scale each window
    #[arg(long)]
    pub normalize: Option<bool>,
    /// Per-feature standardization fit on the training partition
    #[arg(long)]
    pub standardize: Option<bool>,
    /// Expected sampling rate [default: from the dataset metadata]
    #[arg(long)]
    pub sample_rate: Option<f64>,
    /// Reject streams whose measured rate is off by more than 1%
    #[arg(long)]
    pub rate_check: Option<bool>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Output model file
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Per-epoch curves CSV [default: <model>.trace.csv]
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// [default: <model>.manifest]
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// mlp or lstm
    #[arg(long)]
    pub family: Option<String>,
    /// MLP hidden widths
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    /// LSTM unit count, 1 to 4
    #[arg(long)]
    pub units: Option<usize>,
    /// stacked or wide
    #[arg(long)]
    pub lstm_layout: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Metrics CSV [default: <model>.report.csv]
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// [default: <report>.manifest]
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Score every window instead of the recorded test partition
    #[arg(long)]
    pub all: bool,
    #[arg(long)]
    pub rate_check: Option<bool>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Stream CSV, labels optional
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Events CSV [default: <data>.events.csv]
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// [default: <events>.manifest]
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Shortest accepted hand-on-lip hold, seconds
    #[arg(long)]
    pub min_hol: Option<f64>,
    #[arg(long)]
    pub max_hol: Option<f64>,
    /// Longest run of other tokens allowed inside a puff
    #[arg(long)]
    pub noise_tolerance: Option<usize>,
    /// Puffs needed to form a session
    #[arg(long)]
    pub min_puffs: Option<usize>,
    /// Longest gap between puffs of one session, seconds
    #[arg(long)]
    pub max_gap: Option<f64>,
    /// inclusive or exclusive duration bounds
    #[arg(long)]
    pub bounds: Option<String>,
    #[arg(long)]
    pub rate_check: Option<bool>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Ranked results CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// [default: <out>.manifest]
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub epochs: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub batches: Option<Vec<usize>>,
    /// MLP hidden-layer counts, each using the default widths
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    /// LSTM unit counts
    #[arg(long, value_delimiter = ',')]
    pub units: Option<Vec<usize>>,
    #[arg(long)]
    pub lstm_layout: Option<String>,
    /// Parallel jobs, 0 for all cores
    #[arg(long)]
    pub jobs: Option<usize>,
}

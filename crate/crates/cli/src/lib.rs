//! Command-line front end: every toolkit operation as a subcommand.

mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use slr_core::{LandmarkSelector, TransferScope};

pub use config::{ExperimentConfig, TransferSource};
pub use error::{CliError, CliResult};

pub const DEFAULT_MLP_HIDDEN: usize = 256;
pub const DEFAULT_GRU_HIDDEN: usize = 512;

#[derive(Debug, Parser)]
#[command(
    name = "slr",
    version,
    about = "Keypoint-sequence sign recognition experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic keypoint dataset and its manifest
    Synth(SynthArgs),
    /// Drop frames where both pose wrists rest at or below the threshold
    Filter(FilterArgs),
    /// Assign manifest rows to train/test, stratified by label
    Split(SplitArgs),
    /// Train a model, optionally initialized from a source checkpoint
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split of a manifest
    Eval(EvalArgs),
    /// Train every (MLP, GRU) pair and report the best
    Grid(GridArgs),
    /// Build a target checkpoint from a source model's layers without training
    TransferInit(TransferInitArgs),
    /// Relative improvement of a transfer run over its baseline
    Report(ReportArgs),
    /// Hand-activity histogram of one concept
    Heatmap(HeatmapArgs),
    /// Correlation between two hand-activity histograms
    CompareHeatmaps(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON dataset spec; the flags below are ignored when given, except --seed
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value = "synth")]
    pub dataset_id: String,
    #[arg(long, default_value_t = 6)]
    pub classes: usize,
    #[arg(long, default_value_t = 20)]
    pub per_class: usize,
    #[arg(long, default_value_t = 12)]
    pub min_frames: usize,
    #[arg(long, default_value_t = 20)]
    pub max_frames: usize,
    /// Standard deviation of per-coordinate Gaussian noise
    #[arg(long, default_value_t = 0.01)]
    pub jitter: f64,
    #[arg(long, default_value_t = 25.0)]
    pub fps: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for the KPSEQ files, manifest.csv and spec.json
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// KPSEQ file to filter
    #[arg(long)]
    pub input: PathBuf,
    /// Keep frames whose higher pose wrist has y strictly below this
    #[arg(long, default_value_t = slr_core::data::DEFAULT_WRIST_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Experiment JSON; explicit flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory manifest paths are relative to [default: the manifest's directory]
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// MLP units [default: 256, or the source model's with --init-from]
    #[arg(long)]
    pub mlp: Option<usize>,
    /// GRU units [default: 512, or the source model's with --init-from]
    #[arg(long)]
    pub gru: Option<usize>,
    /// Adam learning rate [default: 1e-5]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Mini-batch size [default: 32]
    #[arg(long)]
    pub batch: Option<usize>,
    /// Epochs without a new best loss before stopping [default: 200]
    #[arg(long)]
    pub patience: Option<usize>,
    /// Hard epoch cap [default: none]
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Seed for initialization and shuffling [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Apply the wrist-height filter while loading
    #[arg(long)]
    pub filter_threshold: Option<f64>,
    /// Source checkpoint whose layers initialize the model
    #[arg(long)]
    pub init_from: Option<PathBuf>,
    /// Layers copied from --init-from: mlp or mlp-gru [default: mlp]
    #[arg(long)]
    pub transfer_scope: Option<TransferScope>,
    /// Skip per-epoch evaluation on the test split
    #[arg(long)]
    pub no_eval: bool,
    /// Output directory for model.slrm, history.csv, summary.json, metrics.json and config.json
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: slr_core::Split,
    #[arg(long)]
    pub filter_threshold: Option<f64>,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    /// Metrics JSON output
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Comma-separated MLPxGRU pairs [default: 256x512,512x1024,1024x2048,2000x3000,2048x4096]
    #[arg(long)]
    pub pairs: Option<String>,
    /// accuracy, macro_f1 or auto (accuracy when classes are balanced)
    #[arg(long, default_value = "auto")]
    pub metric: String,
    /// Pairs trained concurrently
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 200)]
    pub patience: usize,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub filter_threshold: Option<f64>,
    /// CSV report output
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransferInitArgs {
    #[arg(long)]
    pub source: PathBuf,
    /// Target manifest; its training labels define the output layer
    #[arg(long)]
    pub manifest: PathBuf,
    /// MLP units [default: the source model's]
    #[arg(long)]
    pub mlp: Option<usize>,
    /// GRU units [default: the source model's]
    #[arg(long)]
    pub gru: Option<usize>,
    #[arg(long, default_value = "mlp")]
    pub scope: TransferScope,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Metrics JSON of the model trained from scratch
    #[arg(long)]
    pub baseline: PathBuf,
    /// Metrics JSON of the transfer run
    #[arg(long)]
    pub tl: PathBuf,
    /// Field compared: accuracy or macro_f1
    #[arg(long, default_value = "accuracy")]
    pub metric: String,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub concept: String,
    /// Restrict to one split [default: every row]
    #[arg(long)]
    pub split: Option<slr_core::Split>,
    /// Cells per side
    #[arg(long, default_value_t = slr_core::heatmap::DEFAULT_GRID_SIZE)]
    pub grid: usize,
    /// wrists or hands
    #[arg(long, default_value = "wrists")]
    pub selector: LandmarkSelector,
    /// CSV grid output
    #[arg(long)]
    pub out: PathBuf,
    /// Optional 8-bit PGM rendering
    #[arg(long)]
    pub pgm: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// First grid CSV
    #[arg(long)]
    pub a: PathBuf,
    /// Second grid CSV
    #[arg(long)]
    pub b: PathBuf,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Filter(a) => commands::filter(a),
        Command::Split(a) => commands::split(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Grid(a) => commands::grid(a),
        Command::TransferInit(a) => commands::transfer_init(a),
        Command::Report(a) => commands::report(a),
        Command::Heatmap(a) => commands::heatmap(a),
        Command::CompareHeatmaps(a) => commands::compare_heatmaps(a),
    }
}

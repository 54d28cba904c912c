use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "life", version, about = "Local iterative feature extraction for tabular data")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one of the GAM/AIM/MIM datasets.
    GenData(GenDataArgs),
    /// Fit a LIFE model.
    Train(TrainArgs),
    /// Score a saved model on a dataset.
    Evaluate(ModelDataArgs),
    /// Accuracy/diversity decomposition of a saved model's base learners.
    Decompose(DecomposeArgs),
    /// Accuracy/diversity tradeoff over a grid of projection cutoffs.
    Sweep(SweepArgs),
    /// Drop redundant base learners from a saved model.
    Prune(PruneArgs),
    /// Export importance, local regions and effect curves of a saved model.
    Interpret(InterpretArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormArg {
    Gam,
    Aim,
    Mim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskArg {
    Regression,
    Classification,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistArg {
    Normal,
    Laplace,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerArg {
    Lla,
    Adam,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingArg {
    Nn,
    Random,
    Bootstrap,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationArg {
    /// Cross-validated elastic net.
    Cv,
    /// Plain least squares / logistic regression.
    None,
    /// Elastic net with fixed --l1 and --l2.
    Enet,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceArg {
    Mse,
    Probability,
    LogOdds,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightsArg {
    Uniform,
    Stacked,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenDataArgs {
    #[arg(long, value_enum)]
    pub form: FormArg,
    #[arg(long, value_enum, default_value = "regression")]
    pub task: TaskArg,
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "normal")]
    pub dist: DistArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    pub target: String,
    /// Columns to one-hot encode (non-numeric columns are detected anyway).
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LifeArgs {
    /// Inferred from the target when omitted: 0/1 targets are classification.
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    /// Hidden units per iteration; the length sets the number of iterations.
    #[arg(long, value_delimiter = ',', default_value = "8,16")]
    pub hidden: Vec<usize>,
    #[arg(long, value_enum, default_value = "lla")]
    pub optimizer: OptimizerArg,
    /// LLA iteration cap or Adam epochs.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long, value_enum, default_value = "nn")]
    pub sampling: SamplingArg,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub cp: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lower: f64,
    #[arg(long, default_value_t = 0.9)]
    pub upper: f64,
    #[arg(long, value_enum, default_value = "cv")]
    pub aggregation: AggregationArg,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0.0)]
    pub l1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    #[arg(long)]
    pub no_standardize: bool,
    /// Overridden by the LIFE_SEED environment variable.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub life: LifeArgs,
    /// Share of rows held out for testing; 0 trains on everything.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// Pick cp and layer widths by 5-fold cross-validation on a small grid.
    #[arg(long)]
    pub grid: bool,
    /// Rerun from a config.json written by an earlier run; other flags except --out are ignored.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelDataArgs {
    /// model.json written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub io: ModelDataArgs,
    /// Default: mse for regression, probability for classification.
    #[arg(long, value_enum)]
    pub space: Option<SpaceArg>,
    #[arg(long, value_enum, default_value = "stacked")]
    pub weights: WeightsArg,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub life: LifeArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,-0.5,-0.25,0,0.25,0.5,1")]
    pub cps: Vec<f64>,
    #[arg(long, value_enum, default_value = "stacked")]
    pub weights: WeightsArg,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PruneArgs {
    #[command(flatten)]
    pub io: ModelDataArgs,
    /// Fraction of base learners to keep.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    /// Rank learners once instead of recomputing after each removal.
    #[arg(long)]
    pub one_shot: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InterpretArgs {
    #[command(flatten)]
    pub io: ModelDataArgs,
    /// Regions with at most this many rows go to the overflow bucket.
    #[arg(long, default_value_t = 3)]
    pub region_tau: usize,
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
    /// Histogram bins for density weights and ALE.
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
}

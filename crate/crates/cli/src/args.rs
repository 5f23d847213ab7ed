use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "cwr", version, about = "Covariate-distance weighted regression toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset with known coefficients
    Synth(SynthArgs),
    /// Rank predictors by boosted-tree importance
    Importance(ImportanceArgs),
    /// Train one model on the training partition and save it
    Fit(FitArgs),
    /// Score a query file with a saved model
    Predict(PredictArgs),
    /// Run every model on one dataset, or on each case of a manifest
    Compare(CompareArgs),
    /// Export a prediction lattice and test residuals as CSV
    Map(MapArgs),
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Dataset CSV
    #[arg(long)]
    pub data: PathBuf,
    /// Schema JSON naming the columns and their roles
    #[arg(long)]
    pub schema: PathBuf,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SplitArgs {
    /// Split seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training share of the records [default: 0.8]
    #[arg(long = "train-frac")]
    pub train_frac: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictModeArg {
    KnnCoef,
    LocalFit,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// Blend ratio for CWR: a number in [0, 1] or `search`
    #[arg(long = "r")]
    pub rate: Option<String>,
    /// Kernel bandwidth in normalized distance units, or `cv`
    #[arg(long)]
    pub bandwidth: Option<String>,
    /// Neighbours averaged by knn-coef prediction [default: 3]
    #[arg(long)]
    pub knn: Option<usize>,
    #[arg(long = "predict-mode", value_enum)]
    pub predict_mode: Option<PredictModeArg>,
    /// Score ratio candidates by in-sample RMSE instead of leave-one-out
    #[arg(long = "strict-paper-scoring")]
    pub strict_paper_scoring: bool,
    /// Regression covariates, comma-separated
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Columns entering the attribute distance, comma-separated
    #[arg(long, value_delimiter = ',')]
    pub attributes: Option<Vec<String>>,
    /// Choose this many regression covariates by importance first
    #[arg(long = "select-factors")]
    pub select_factors: Option<usize>,
    /// Boosting stages
    #[arg(long)]
    pub stages: Option<usize>,
    /// Keep coordinates out of the boosted trees' features
    #[arg(long = "boost-without-coordinates")]
    pub boost_without_coordinates: bool,
    /// Comparison config JSON; flags given on the command line override it
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Synthetic config JSON; flags override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// geo, attr or mixed
    #[arg(long)]
    pub regime: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Noise standard deviation
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the schema [default: next to the CSV]
    #[arg(long = "schema-out")]
    pub schema_out: Option<PathBuf>,
    /// Optional CSV of true coefficients per record
    #[arg(long = "truth-out")]
    pub truth_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ImportanceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Candidate predictors, comma-separated [default: all covariates]
    #[arg(long, value_delimiter = ',')]
    pub candidates: Option<Vec<String>>,
    #[arg(long = "top-k", default_value_t = 2)]
    pub top_k: usize,
    #[arg(long)]
    pub stages: Option<usize>,
    /// Importance CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// ols, gwr, cwr or lsboost
    #[arg(long)]
    pub model: String,
    #[command(flatten)]
    pub model_args: ModelArgs,
    /// Model JSON
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Model JSON written by `fit`
    #[arg(long = "model-file")]
    pub model_file: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Predictions CSV [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Batch manifest JSON listing named cases
    #[arg(long, conflicts_with_all = ["data", "schema"])]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Models to run, comma-separated [default: all]
    #[arg(long, value_delimiter = ',')]
    pub model: Option<Vec<String>>,
    #[command(flatten)]
    pub model_args: ModelArgs,
    /// Record per-model fit times in the report
    #[arg(long)]
    pub timings: bool,
    /// Directory for per-model residual CSVs
    #[arg(long = "residuals-dir")]
    pub residuals_dir: Option<PathBuf>,
    /// Batch summary CSV
    #[arg(long = "summary-csv")]
    pub summary_csv: Option<PathBuf>,
    /// Report JSON [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MapArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Model to fit on the training partition
    #[arg(long, required_unless_present = "model_file")]
    pub model: Option<String>,
    /// Use a saved model instead of fitting one
    #[arg(long = "model-file", conflicts_with = "model")]
    pub model_file: Option<PathBuf>,
    #[command(flatten)]
    pub model_args: ModelArgs,
    /// Lattice cells as NUxNV
    #[arg(long, default_value = "50x50")]
    pub grid: String,
    /// Covariates at lattice points as name=value pairs [default: training medians]
    #[arg(long, value_delimiter = ',')]
    pub query: Option<Vec<String>>,
    /// Output directory for grid.csv and residuals.csv
    #[arg(long)]
    pub out: PathBuf,
}

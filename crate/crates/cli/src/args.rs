use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "clusterkr",
    version,
    about = "Kernel regression, bandwidth selection and confidence intervals for clustered data",
    args_override_self = true
)]
pub struct Cli {
    /// File of `key = value` lines supplying flags of the subcommand; flags
    /// given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Output file (default: standard output).
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Kernel density estimate of the regressors.
    Density(DensityArgs),
    /// Nadaraya-Watson or local linear regression estimates.
    Fit(FitArgs),
    /// Bandwidth selection.
    Bandwidth(BandwidthArgs),
    /// Estimates with iid, cluster-robust and lambda-adjusted intervals.
    Infer(InferArgs),
    /// Monte Carlo experiments on the simulated designs.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV file with a header row.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    #[arg(long, value_name = "NAME")]
    pub cluster_col: String,
    /// Individual-level regressor columns.
    #[arg(long, value_name = "A,B,...", value_delimiter = ',', required = true)]
    pub x_cols: Vec<String>,
    /// Regressor columns that are constant within each cluster.
    #[arg(long, value_name = "C,...", value_delimiter = ',')]
    pub cluster_level_cols: Vec<String>,
    #[arg(long, default_value = "epanechnikov")]
    pub kernel: String,
}

#[derive(Debug, Args)]
pub struct PointArgs {
    /// Evenly spaced grid `lo:hi:n` on a single regressor.
    #[arg(long, value_name = "LO:HI:N", conflicts_with_all = ["at", "at_data"], allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Evaluation points; coordinates separated by ',' and points by ';'.
    #[arg(long, value_name = "POINTS", conflicts_with = "at_data", allow_hyphen_values = true)]
    pub at: Option<String>,
    /// Evaluate at every observed regressor row.
    #[arg(long)]
    pub at_data: bool,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    /// Lower corner of the weight window (default: smallest observed value).
    #[arg(long, value_name = "LO,...", value_delimiter = ',', allow_hyphen_values = true)]
    pub weight_lo: Vec<f64>,
    /// Upper corner of the weight window (default: largest observed value).
    #[arg(long, value_name = "HI,...", value_delimiter = ',', allow_hyphen_values = true)]
    pub weight_hi: Vec<f64>,
    /// Candidates in the cross-validation grid.
    #[arg(long, default_value_t = 50)]
    pub grid_n: usize,
    /// Grid range as multiples of its centre.
    #[arg(long, value_name = "LO,HI", value_delimiter = ',', num_args = 2, default_values_t = [1.0 / 3.0, 3.0])]
    pub grid_span: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub points: PointArgs,
    /// Bandwidth, or `reference` for the normal-reference rule.
    #[arg(long, default_value = "reference")]
    pub h: String,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub y_col: String,
    #[command(flatten)]
    pub points: PointArgs,
    #[arg(long, default_value = "ll")]
    pub estimator: String,
    /// Bandwidth, or `auto` for cluster-robust cross-validation.
    #[arg(long)]
    pub h: String,
    #[command(flatten)]
    pub window: WindowArgs,
}

#[derive(Debug, Args)]
pub struct BandwidthArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub y_col: String,
    /// rot, cr-rot, cv, cr-cv or reference.
    #[arg(long, default_value = "cr-cv")]
    pub method: String,
    #[arg(long, default_value = "ll")]
    pub estimator: String,
    /// Centre of the cross-validation grid (default: the CR-ROT bandwidth).
    #[arg(long)]
    pub grid_center: Option<f64>,
    #[command(flatten)]
    pub window: WindowArgs,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub y_col: String,
    #[command(flatten)]
    pub points: PointArgs,
    #[arg(long, default_value = "ll")]
    pub estimator: String,
    /// Regression bandwidth, or `auto` for cluster-robust cross-validation.
    #[arg(long, default_value = "auto")]
    pub h_m: String,
    /// Shrink the regression bandwidth by `n^{1/5 - 2/7}`.
    #[arg(long)]
    pub undersmooth: bool,
    /// Density bandwidth, or `reference`.
    #[arg(long, default_value = "reference")]
    pub h_f: String,
    /// Bandwidth for the residual variances (default: the density bandwidth).
    #[arg(long)]
    pub h_sigma2: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = CovArg::Parametric)]
    pub cov_method: CovArg,
    /// Pair bandwidth for the nonparametric covariance term (default: h_f).
    #[arg(long)]
    pub cov_b: Option<f64>,
    /// Also write plot data (x, estimate, interval bounds) to this CSV file.
    #[arg(long, value_name = "FILE")]
    pub plot_data: Option<PathBuf>,
    /// Also draw the bands as an SVG line chart.
    #[arg(long, value_name = "FILE")]
    pub svg: Option<PathBuf>,
    #[command(flatten)]
    pub window: WindowArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CovArg {
    Parametric,
    Nonparametric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Ase,
    Coverage,
    CvDecomposition,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = Experiment::Ase)]
    pub experiment: Experiment,
    #[arg(long, default_value = "1")]
    pub setup: String,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Number of clusters.
    #[arg(long = "G", default_value_t = 100)]
    pub clusters: usize,
    /// Size of all but the last cluster.
    #[arg(long, default_value_t = 20)]
    pub ng: usize,
    /// Size of the last cluster (default: same as --ng).
    #[arg(long)]
    pub ng_last: Option<usize>,
    /// Within-cluster correlations of the regressor; one table row per pair.
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    pub rho_x: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    pub rho_e: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "ll")]
    pub estimator: String,
    #[arg(long, default_value = "epanechnikov")]
    pub kernel: String,
    /// Selectors for the ASE table.
    #[arg(long, value_delimiter = ',', default_value = "rot,cr-rot,cv,cr-cv")]
    pub methods: Vec<String>,
    /// Interval variants for the coverage table.
    #[arg(long, value_delimiter = ',', default_value = "iid,cr,lambda")]
    pub variants: Vec<String>,
    #[arg(long, default_value_t = 0.75, allow_hyphen_values = true)]
    pub x_eval: f64,
    /// undersmooth, infeasible-correct or ignore.
    #[arg(long, default_value = "undersmooth")]
    pub bias_mode: String,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = CovArg::Parametric)]
    pub cov_method: CovArg,
    /// Fixed bandwidth for the cross-validation decomposition.
    #[arg(long, default_value_t = 0.4)]
    pub h: f64,
    #[arg(long, default_value_t = 50)]
    pub grid_n: usize,
    /// Drop failed replications instead of stopping.
    #[arg(long)]
    pub skip_failures: bool,
}

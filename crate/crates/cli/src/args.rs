use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "reachcare",
    version,
    about = "Spatial accessibility of primary care: assignment solves, policy sweeps, Monte Carlo and spatial inference",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum Command {
    /// Generate a synthetic scenario (tracts, physicians, distances, hospitals).
    Synth(SynthArgs),
    /// Solve the assignment model and write flows and accessibility measures.
    Solve(SolveArgs),
    /// Solve a grid of policy transforms and keep the Pareto set.
    Sweep(SweepArgs),
    /// Summarize measures over random Medicaid-acceptance realizations.
    Montecarlo(MonteCarloArgs),
    /// Space-varying coefficient inference on a measure.
    Infer(InferArgs),
    /// Summarize a finished run and check its digests.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// TOML file whose keys mirror the long flags (`n_boot = 400`); flags win.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, short, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

/// Where the scenario comes from and which parameters apply.
#[derive(Debug, Args, Serialize)]
pub struct ScenarioArgs {
    /// Directory holding tracts.csv, physicians.csv and optionally distances.csv.
    #[arg(long, value_name = "DIR")]
    pub scenario: Option<PathBuf>,
    /// tracts.csv (overrides the one in --scenario).
    #[arg(long, value_name = "FILE")]
    pub tracts: Option<PathBuf>,
    /// physicians.csv (overrides the one in --scenario).
    #[arg(long, value_name = "FILE")]
    pub physicians: Option<PathBuf>,
    /// distances.csv; without one, great-circle distances pruned at mi_max are used.
    #[arg(long, value_name = "FILE")]
    pub distances: Option<PathBuf>,
    /// Ignore distances.csv in --scenario and use great-circle distances.
    #[arg(long)]
    pub great_circle: bool,
    /// TOML parameter file (mi_max, mi_max_limited, pc, lc, cc, coverage).
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    /// Maximum travel distance in miles.
    #[arg(long)]
    pub mi_max: Option<f64>,
    /// Distance beyond which families without cars cannot travel.
    #[arg(long)]
    pub mi_max_limited: Option<f64>,
    /// Patient capacity per physician.
    #[arg(long)]
    pub pc: Option<f64>,
    /// Minimum load as a fraction of capacity.
    #[arg(long)]
    pub lc: Option<f64>,
    /// Maximum congestion as a fraction of capacity.
    #[arg(long)]
    pub cc: Option<f64>,
    /// `max` (maximize coverage, then minimize distance) or `fixed:<fraction>`.
    #[arg(long, value_name = "MODE")]
    pub coverage: Option<String>,
    /// LP backend.
    #[arg(long, value_enum, default_value_t = BackendArg::Network)]
    pub backend: BackendArg,
    /// Shuffle the arc order entering the solver.
    #[arg(long)]
    pub arc_order_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendArg {
    Network,
    Simplex,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// uniform or georgia-like.
    #[arg(long, default_value = "georgia-like")]
    pub profile: String,
    #[arg(long, default_value_t = 300)]
    pub tracts: usize,
    /// Defaults to 1.25 per tract.
    #[arg(long)]
    pub physicians: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Also write the assignment LP in text form.
    #[arg(long, value_name = "FILE")]
    pub dump_lp: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Transform kinds (mobility, pam-threshold, mc-threshold, pam-scale, mc-scale).
    #[arg(long, value_delimiter = ',', required = true)]
    pub kind: Vec<String>,
    /// `lo:step:hi` or a comma list; defaults to each kind's own grid.
    #[arg(long)]
    pub grid: Option<String>,
    /// Relative tolerance of the Pareto filter.
    #[arg(long, default_value_t = reachcare::policy::DEFAULT_PARETO_EPSILON)]
    pub epsilon: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct MonteCarloArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 100)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    /// Fit the response on the covariates.
    Model,
    /// Where does the response differ from --other?
    Difference,
    /// Where does the response differ from --mu0?
    Location,
}

#[derive(Debug, Args, Serialize)]
pub struct InferArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// measures.csv from an earlier solve; without it the scenario is solved.
    #[arg(long, value_name = "FILE")]
    pub measures: Option<PathBuf>,
    /// `<measure>_<scope>`, measure in coverage|tc|cg, scope in medicaid|other|overall.
    #[arg(long)]
    pub response: String,
    #[arg(long, value_enum, default_value_t = TestKind::Model)]
    pub test: TestKind,
    /// Tract covariates for --test model.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Candidate subsets to compare, `a,b,c,d;a,b,c,e`.
    #[arg(long)]
    pub candidates: Option<String>,
    /// Second measure for --test difference.
    #[arg(long)]
    pub other: Option<String>,
    /// Threshold for --test location; defaults to the population-weighted mean.
    #[arg(long, allow_negative_numbers = true)]
    pub mu0: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 200)]
    pub n_boot: usize,
    /// Basis functions per dimension.
    #[arg(long, default_value_t = 10)]
    pub basis_size: usize,
    /// tensor-b-spline or thin-plate.
    #[arg(long, default_value = "tensor-b-spline")]
    pub basis: String,
    #[arg(long, default_value_t = 200)]
    pub max_cycles: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Run directory containing manifest.json.
    #[arg(long, value_name = "DIR")]
    pub run: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
}

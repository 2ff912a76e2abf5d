use std::path::PathBuf;
use std::str::FromStr;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use prodtraj::authorship::{DEFAULT_ALPHA_LEVEL, DEFAULT_MC_DRAWS, DEFAULT_RATIO_THRESHOLD};
use prodtraj::classify::{MedianWindow, DEFAULT_TSTAR_CAP};
use prodtraj::ingest::DEFAULT_CENSUS_YEAR;
use prodtraj::inequality::DEFAULT_WINDOW_YEARS;
use prodtraj::perturb::{DEFAULT_SIGMA, DEFAULT_STABILITY_THRESHOLD, DEFAULT_TRIALS};
use serde::Serialize;

/// Research productivity trajectories: calibration, change-point fits,
/// stability, classification, inequality and authorship tables.
#[derive(Debug, Parser)]
#[command(name = "prodtraj", version, about, args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Fit the coverage form from benchmark pairs and write an adjustment model
    Calibrate(CalibrateArgs),
    /// Fit line and piecewise trends to every eligible career
    Fit(FitArgs),
    /// Score line against piecewise under one or all criteria
    Select(SelectArgs),
    /// Classify fitted trajectories and tabulate change points
    Classify(ClassifyArgs),
    /// Quadrant stability under publication-date noise
    Stability(StabilityArgs),
    /// Pooled distribution of noise-added nonlinear fits
    Ensemble(EnsembleArgs),
    /// Gini coefficients and Lorenz curves by hire decade
    Gini(GiniArgs),
    /// Alphabetized venues and first/last-author role curves
    Authorship(AuthorshipArgs),
    /// Mean productivity curves by prestige stratum, plus peak years
    Curves(CurvesArgs),
    /// Median per-person output by institution
    Medians(MediansArgs),
    /// Generate a synthetic cohort with known trajectories
    Simulate(SimulateArgs),
    /// Compose a summary from the tables already in a directory
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Calibrate(_) => "calibrate",
            Command::Fit(_) => "fit",
            Command::Select(_) => "select",
            Command::Classify(_) => "classify",
            Command::Stability(_) => "stability",
            Command::Ensemble(_) => "ensemble",
            Command::Gini(_) => "gini",
            Command::Authorship(_) => "authorship",
            Command::Curves(_) => "curves",
            Command::Medians(_) => "medians",
            Command::Simulate(_) => "simulate",
            Command::Report(_) => "report",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Calibrate(a) => &a.common,
            Command::Fit(a) => &a.common,
            Command::Select(a) => &a.common,
            Command::Classify(a) => &a.common,
            Command::Stability(a) => &a.common,
            Command::Ensemble(a) => &a.common,
            Command::Gini(a) => &a.common,
            Command::Authorship(a) => &a.common,
            Command::Curves(a) => &a.common,
            Command::Medians(a) => &a.common,
            Command::Simulate(a) => &a.common,
            Command::Report(a) => &a.common,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Directory for output tables and run metadata (default: the current
    /// directory, or `--in-dir` for `report`)
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Flat JSON object of flag values; flags on the command line win
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads (results do not depend on it)
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CorpusArgs {
    /// Faculty records (JSON Lines, or CSV by extension)
    #[arg(long)]
    pub faculty: PathBuf,
    /// Publication records (JSON Lines, or CSV by extension)
    #[arg(long)]
    pub pubs: PathBuf,
    /// Last calendar year of every career series
    #[arg(long, default_value_t = DEFAULT_CENSUS_YEAR)]
    pub census_year: i32,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Adjustment model JSON (defaults to the published coefficients)
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Year whose counts the growth correction leaves unchanged
    #[arg(long)]
    pub reference_year: Option<i32>,
    /// Divide the growth form by its reference-year value
    #[arg(long, action = ArgAction::Set)]
    pub normalize_growth: Option<bool>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NoiseArgs {
    /// Seed for the date-noise streams; generated and recorded when absent
    #[arg(long)]
    pub seed: Option<u64>,
    /// Standard deviation of the Gaussian year noise
    #[arg(long, default_value_t = DEFAULT_SIGMA)]
    pub sigma: f64,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionArg {
    Aic,
    Aicc,
    Bic,
}

impl From<CriterionArg> for prodtraj::Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Aic => prodtraj::Criterion::Aic,
            CriterionArg::Aicc => prodtraj::Criterion::Aicc,
            CriterionArg::Bic => prodtraj::Criterion::Bic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Poisson,
    Negbin,
}

impl From<FamilyArg> for prodtraj::countmodels::CountFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Poisson => Self::Poisson,
            FamilyArg::Negbin => Self::Negbin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowArg {
    FirstDecade,
    Lifetime,
}

impl From<WindowArg> for MedianWindow {
    fn from(w: WindowArg) -> Self {
        match w {
            WindowArg::FirstDecade => MedianWindow::FirstDecade,
            WindowArg::Lifetime => MedianWindow::Lifetime,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Auto,
    Exact,
    MonteCarlo,
}

/// Increasing cumulative fractions in (0, 1), comma separated.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Edges(pub Vec<f64>);

impl FromStr for Edges {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Edges(Vec::new()));
        }
        let edges = s
            .split(',')
            .map(|e| e.trim().parse::<f64>().map_err(|_| format!("bad edge `{e}`")))
            .collect::<Result<Vec<_>, _>>()?;
        if edges.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err("edges must lie strictly between 0 and 1".into());
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err("edges must be strictly increasing".into());
        }
        Ok(Edges(edges))
    }
}

/// Career years counted as production, or the whole career.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum WindowYears {
    Years(usize),
    #[serde(serialize_with = "lifetime")]
    Lifetime,
}

fn lifetime<S: serde::Serializer>(s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str("lifetime")
}

impl WindowYears {
    pub fn get(self) -> Option<usize> {
        match self {
            WindowYears::Years(n) => Some(n),
            WindowYears::Lifetime => None,
        }
    }
}

impl FromStr for WindowYears {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("lifetime") {
            return Ok(WindowYears::Lifetime);
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("expected a positive year count or `lifetime`, got `{s}`")),
            Ok(n) => Ok(WindowYears::Years(n)),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CalibrateArgs {
    /// Benchmark pairs CSV with columns year, dblp_count, cv_count
    #[arg(long)]
    pub benchmarks: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = CriterionArg::Aicc)]
    pub criterion: CriterionArg,
    /// Also fit a count likelihood to the raw counts
    #[arg(long, value_enum)]
    pub count_family: Option<FamilyArg>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SelectArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Only this criterion (default: all three)
    #[arg(long, value_enum)]
    pub criterion: Option<CriterionArg>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClassifyArgs {
    /// fits.csv written by `fit`
    #[arg(long)]
    pub fits: PathBuf,
    /// stability.csv written by `stability`; without it every career counts as stable
    #[arg(long)]
    pub stability: Option<PathBuf>,
    /// truth.csv written by `simulate`, for a recovery report
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Latest change point still counted as canonical (`inf` disables)
    #[arg(long, default_value_t = DEFAULT_TSTAR_CAP)]
    pub tstar_cap: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Modal-quadrant share needed to call a career stable
    #[arg(long, default_value_t = DEFAULT_STABILITY_THRESHOLD)]
    pub stability_threshold: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long, value_enum, default_value_t = CriterionArg::Aicc)]
    pub criterion: CriterionArg,
    #[arg(long, default_value_t = DEFAULT_TSTAR_CAP)]
    pub tstar_cap: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GiniArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Early-career years counted as production, or `lifetime`
    #[arg(long, default_value_t = WindowYears::Years(DEFAULT_WINDOW_YEARS))]
    pub window_years: WindowYears,
    #[command(flatten)]
    pub common: CommonArgs,
}

impl std::fmt::Display for WindowYears {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WindowYears::Years(n) => write!(f, "{n}"),
            WindowYears::Lifetime => f.write_str("lifetime"),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AuthorshipArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Significance level of the per-venue test
    #[arg(long, default_value_t = DEFAULT_ALPHA_LEVEL)]
    pub alpha_level: f64,
    /// Minimum observed/expected alphabetized ratio for a flag
    #[arg(long, default_value_t = DEFAULT_RATIO_THRESHOLD)]
    pub ratio_threshold: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = DEFAULT_MC_DRAWS)]
    pub mc_draws: usize,
    /// Seed for Monte-Carlo tails; generated and recorded when absent
    #[arg(long)]
    pub seed: Option<u64>,
    /// Prestige stratum edges as cumulative faculty shares
    #[arg(long, default_value = "0.2,0.4,0.6,0.8")]
    pub strata: Edges,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CurvesArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "0.2,0.4,0.6,0.8")]
    pub strata: Edges,
    /// Careers shorter than this are left out of the peak-year tables
    #[arg(long, default_value_t = 10)]
    pub peak_min_career: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MediansArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = WindowArg::FirstDecade)]
    pub window: WindowArg,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Full generator spec as JSON; the flags below override its fields
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub n_faculty: Option<usize>,
    /// Generated and recorded when absent
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub census_year: Option<i32>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    /// Directory holding tables from earlier runs
    #[arg(long)]
    pub in_dir: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

//! Continuous two-segment linear model of a career, fitted by least squares.
//!
//! The model is
//!
//! ```text
//! f(t) = b + m1 * t                       for t <= t*
//! f(t) = b + m1 * t* + m2 * (t - t*)      for t >  t*
//! ```
//!
//! For a fixed change point the three linear parameters come from a 3x3
//! normal-equation system. The change point itself is located by a grid
//! search at 0.1 career years followed by repeated tenfold local
//! refinement around the best candidate, and finally snapped to the exact
//! optimum of the winning segment partition when that lies inside it.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::CareerSeries;

/// Distance kept between the change point and the first/last observation.
/// With integer career years this leaves at least two points per segment.
pub const TSTAR_MARGIN: f64 = 1.05;
pub const COARSE_STEP: f64 = 0.1;
/// Tenfold refinements after the coarse pass; the final step is 1e-8.
pub const REFINE_ROUNDS: u32 = 7;
/// Candidates on each side of the incumbent during a refinement round.
const REFINE_HALF_WIDTH: i64 = 10;
/// Normal matrices whose smallest/largest eigenvalue ratio falls below this
/// are rejected as singular.
const SINGULAR_EIGEN_RATIO: f64 = 1e-13;
/// Residual sums at or below this fraction of the data's sum of squares are
/// treated as exact fits during model selection.
pub const EXACT_FIT_RELATIVE_SSE: f64 = 1e-24;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} observations, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("all observation times are identical")]
    ConstantTime,
    #[error("change point {0} leaves a segment empty")]
    EmptySegment(f64),
    #[error("normal equations are singular at change point {0}")]
    Singular(f64),
    #[error("no admissible change point in [{lo}, {hi}]")]
    NoAdmissibleWindow { lo: f64, hi: f64 },
    #[error("criterion {criterion:?} undefined for n={n}, k={k}")]
    UndefinedCriterion {
        criterion: Criterion,
        n: usize,
        k: usize,
    },
    #[error("negative sum of squares {0}")]
    NegativeSse(f64),
}

/// Slopes, intercept and change point of the two-segment model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub m1: f64,
    pub m2: f64,
    pub b: f64,
    pub t_star: f64,
}

impl Theta {
    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.t_star {
            self.b + self.m1 * t
        } else {
            self.b + self.m1 * self.t_star + self.m2 * (t - self.t_star)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseParams {
    pub m1: f64,
    pub m2: f64,
    pub b: f64,
    pub t_star: f64,
    /// Sum of squared residuals (no 1/2 factor).
    pub sse: f64,
}

impl PiecewiseParams {
    pub fn theta(&self) -> Theta {
        Theta {
            m1: self.m1,
            m2: self.m2,
            b: self.b,
            t_star: self.t_star,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.theta().eval(t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineParams {
    pub slope: f64,
    pub intercept: f64,
    pub sse: f64,
}

impl LineParams {
    pub fn eval(&self, t: f64) -> f64 {
        self.intercept + self.slope * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[serde(rename = "aic", alias = "AIC")]
    Aic,
    #[serde(rename = "aicc", alias = "AICc")]
    Aicc,
    #[serde(rename = "bic", alias = "BIC")]
    Bic,
}

impl Criterion {
    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Aic => "aic",
            Criterion::Aicc => "aicc",
            Criterion::Bic => "bic",
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "aic" => Ok(Criterion::Aic),
            "aicc" => Ok(Criterion::Aicc),
            "bic" => Ok(Criterion::Bic),
            other => Err(format!("unknown criterion `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Line,
    Piecewise,
}

impl ModelChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelChoice::Line => "line",
            ModelChoice::Piecewise => "piecewise",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub criterion: Criterion,
    pub score_line: f64,
    pub score_piecewise: f64,
    pub chosen: ModelChoice,
}

/// Parameter counts used by the criteria.
pub const K_LINE: usize = 2;
pub const K_PIECEWISE: usize = 4;

#[inline]
fn regressors(t: f64, t_star: f64) -> (f64, f64) {
    if t < t_star {
        (t, 0.0)
    } else {
        (t_star, t - t_star)
    }
}

/// Sum of squared residuals of `theta` against the observations.
pub fn sse_of(ts: &[f64], ys: &[f64], theta: &Theta) -> f64 {
    ts.iter()
        .zip(ys)
        .map(|(&t, &y)| (y - theta.eval(t)).powi(2))
        .sum()
}

/// Optimal `(m1, m2, b)` for a fixed change point, from the normal equations.
pub fn solve_fixed_tstar_points(
    ts: &[f64],
    ys: &[f64],
    t_star: f64,
) -> Result<PiecewiseParams, FitError> {
    debug_assert_eq!(ts.len(), ys.len());
    let before = ts.iter().filter(|&&t| t < t_star).count();
    if before == 0 || before == ts.len() {
        return Err(FitError::EmptySegment(t_star));
    }
    let mut a = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for (&t, &y) in ts.iter().zip(ys) {
        let (x1, x2) = regressors(t, t_star);
        let x = Vector3::new(x1, x2, 1.0);
        a += x * x.transpose();
        rhs += x * y;
    }
    let eig = a.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo.is_finite() && hi > 0.0) || lo <= SINGULAR_EIGEN_RATIO * hi {
        return Err(FitError::Singular(t_star));
    }
    let sol = a.lu().solve(&rhs).ok_or(FitError::Singular(t_star))?;
    let theta = Theta {
        m1: sol[0],
        m2: sol[1],
        b: sol[2],
        t_star,
    };
    Ok(PiecewiseParams {
        m1: theta.m1,
        m2: theta.m2,
        b: theta.b,
        t_star,
        sse: sse_of(ts, ys, &theta),
    })
}

pub fn solve_fixed_tstar(series: &CareerSeries, t_star: f64) -> Result<PiecewiseParams, FitError> {
    let (ts, ys) = split_points(series);
    solve_fixed_tstar_points(&ts, &ys, t_star)
}

pub(crate) fn split_points(series: &CareerSeries) -> (Vec<f64>, Vec<f64>) {
    series.points().unzip()
}

/// Inclusive change-point window for observations spanning `[t_min, t_max]`.
pub fn admissible_window(ts: &[f64]) -> Option<(f64, f64)> {
    let (lo, hi) = ts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| {
        (lo.min(t), hi.max(t))
    });
    if !lo.is_finite() {
        return None;
    }
    Some((lo + TSTAR_MARGIN, hi - TSTAR_MARGIN))
}

/// Coarse grid on multiples of [`COARSE_STEP`] inside the window. A window
/// narrower than one step yields its lower edge alone.
pub fn coarse_grid(lo: f64, hi: f64) -> Vec<f64> {
    if lo > hi {
        return Vec::new();
    }
    let first = (lo / COARSE_STEP - 1e-9).ceil() as i64;
    let last = (hi / COARSE_STEP + 1e-9).floor() as i64;
    let grid: Vec<f64> = (first..=last)
        .map(|k| k as f64 * COARSE_STEP)
        .filter(|&t| t >= lo - 1e-12 && t <= hi + 1e-12)
        .collect();
    if grid.is_empty() {
        vec![lo]
    } else {
        grid
    }
}

/// One-dimensional search for the `t*` minimizing `objective`, where lower
/// is better and `None` marks an infeasible candidate. Strict improvement is
/// required to replace the incumbent, so ties keep the smaller `t*` within
/// a pass; across passes an equal score at a smaller `t*` also wins.
pub fn refine_tstar<T, F>(lo: f64, hi: f64, mut objective: F) -> Option<(f64, f64, T)>
where
    F: FnMut(f64) -> Option<(f64, T)>,
{
    let mut best: Option<(f64, f64, T)> = None;
    let mut consider = |t: f64, best: &mut Option<(f64, f64, T)>| {
        if let Some((score, payload)) = objective(t) {
            if !score.is_finite() && score != f64::NEG_INFINITY {
                return;
            }
            let better = match best {
                None => true,
                Some((bt, bs, _)) => score < *bs || (score == *bs && t < *bt),
            };
            if better {
                *best = Some((t, score, payload));
            }
        }
    };
    for t in coarse_grid(lo, hi) {
        consider(t, &mut best);
    }
    let mut step = COARSE_STEP;
    for _ in 0..REFINE_ROUNDS {
        let Some((center, _, _)) = best.as_ref() else {
            break;
        };
        let center = *center;
        step /= 10.0;
        for j in -REFINE_HALF_WIDTH..=REFINE_HALF_WIDTH {
            if j == 0 {
                continue;
            }
            let t = center + j as f64 * step;
            if t < lo || t > hi {
                continue;
            }
            consider(t, &mut best);
        }
    }
    best
}

/// Least-squares fit of the two-segment model over observation pairs.
pub fn fit_piecewise_points(ts: &[f64], ys: &[f64]) -> Result<PiecewiseParams, FitError> {
    if ts.len() < 4 {
        return Err(FitError::TooFewPoints {
            needed: 4,
            got: ts.len(),
        });
    }
    let (lo, hi) = admissible_window(ts).ok_or(FitError::TooFewPoints { needed: 4, got: 0 })?;
    if lo > hi {
        return Err(FitError::NoAdmissibleWindow { lo, hi });
    }
    let (_, _, best) = refine_tstar(lo, hi, |t| {
        solve_fixed_tstar_points(ts, ys, t)
            .ok()
            .map(|p| (p.sse, p))
    })
    .ok_or(FitError::NoAdmissibleWindow { lo, hi })?;
    Ok(polish_tstar(ts, ys, best, lo, hi))
}

/// Within the segment partition of `best`, the unconstrained optimum is the
/// intersection of the two per-segment OLS lines. Take it when it lies in
/// the partition's interval and does not raise the SSE.
fn polish_tstar(
    ts: &[f64],
    ys: &[f64],
    best: PiecewiseParams,
    lo: f64,
    hi: f64,
) -> PiecewiseParams {
    let t_star = best.t_star;
    let mut left = f64::NEG_INFINITY;
    let mut right = f64::INFINITY;
    let (mut seg1_t, mut seg1_y, mut seg2_t, mut seg2_y) = (vec![], vec![], vec![], vec![]);
    for (&t, &y) in ts.iter().zip(ys) {
        if t < t_star {
            left = left.max(t);
            seg1_t.push(t);
            seg1_y.push(y);
        } else {
            right = right.min(t);
            seg2_t.push(t);
            seg2_y.push(y);
        }
    }
    let (Ok(l1), Ok(l2)) = (fit_line_points(&seg1_t, &seg1_y), fit_line_points(&seg2_t, &seg2_y))
    else {
        return best;
    };
    let dm = l1.slope - l2.slope;
    if dm == 0.0 {
        return best;
    }
    let x = (l2.intercept - l1.intercept) / dm;
    if !(x > left && x <= right && x >= lo && x <= hi) {
        return best;
    }
    match solve_fixed_tstar_points(ts, ys, x) {
        // equal up to rounding when the grid already sat on the optimum
        Ok(p) if p.sse <= best.sse + 1e-12 * (1.0 + best.sse) => p,
        _ => best,
    }
}

pub fn fit_piecewise(series: &CareerSeries) -> Result<PiecewiseParams, FitError> {
    let (ts, ys) = split_points(series);
    fit_piecewise_points(&ts, &ys)
}

pub fn fit_line_points(ts: &[f64], ys: &[f64]) -> Result<LineParams, FitError> {
    let n = ts.len();
    if n < 2 {
        return Err(FitError::TooFewPoints { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean_t = ts.iter().sum::<f64>() / nf;
    let mean_y = ys.iter().sum::<f64>() / nf;
    let stt: f64 = ts.iter().map(|t| (t - mean_t).powi(2)).sum();
    if stt == 0.0 {
        return Err(FitError::ConstantTime);
    }
    let sty: f64 = ts
        .iter()
        .zip(ys)
        .map(|(t, y)| (t - mean_t) * (y - mean_y))
        .sum();
    let slope = sty / stt;
    let intercept = mean_y - slope * mean_t;
    let sse = ts
        .iter()
        .zip(ys)
        .map(|(t, y)| (y - intercept - slope * t).powi(2))
        .sum();
    Ok(LineParams {
        slope,
        intercept,
        sse,
    })
}

pub fn fit_line(series: &CareerSeries) -> Result<LineParams, FitError> {
    let (ts, ys) = split_points(series);
    fit_line_points(&ts, &ys)
}

/// `n ln(SSE/n)` plus the criterion's complexity penalty. An exact fit
/// (`sse == 0`) scores negative infinity.
pub fn information_score(
    criterion: Criterion,
    n: usize,
    k: usize,
    sse: f64,
) -> Result<f64, FitError> {
    if sse < 0.0 {
        return Err(FitError::NegativeSse(sse));
    }
    if n == 0 || (criterion == Criterion::Aicc && n <= k + 1) {
        return Err(FitError::UndefinedCriterion { criterion, n, k });
    }
    if sse == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let nf = n as f64;
    let kf = k as f64;
    let fit = nf * (sse / nf).ln();
    Ok(match criterion {
        Criterion::Aic => fit + 2.0 * kf,
        Criterion::Aicc => fit + 2.0 * kf + 2.0 * kf * (kf + 1.0) / (nf - kf - 1.0),
        Criterion::Bic => fit + kf * nf.ln(),
    })
}

/// Both fits and the resulting selection for one series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub line: LineParams,
    pub piecewise: PiecewiseParams,
    pub selection: SelectionResult,
}

/// Scores both models. Residual sums that are pure rounding noise relative
/// to the data are snapped to zero so exact fits compare as exact.
pub fn select_from_fits(
    criterion: Criterion,
    ys: &[f64],
    line: &LineParams,
    piecewise: &PiecewiseParams,
) -> Result<SelectionResult, FitError> {
    let n = ys.len();
    let scale: f64 = ys.iter().map(|y| y * y).sum::<f64>().max(1.0);
    let snap = |sse: f64| {
        if sse <= EXACT_FIT_RELATIVE_SSE * scale {
            0.0
        } else {
            sse
        }
    };
    let score_line = information_score(criterion, n, K_LINE, snap(line.sse))?;
    let score_piecewise = information_score(criterion, n, K_PIECEWISE, snap(piecewise.sse))?;
    let chosen = if score_piecewise < score_line {
        ModelChoice::Piecewise
    } else {
        ModelChoice::Line
    };
    Ok(SelectionResult {
        criterion,
        score_line,
        score_piecewise,
        chosen,
    })
}

pub fn compare_models_points(
    ts: &[f64],
    ys: &[f64],
    criterion: Criterion,
) -> Result<ModelComparison, FitError> {
    let line = fit_line_points(ts, ys)?;
    let piecewise = fit_piecewise_points(ts, ys)?;
    let selection = select_from_fits(criterion, ys, &line, &piecewise)?;
    Ok(ModelComparison {
        line,
        piecewise,
        selection,
    })
}

pub fn compare_models(
    series: &CareerSeries,
    criterion: Criterion,
) -> Result<ModelComparison, FitError> {
    let (ts, ys) = split_points(series);
    compare_models_points(&ts, &ys, criterion)
}

pub fn select_model(
    series: &CareerSeries,
    criterion: Criterion,
) -> Result<SelectionResult, FitError> {
    compare_models(series, criterion).map(|c| c.selection)
}

/// One row of the fit export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub faculty_id: String,
    pub m1: f64,
    pub m2: f64,
    pub b: f64,
    pub t_star: f64,
    pub sse: f64,
    pub sse_line: f64,
    pub chosen_model: ModelChoice,
    pub criterion: Criterion,
}

impl FitRow {
    pub fn new(faculty_id: impl Into<String>, cmp: &ModelComparison) -> Self {
        Self {
            faculty_id: faculty_id.into(),
            m1: cmp.piecewise.m1,
            m2: cmp.piecewise.m2,
            b: cmp.piecewise.b,
            t_star: cmp.piecewise.t_star,
            sse: cmp.piecewise.sse,
            sse_line: cmp.line.sse,
            chosen_model: cmp.selection.chosen,
            criterion: cmp.selection.criterion,
        }
    }

    pub fn params(&self) -> PiecewiseParams {
        PiecewiseParams {
            m1: self.m1,
            m2: self.m2,
            b: self.b,
            t_star: self.t_star,
            sse: self.sse,
        }
    }
}

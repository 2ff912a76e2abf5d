//! Count-likelihood alternatives to least squares on adjusted counts.
//!
//! Instead of adjusting the data, the model mean is mapped back to the raw
//! scale: `mu(t) = q(t) * f(t - t0; theta)` where `q` multiplies the coverage
//! form by the growth form. Raw counts are then scored under a Poisson or a
//! fixed-heterogeneity Negative-Binomial law, with the terms that do not
//! depend on the parameters dropped.
//!
//! Fitting nests a Fisher-scoring solve for `(m1, m2, b)` (and a log-scale
//! golden-section search for `zeta`) inside the same refining change-point
//! grid used by [`crate::piecewise`].

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::calibrate::{coverage_fraction, AdjustmentModel, CalibrationError};
use crate::ingest::{CareerSeries, Source};
use crate::piecewise::{self, admissible_window, refine_tstar, FitError, Theta};

pub const ZETA_MIN: f64 = 1e-6;
pub const ZETA_MAX: f64 = 1e3;
/// Score improvement below which an iteration counts as converged.
pub const CONVERGENCE_TOL: f64 = 1e-8;
const MAX_SCORING_ITERS: usize = 200;
const MAX_ALTERNATIONS: usize = 50;
/// Coarse scan of log10(zeta) before golden-section refinement.
const LOG_ZETA_SCAN_STEP: f64 = 0.5;
const LOG_ZETA_TOL: f64 = 1e-7;

#[derive(Debug, Error, PartialEq)]
pub enum CountError {
    #[error("model mean is not positive at observation {index} (f = {value})")]
    InvalidParameter { index: usize, value: f64 },
    #[error("heterogeneity must be positive, got {0}")]
    InvalidZeta(f64),
    #[error("no feasible starting point for any change point")]
    FitFailure,
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountFamily {
    Poisson,
    Negbin,
}

impl CountFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            CountFamily::Poisson => "poisson",
            CountFamily::Negbin => "negbin",
        }
    }
}

impl std::str::FromStr for CountFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "poisson" => Ok(CountFamily::Poisson),
            "negbin" | "nb" | "negative-binomial" => Ok(CountFamily::Negbin),
            other => Err(format!("unknown count family `{other}`")),
        }
    }
}

/// Product of the coverage and growth forms in `calendar_year`. Follows the
/// model's growth normalization mode.
pub fn q_factor(model: &AdjustmentModel, calendar_year: i32) -> Result<f64, CalibrationError> {
    Ok(coverage_fraction(model, calendar_year)? * model.growth_ratio(calendar_year)?)
}

/// Raw counts with their career years and precomputed `q` values.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CountData {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub q: Vec<f64>,
}

impl CountData {
    pub fn from_series(series: &CareerSeries, model: &AdjustmentModel) -> Result<Self, CalibrationError> {
        let mut data = CountData::default();
        for (i, &y) in series.counts.iter().enumerate() {
            data.t.push(i as f64);
            data.y.push(y);
            data.q.push(q_factor(model, series.calendar_year(i))?);
        }
        Ok(data)
    }

    /// Like [`CountData::from_series`], but CV-sourced series are complete, so
    /// their `q` is the growth ratio alone.
    pub fn from_series_for_source(
        series: &CareerSeries,
        model: &AdjustmentModel,
        source: Source,
    ) -> Result<Self, CalibrationError> {
        if source == Source::DBLP {
            return Self::from_series(series, model);
        }
        let mut data = CountData::default();
        for (i, &y) in series.counts.iter().enumerate() {
            data.t.push(i as f64);
            data.y.push(y);
            data.q.push(model.growth_ratio(series.calendar_year(i))?);
        }
        Ok(data)
    }

    /// Every `q` set to one.
    pub fn unit(t: Vec<f64>, y: Vec<f64>) -> Self {
        let q = vec![1.0; t.len()];
        Self { t, y, q }
    }

    /// Concatenation of several data sets, e.g. replicate careers.
    pub fn pooled<'a>(parts: impl IntoIterator<Item = &'a CountData>) -> Self {
        let mut out = CountData::default();
        for p in parts {
            out.t.extend_from_slice(&p.t);
            out.y.extend_from_slice(&p.y);
            out.q.extend_from_slice(&p.q);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

fn rates(data: &CountData, theta: &Theta) -> Result<Vec<f64>, CountError> {
    data.t
        .iter()
        .enumerate()
        .map(|(index, &t)| {
            let value = theta.eval(t);
            if value > 0.0 && value.is_finite() {
                Ok(value)
            } else {
                Err(CountError::InvalidParameter { index, value })
            }
        })
        .collect()
}

/// `sum_i [ -q_i f_i + y_i ln f_i ]`.
pub fn poisson_score_data(data: &CountData, theta: &Theta) -> Result<f64, CountError> {
    let f = rates(data, theta)?;
    Ok(poisson_kernel(data, &f))
}

fn poisson_kernel(data: &CountData, f: &[f64]) -> f64 {
    f.iter()
        .zip(&data.y)
        .zip(&data.q)
        .map(|((&f, &y), &q)| {
            let log_term = if y == 0.0 { 0.0 } else { y * f.ln() };
            -q * f + log_term
        })
        .sum()
}

pub fn poisson_score(
    series: &CareerSeries,
    model: &AdjustmentModel,
    theta: &Theta,
) -> Result<f64, CountError> {
    poisson_score_data(&CountData::from_series(series, model)?, theta)
}

/// `ln Γ(y + 1/ζ) - ln Γ(1/ζ)`, by the product form for integer `y`.
fn ln_gamma_ratio(y: f64, inv_zeta: f64) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    if y.fract() == 0.0 && y <= 1e4 {
        (0..y as u64).map(|j| (inv_zeta + j as f64).ln()).sum()
    } else {
        ln_gamma(y + inv_zeta) - ln_gamma(inv_zeta)
    }
}

/// Fixed-heterogeneity Negative-Binomial score:
/// `-T ln Γ(1/ζ) + sum_i { ln Γ(y_i + 1/ζ) - (1/ζ) ln(1 + ζ q_i f_i)
///   + y_i [ ln(ζ f_i) - ln(1 + ζ q_i f_i) ] }`.
pub fn negbin_score_data(data: &CountData, theta: &Theta, zeta: f64) -> Result<f64, CountError> {
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(CountError::InvalidZeta(zeta));
    }
    let f = rates(data, theta)?;
    Ok(negbin_from_rates(data, &f, zeta))
}

fn negbin_from_rates(data: &CountData, f: &[f64], zeta: f64) -> f64 {
    let inv = 1.0 / zeta;
    let mut total = 0.0;
    for ((&f, &y), &q) in f.iter().zip(&data.y).zip(&data.q) {
        let log1p = (zeta * q * f).ln_1p();
        total += ln_gamma_ratio(y, inv) - inv * log1p;
        if y != 0.0 {
            total += y * ((zeta * f).ln() - log1p);
        }
    }
    total
}

pub fn negbin_score(
    series: &CareerSeries,
    model: &AdjustmentModel,
    theta: &Theta,
    zeta: f64,
) -> Result<f64, CountError> {
    negbin_score_data(&CountData::from_series(series, model)?, theta, zeta)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountModelFit {
    pub family: CountFamily,
    pub theta: Theta,
    pub zeta: Option<f64>,
    pub log_score: f64,
    pub converged: bool,
    pub n_restarts_used: usize,
}

#[derive(Clone, Copy, Debug)]
struct InnerFit {
    beta: [f64; 3],
    zeta: Option<f64>,
    score: f64,
    converged: bool,
}

fn design(t: f64, t_star: f64) -> Vector3<f64> {
    if t < t_star {
        Vector3::new(t, 0.0, 1.0)
    } else {
        Vector3::new(t_star, t - t_star, 1.0)
    }
}

fn rates_for(xs: &[Vector3<f64>], beta: &Vector3<f64>) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(xs.len());
    for x in xs {
        let f = x.dot(beta);
        if !(f > 0.0 && f.is_finite()) {
            return None;
        }
        out.push(f);
    }
    Some(out)
}

fn objective(data: &CountData, f: &[f64], zeta: Option<f64>) -> f64 {
    match zeta {
        None => poisson_kernel(data, f),
        Some(z) => negbin_from_rates(data, f, z),
    }
}

/// Fisher scoring for `(m1, m2, b)` at fixed `t*` and `zeta` with
/// backtracking that keeps every rate positive.
fn scoring_ascent(
    data: &CountData,
    xs: &[Vector3<f64>],
    start: Vector3<f64>,
    zeta: Option<f64>,
) -> Option<(Vector3<f64>, f64, bool)> {
    let mut beta = start;
    let mut f = rates_for(xs, &beta)?;
    let mut score = objective(data, &f, zeta);
    let z = zeta.unwrap_or(0.0);
    for _ in 0..MAX_SCORING_ITERS {
        let mut grad = Vector3::zeros();
        let mut info = Matrix3::zeros();
        for (((x, &fi), &y), &q) in xs.iter().zip(&f).zip(&data.y).zip(&data.q) {
            let denom = 1.0 + z * q * fi;
            let g = y / fi - (1.0 + z * y) * q / denom;
            let w = q / (fi * denom);
            grad += x * g;
            info += x * x.transpose() * w;
        }
        let ridge = 1e-12 * info.trace().max(1e-300);
        let step = (info + Matrix3::identity() * ridge)
            .lu()
            .solve(&grad)
            .unwrap_or(grad);
        let tiny = CONVERGENCE_TOL * 1e-4 * (1.0 + score.abs());
        let mut improved = backtrack(data, xs, &beta, &step, score, zeta);
        if improved.as_ref().is_none_or(|f| f.2 - score < tiny) {
            // the joint step runs into the positivity boundary; coordinates
            // that do not touch the active constraint can still move
            for i in 0..3 {
                if info[(i, i)] > 0.0 {
                    let mut axis = Vector3::zeros();
                    axis[i] = grad[i] / info[(i, i)];
                    if let Some(found) = backtrack(data, xs, &beta, &axis, score, zeta) {
                        if found.2 - score >= tiny && improved.as_ref().is_none_or(|f| found.2 > f.2) {
                            improved = Some(found);
                        }
                    }
                }
            }
        }
        let Some((cand, fc, sc)) = improved else {
            return Some((beta, score, true));
        };
        let gain = sc - score;
        beta = cand;
        f = fc;
        score = sc;
        if gain < tiny {
            return Some((beta, score, true));
        }
    }
    Some((beta, score, false))
}

fn backtrack(
    data: &CountData,
    xs: &[Vector3<f64>],
    beta: &Vector3<f64>,
    step: &Vector3<f64>,
    score: f64,
    zeta: Option<f64>,
) -> Option<(Vector3<f64>, Vec<f64>, f64)> {
    let mut alpha = 1.0;
    for _ in 0..60 {
        let cand = beta + step * alpha;
        if let Some(fc) = rates_for(xs, &cand) {
            let sc = objective(data, &fc, zeta);
            if sc >= score {
                return Some((cand, fc, sc));
            }
        }
        alpha *= 0.5;
    }
    None
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
pub fn golden_max(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Best log10(zeta) for fixed rates: coarse scan, then golden section
/// between the neighbours of the best scan point.
fn best_zeta(data: &CountData, f: &[f64]) -> (f64, f64) {
    let lo = ZETA_MIN.log10();
    let hi = ZETA_MAX.log10();
    let steps = ((hi - lo) / LOG_ZETA_SCAN_STEP).round() as usize;
    let eval = |lz: f64| negbin_from_rates(data, f, 10f64.powf(lz));
    let (mut best_lz, mut best) = (lo, f64::NEG_INFINITY);
    for k in 0..=steps {
        let lz = lo + k as f64 * LOG_ZETA_SCAN_STEP;
        let s = eval(lz);
        if s > best {
            best = s;
            best_lz = lz;
        }
    }
    let a = (best_lz - LOG_ZETA_SCAN_STEP).max(lo);
    let b = (best_lz + LOG_ZETA_SCAN_STEP).min(hi);
    let (lz, s) = golden_max(eval, a, b, LOG_ZETA_TOL);
    if s >= best {
        (10f64.powf(lz), s)
    } else {
        (10f64.powf(best_lz), best)
    }
}

fn starting_points(data: &CountData, t_star: f64) -> Vec<Vector3<f64>> {
    let sum_y: f64 = data.y.iter().sum();
    let sum_q: f64 = data.q.iter().sum();
    let flat = (sum_y / sum_q).max(1e-3);
    let constant = Vector3::new(0.0, 0.0, flat);
    let mut starts = Vec::with_capacity(3);
    let adjusted: Vec<f64> = data.y.iter().zip(&data.q).map(|(y, q)| y / q).collect();
    if let Ok(ls) = piecewise::solve_fixed_tstar_points(&data.t, &adjusted, t_star) {
        let ls = Vector3::new(ls.m1, ls.m2, ls.b);
        starts.push(ls);
        starts.push((ls + constant) * 0.5);
    }
    starts.push(constant);
    starts
}

fn fit_at_tstar(data: &CountData, t_star: f64, family: CountFamily) -> Option<(InnerFit, usize)> {
    let xs: Vec<Vector3<f64>> = data.t.iter().map(|&t| design(t, t_star)).collect();
    let starts = starting_points(data, t_star);
    let mut used = 0;
    let mut best: Option<InnerFit> = None;
    for start in starts {
        let Some((beta, score, converged)) = scoring_ascent(data, &xs, start, None) else {
            continue;
        };
        used += 1;
        let fit = match family {
            CountFamily::Poisson => InnerFit {
                beta: [beta[0], beta[1], beta[2]],
                zeta: None,
                score,
                converged,
            },
            CountFamily::Negbin => alternate_negbin(data, &xs, beta),
        };
        if best.is_none_or(|b| fit.score > b.score) {
            best = Some(fit);
        }
    }
    best.map(|b| (b, used))
}

/// Coordinate ascent over `zeta` and `(m1, m2, b)` from a Poisson optimum.
fn alternate_negbin(data: &CountData, xs: &[Vector3<f64>], start: Vector3<f64>) -> InnerFit {
    let mut beta = start;
    let f = rates_for(xs, &beta).expect("start is feasible");
    let (mut zeta, mut score) = best_zeta(data, &f);
    let mut converged = false;
    for _ in 0..MAX_ALTERNATIONS {
        let before = score;
        if let Some((b, s, _)) = scoring_ascent(data, xs, beta, Some(zeta)) {
            if s >= score {
                beta = b;
                score = s;
            }
        }
        let f = rates_for(xs, &beta).expect("ascent keeps feasibility");
        let (z, s) = best_zeta(data, &f);
        if s >= score {
            zeta = z;
            score = s;
        }
        if score - before < CONVERGENCE_TOL {
            converged = true;
            break;
        }
    }
    InnerFit {
        beta: [beta[0], beta[1], beta[2]],
        zeta: Some(zeta),
        score,
        converged,
    }
}

/// Maximizes the family's score over `theta` (and `zeta` for negbin).
pub fn fit_count_data(data: &CountData, family: CountFamily) -> Result<CountModelFit, CountError> {
    if data.len() < 4 {
        return Err(FitError::TooFewPoints {
            needed: 4,
            got: data.len(),
        }
        .into());
    }
    let (lo, hi) = admissible_window(&data.t).ok_or(CountError::FitFailure)?;
    if lo > hi {
        return Err(FitError::NoAdmissibleWindow { lo, hi }.into());
    }
    let mut total_starts = 0;
    let best = refine_tstar(lo, hi, |t_star| {
        let (fit, used) = fit_at_tstar(data, t_star, family)?;
        total_starts += used;
        Some((-fit.score, fit))
    });
    let (t_star, _, inner) = best.ok_or(CountError::FitFailure)?;
    Ok(CountModelFit {
        family,
        theta: Theta {
            m1: inner.beta[0],
            m2: inner.beta[1],
            b: inner.beta[2],
            t_star,
        },
        zeta: inner.zeta,
        log_score: inner.score,
        converged: inner.converged,
        n_restarts_used: total_starts,
    })
}

pub fn fit_count_model(
    series: &CareerSeries,
    model: &AdjustmentModel,
    family: CountFamily,
) -> Result<CountModelFit, CountError> {
    fit_count_data(&CountData::from_series(series, model)?, family)
}

/// Poisson maximum-likelihood constant rate found numerically; equals
/// `sum(y) / sum(q)` at the optimum.
pub fn fit_constant_poisson(data: &CountData) -> Result<f64, CountError> {
    let sum_y: f64 = data.y.iter().sum();
    let sum_q: f64 = data.q.iter().sum();
    if sum_y <= 0.0 || sum_q <= 0.0 {
        return Err(CountError::FitFailure);
    }
    // score(b) = -b*sum_q + sum_y*ln b is unimodal on (0, inf)
    let upper = 10.0 * sum_y / sum_q + 1.0;
    let (b, _) = golden_max(|b| -b * sum_q + sum_y * b.ln(), 1e-12, upper, 1e-12);
    Ok(b)
}

/// One row of the count-model export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountFitRow {
    pub faculty_id: String,
    pub family: CountFamily,
    pub m1: f64,
    pub m2: f64,
    pub b: f64,
    pub t_star: f64,
    pub zeta: Option<f64>,
    pub log_score: f64,
    pub converged: bool,
}

impl CountFitRow {
    pub fn new(faculty_id: impl Into<String>, fit: &CountModelFit) -> Self {
        Self {
            faculty_id: faculty_id.into(),
            family: fit.family,
            m1: fit.theta.m1,
            m2: fit.theta.m2,
            b: fit.theta.b,
            t_star: fit.theta.t_star,
            zeta: fit.zeta,
            log_score: fit.log_score,
            converged: fit.converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn constant(b: f64) -> Theta {
        Theta {
            m1: 0.0,
            m2: 0.0,
            b,
            t_star: 1.5,
        }
    }

    #[test]
    fn cv_source_q_is_growth_only() {
        let model = AdjustmentModel::published();
        let s = CareerSeries::new("a", 1990, vec![1.0, 2.0]);
        let cv = CountData::from_series_for_source(&s, &model, Source::CV).unwrap();
        let dblp = CountData::from_series_for_source(&s, &model, Source::DBLP).unwrap();
        for (i, year) in [1990, 1991].into_iter().enumerate() {
            assert_relative_eq!(cv.q[i], model.growth_ratio(year).unwrap());
            assert_relative_eq!(dblp.q[i], cv.q[i] * coverage_fraction(&model, year).unwrap());
        }
    }

    #[test]
    fn q_factor_values() {
        assert_relative_eq!(
            q_factor(&AdjustmentModel::published_raw(), 2011).unwrap(),
            0.857664 * 6.909983,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            q_factor(&AdjustmentModel::published(), 2011).unwrap(),
            0.857664,
            epsilon = 1e-9
        );
        assert_eq!(q_factor(&AdjustmentModel::identity(), 1850).unwrap(), 1.0);
    }

    #[test]
    fn poisson_constant_rate() {
        let data = CountData::unit(vec![0.0, 1.0, 2.0], vec![3.0; 3]);
        let s = poisson_score_data(&data, &constant(3.0)).unwrap();
        assert_relative_eq!(s, -9.0 + 9.0 * 3f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(s, 0.887511, epsilon = 1e-6);
    }

    #[test]
    fn poisson_zero_counts() {
        let data = CountData {
            t: vec![0.0, 1.0, 2.0, 3.0],
            y: vec![0.0; 4],
            q: vec![0.5, 1.0, 1.5, 2.0],
        };
        let theta = Theta {
            m1: 1.0,
            m2: -0.5,
            b: 2.0,
            t_star: 2.0,
        };
        let expected: f64 = -data
            .t
            .iter()
            .zip(&data.q)
            .map(|(&t, &q)| q * theta.eval(t))
            .sum::<f64>();
        assert_relative_eq!(poisson_score_data(&data, &theta).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn invalid_rates_rejected() {
        let data = CountData::unit(vec![0.0, 1.0, 5.0], vec![1.0; 3]);
        let theta = Theta {
            m1: 0.0,
            m2: -1.0,
            b: 1.0,
            t_star: 1.0,
        };
        assert!(matches!(
            poisson_score_data(&data, &theta),
            Err(CountError::InvalidParameter { index: 2, .. })
        ));
        assert!(matches!(
            negbin_score_data(&data, &constant(1.0), 0.0),
            Err(CountError::InvalidZeta(_))
        ));
    }

    #[test]
    fn negbin_single_point() {
        let data = CountData::unit(vec![0.0], vec![2.0]);
        let s = negbin_score_data(&data, &constant(2.0), 1.0).unwrap();
        let expected = 2f64.ln() - 3f64.ln() + 2.0 * (2.0f64 / 3.0).ln();
        assert_relative_eq!(s, expected, epsilon = 1e-12);
        assert_relative_eq!(s, -1.216395, epsilon = 1e-6);
    }

    #[test]
    fn negbin_zero_counts() {
        let data = CountData {
            t: vec![0.0, 1.0, 2.0],
            y: vec![0.0; 3],
            q: vec![1.0, 2.0, 0.5],
        };
        let zeta = 0.7;
        let theta = constant(1.3);
        let expected: f64 = -(1.0 / zeta)
            * data
                .q
                .iter()
                .map(|q| (1.0 + zeta * q * 1.3f64).ln())
                .sum::<f64>();
        assert_relative_eq!(negbin_score_data(&data, &theta, zeta).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn gamma_ratio_matches_ln_gamma() {
        for &(y, inv) in &[(3.0, 0.5), (7.0, 12.5), (1.0, 1e6), (0.0, 4.0)] {
            assert_relative_eq!(
                ln_gamma_ratio(y, inv),
                ln_gamma(y + inv) - ln_gamma(inv),
                epsilon = 1e-7,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn constant_poisson_mle_is_mean() {
        let data = CountData::unit(vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![2.0, 5.0, 3.0, 4.0, 1.0]);
        // golden section resolves a maximum only to about sqrt(machine epsilon)
        assert_relative_eq!(fit_constant_poisson(&data).unwrap(), 3.0, epsilon = 1e-6);
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, fx) = golden_max(|x| -(x - 1.25).powi(2) + 2.0, -3.0, 4.0, 1e-10);
        assert_relative_eq!(x, 1.25, epsilon = 1e-6);
        assert_relative_eq!(fx, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn poisson_fit_on_exact_rates() {
        // With y equal to the mean everywhere the Poisson optimum is the
        // generating theta.
        let truth = Theta {
            m1: 1.0,
            m2: -0.5,
            b: 2.0,
            t_star: 5.0,
        };
        let t: Vec<f64> = (0..15).map(f64::from).collect();
        let y: Vec<f64> = t.iter().map(|&t| truth.eval(t)).collect();
        let fit = fit_count_data(&CountData::unit(t, y), CountFamily::Poisson).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.theta.m1, 1.0, epsilon = 1e-5);
        assert_relative_eq!(fit.theta.m2, -0.5, epsilon = 1e-5);
        assert_relative_eq!(fit.theta.b, 2.0, epsilon = 1e-5);
        assert!((fit.theta.t_star - 5.0).abs() < 1e-4);
    }

    #[test]
    fn all_zero_series_is_handled() {
        let data = CountData::unit((0..10).map(f64::from).collect(), vec![0.0; 10]);
        // rates shrink toward zero; the search still returns a feasible theta
        let fit = fit_count_data(&data, CountFamily::Poisson).unwrap();
        assert!(fit.log_score <= 0.0);
    }

    #[test]
    fn family_parsing() {
        assert_eq!("NegBin".parse::<CountFamily>().unwrap(), CountFamily::Negbin);
        assert!("gamma".parse::<CountFamily>().is_err());
    }
}

//! Linear calibration of raw counts: the DBLP coverage fraction and the
//! field-wide publication-rate growth, applied to career series.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{CareerSeries, Source};

/// Coverage values above this are treated as a domain violation rather than
/// indexing noise.
pub const MAX_COVERAGE: f64 = 1.05;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("coverage fit needs at least 2 distinct years, got {0}")]
    Underdetermined(usize),
    #[error("year {year} outside calibration domain [{lo}, {hi}]")]
    OutOfDomain { year: i32, lo: i32, hi: i32 },
    #[error("{form} form evaluates to {value} at year {year}")]
    InvalidForm {
        form: &'static str,
        year: i32,
        value: f64,
    },
    #[error("benchmark year {0} has zero CV publications")]
    EmptyBenchmarkYear(i32),
}

/// The two linear calibration forms.
///
/// `coverage(t) = m_alpha * t + b_alpha` is the fraction of publications
/// indexed by DBLP in calendar year `t`; `growth(t) = m_beta * t + b_beta`
/// is the ratio of publication rates in `t` to rates in the reference year.
/// With `normalize_growth` the growth form is divided by its value at
/// `reference_year`, so reference-year counts are fixed points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentModel {
    pub m_alpha: f64,
    pub b_alpha: f64,
    pub m_beta: f64,
    pub b_beta: f64,
    #[serde(default = "default_reference_year")]
    pub reference_year: i32,
    #[serde(default = "default_normalize")]
    pub normalize_growth: bool,
    /// Inclusive calendar-year range on which the forms are trusted.
    /// `None` means unrestricted.
    #[serde(default)]
    pub valid_domain: Option<(i32, i32)>,
}

fn default_reference_year() -> i32 {
    2011
}

fn default_normalize() -> bool {
    true
}

impl AdjustmentModel {
    pub const PUBLISHED_M_ALPHA: f64 = 0.010588;
    pub const PUBLISHED_B_ALPHA: f64 = -20.434804;
    pub const PUBLISHED_M_BETA: f64 = 0.131873;
    pub const PUBLISHED_B_BETA: f64 = -258.286620;
    pub const DEFAULT_DOMAIN: (i32, i32) = (1970, 2015);

    /// Coefficients estimated from the CV benchmark, normalized at 2011.
    pub fn published() -> Self {
        Self {
            m_alpha: Self::PUBLISHED_M_ALPHA,
            b_alpha: Self::PUBLISHED_B_ALPHA,
            m_beta: Self::PUBLISHED_M_BETA,
            b_beta: Self::PUBLISHED_B_BETA,
            reference_year: 2011,
            normalize_growth: true,
            valid_domain: Some(Self::DEFAULT_DOMAIN),
        }
    }

    /// The published coefficients with the literal (unnormalized) growth form.
    pub fn published_raw() -> Self {
        Self {
            normalize_growth: false,
            ..Self::published()
        }
    }

    /// Coverage 1 and growth 1 everywhere.
    pub fn identity() -> Self {
        Self {
            m_alpha: 0.0,
            b_alpha: 1.0,
            m_beta: 0.0,
            b_beta: 1.0,
            reference_year: 2011,
            normalize_growth: true,
            valid_domain: None,
        }
    }

    pub fn with_coverage(mut self, m_alpha: f64, b_alpha: f64) -> Self {
        self.m_alpha = m_alpha;
        self.b_alpha = b_alpha;
        self
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }

    fn check_domain(&self, year: i32) -> Result<(), CalibrationError> {
        match self.valid_domain {
            Some((lo, hi)) if year < lo || year > hi => {
                Err(CalibrationError::OutOfDomain { year, lo, hi })
            }
            _ => Ok(()),
        }
    }

    /// Raw growth form `m_beta * year + b_beta`, required positive.
    pub fn growth_form(&self, year: i32) -> Result<f64, CalibrationError> {
        self.check_domain(year)?;
        let value = self.m_beta * year as f64 + self.b_beta;
        if value > 0.0 {
            Ok(value)
        } else {
            Err(CalibrationError::InvalidForm {
                form: "growth",
                year,
                value,
            })
        }
    }

    /// Growth form divided by its reference-year value when normalizing.
    pub fn growth_ratio(&self, year: i32) -> Result<f64, CalibrationError> {
        let g = self.growth_form(year)?;
        if self.normalize_growth {
            let reference = self.growth_at_reference()?;
            Ok(g / reference)
        } else {
            Ok(g)
        }
    }

    fn growth_at_reference(&self) -> Result<f64, CalibrationError> {
        // the reference year need not lie inside the trusted domain
        let value = self.m_beta * self.reference_year as f64 + self.b_beta;
        if value > 0.0 {
            Ok(value)
        } else {
            Err(CalibrationError::InvalidForm {
                form: "growth",
                year: self.reference_year,
                value,
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPair {
    pub year: i32,
    pub dblp_count: u32,
    pub cv_count: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageFit {
    pub m_alpha: f64,
    pub b_alpha: f64,
    pub r_squared: f64,
}

/// Least-squares line through the per-year DBLP/CV ratios. Counts are summed
/// across faculty within each calendar year before the ratio is taken.
pub fn fit_coverage(pairs: &[BenchmarkPair]) -> Result<CoverageFit, CalibrationError> {
    let mut per_year: BTreeMap<i32, (u64, u64)> = BTreeMap::new();
    for p in pairs {
        let e = per_year.entry(p.year).or_default();
        e.0 += u64::from(p.dblp_count);
        e.1 += u64::from(p.cv_count);
    }
    if per_year.len() < 2 {
        return Err(CalibrationError::Underdetermined(per_year.len()));
    }
    let mut xs = Vec::with_capacity(per_year.len());
    let mut ys = Vec::with_capacity(per_year.len());
    for (&year, &(dblp, cv)) in &per_year {
        if cv == 0 {
            return Err(CalibrationError::EmptyBenchmarkYear(year));
        }
        xs.push(year as f64);
        ys.push(dblp as f64 / cv as f64);
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(CoverageFit {
        m_alpha: slope,
        b_alpha: intercept,
        r_squared,
    })
}

pub fn read_benchmarks(path: &Path) -> Result<Vec<BenchmarkPair>, crate::ingest::IngestError> {
    crate::ingest::read_records(path)
}

/// Fraction of publications DBLP indexes in `year`.
pub fn coverage_fraction(model: &AdjustmentModel, year: i32) -> Result<f64, CalibrationError> {
    model.check_domain(year)?;
    let value = model.m_alpha * year as f64 + model.b_alpha;
    if value <= 0.0 || value > MAX_COVERAGE {
        return Err(CalibrationError::InvalidForm {
            form: "coverage",
            year,
            value,
        });
    }
    Ok(value)
}

/// Multiplier converting a CV-equivalent count in `year` to a
/// reference-year-equivalent count.
pub fn growth_factor(model: &AdjustmentModel, year: i32) -> Result<f64, CalibrationError> {
    Ok(1.0 / model.growth_ratio(year)?)
}

fn rescale(
    series: &CareerSeries,
    factor: impl Fn(i32) -> Result<f64, CalibrationError>,
) -> Result<CareerSeries, CalibrationError> {
    let counts = series
        .counts
        .iter()
        .enumerate()
        .map(|(t, &c)| Ok(c * factor(series.calendar_year(t))?))
        .collect::<Result<Vec<_>, CalibrationError>>()?;
    Ok(CareerSeries {
        faculty_id: series.faculty_id.clone(),
        t0: series.t0,
        counts,
    })
}

/// Divides each count by the coverage fraction of its calendar year.
pub fn dblp_to_cv(
    model: &AdjustmentModel,
    series: &CareerSeries,
) -> Result<CareerSeries, CalibrationError> {
    rescale(series, |y| Ok(1.0 / coverage_fraction(model, y)?))
}

/// Inverse of [`dblp_to_cv`].
pub fn cv_to_dblp(
    model: &AdjustmentModel,
    series: &CareerSeries,
) -> Result<CareerSeries, CalibrationError> {
    rescale(series, |y| coverage_fraction(model, y))
}

/// Multiplies each count by the growth factor of its calendar year.
pub fn cv_to_2011(
    model: &AdjustmentModel,
    series: &CareerSeries,
) -> Result<CareerSeries, CalibrationError> {
    rescale(series, |y| growth_factor(model, y))
}

/// Inverse of [`cv_to_2011`].
pub fn from_2011_to_cv(
    model: &AdjustmentModel,
    series: &CareerSeries,
) -> Result<CareerSeries, CalibrationError> {
    rescale(series, |y| model.growth_ratio(y))
}

/// Full adjustment for a series of the given provenance: DBLP series get the
/// coverage correction then the growth correction, CV series only growth.
pub fn adjust(
    model: &AdjustmentModel,
    series: &CareerSeries,
    source: Source,
) -> Result<CareerSeries, CalibrationError> {
    match source {
        Source::DBLP => cv_to_2011(model, &dblp_to_cv(model, series)?),
        Source::CV => cv_to_2011(model, series),
    }
}

/// Inverse of [`adjust`].
pub fn unadjust(
    model: &AdjustmentModel,
    series: &CareerSeries,
    source: Source,
) -> Result<CareerSeries, CalibrationError> {
    let cv = from_2011_to_cv(model, series)?;
    match source {
        Source::DBLP => cv_to_dblp(model, &cv),
        Source::CV => Ok(cv),
    }
}

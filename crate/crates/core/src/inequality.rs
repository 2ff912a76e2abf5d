//! Lorenz curves and Gini coefficients of per-faculty production.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{CareerSeries, FacultyRecord};

pub const DEFAULT_WINDOW_YEARS: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum InequalityError {
    #[error("no values")]
    Empty,
    #[error("gini undefined: total production is zero")]
    ZeroTotal,
    #[error("value {0} is negative or not finite")]
    InvalidValue(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorenzCurve {
    /// `(X, Y)` from `(0, 0)` to `(1, 1)`, one step per value.
    pub points: Vec<(f64, f64)>,
    pub gini: f64,
}

impl LorenzCurve {
    /// Share of production held by the bottom `x` of faculty, linear
    /// between points.
    pub fn y_at(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let i = self.points.partition_point(|p| p.0 < x);
        if i == 0 {
            return self.points[0].1;
        }
        let (x1, y1) = self.points[i.min(self.points.len() - 1)];
        let (x0, y0) = self.points[i - 1];
        if x1 == x0 {
            return y1;
        }
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

pub fn lorenz(values: &[f64]) -> Result<LorenzCurve, InequalityError> {
    if values.is_empty() {
        return Err(InequalityError::Empty);
    }
    if let Some(&v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(InequalityError::InvalidValue(v));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total: f64 = sorted.iter().sum();
    if total <= 0.0 {
        return Err(InequalityError::ZeroTotal);
    }
    let n = sorted.len() as f64;
    let mut points = Vec::with_capacity(sorted.len() + 1);
    points.push((0.0, 0.0));
    let mut cum = 0.0;
    let mut area = 0.0;
    let mut prev_y = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        cum += v;
        let y = if i + 1 == sorted.len() { 1.0 } else { cum / total };
        area += (prev_y + y) / (2.0 * n);
        points.push(((i + 1) as f64 / n, y));
        prev_y = y;
    }
    Ok(LorenzCurve {
        points,
        gini: 1.0 - 2.0 * area,
    })
}

pub fn gini(values: &[f64]) -> Result<f64, InequalityError> {
    lorenz(values).map(|c| c.gini)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecadeGini {
    /// First year of the hire decade, e.g. 1980.
    pub decade: i32,
    pub n_faculty: usize,
    pub gini: f64,
    #[serde(skip)]
    pub curve: Option<LorenzCurve>,
}

/// Production per faculty member: the first `window_years` career years,
/// or the whole career when `None`.
pub fn production(series: &CareerSeries, window_years: Option<usize>) -> f64 {
    match window_years {
        Some(w) => series.counts.iter().take(w).sum(),
        None => series.total(),
    }
}

/// One Gini per hire decade, ordered by decade. Decades with fewer than two
/// faculty or no production are skipped with a warning.
pub fn decade_ginis(
    faculty: &[FacultyRecord],
    series: &[CareerSeries],
    window_years: Option<usize>,
) -> Vec<DecadeGini> {
    let by_id: HashMap<&str, &CareerSeries> = series.iter().map(|s| (s.faculty_id.as_str(), s)).collect();
    let mut groups: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for f in faculty {
        if let Some(s) = by_id.get(f.faculty_id.as_str()) {
            groups
                .entry(f.hire_year.div_euclid(10) * 10)
                .or_default()
                .push(production(s, window_years));
        }
    }
    groups
        .into_iter()
        .filter_map(|(decade, values)| {
            if values.len() < 2 {
                log::warn!("hire decade {decade} has {} faculty; omitted", values.len());
                return None;
            }
            match lorenz(&values) {
                Ok(curve) => Some(DecadeGini {
                    decade,
                    n_faculty: values.len(),
                    gini: curve.gini,
                    curve: Some(curve),
                }),
                Err(e) => {
                    log::warn!("hire decade {decade}: {e}; omitted");
                    None
                }
            }
        })
        .collect()
}

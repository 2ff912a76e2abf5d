//! Trajectory classes, change-point and peak-year summaries, and cohort
//! aggregates stratified by institutional prestige.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::ingest::{CareerSeries, FacultyRecord};
use crate::piecewise::{ModelChoice, PiecewiseParams};

/// Default upper bound on the change point for the canonical narrative.
pub const DEFAULT_TSTAR_CAP: f64 = 10.0;

/// Sign class of `(m1, m2)`; zero counts as nonpositive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quadrant {
    /// growth then growth
    I,
    /// decline then growth
    II,
    /// decline throughout
    III,
    /// growth then decline
    IV,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::I, Quadrant::II, Quadrant::III, Quadrant::IV];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Quadrant::I => "I",
            Quadrant::II => "II",
            Quadrant::III => "III",
            Quadrant::IV => "IV",
        }
    }
}

pub fn classify_quadrant(m1: f64, m2: f64) -> Quadrant {
    match (m1 > 0.0, m2 > 0.0) {
        (true, true) => Quadrant::I,
        (false, true) => Quadrant::II,
        (false, false) => Quadrant::III,
        (true, false) => Quadrant::IV,
    }
}

/// Growth, then a slower decline, with the change point no later than
/// `t_star_cap` (pass `f64::INFINITY` to drop that condition).
pub fn is_canonical(params: &PiecewiseParams, t_star_cap: f64) -> bool {
    is_canonical_parts(params.m1, params.m2, params.t_star, t_star_cap)
}

pub fn is_canonical_parts(m1: f64, m2: f64, t_star: f64, t_star_cap: f64) -> bool {
    m1 > 0.0 && m2 < 0.0 && t_star <= t_star_cap && m2.abs() < m1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryClass {
    pub quadrant: Quadrant,
    /// Geometric canonical-octant membership of the fitted parameters.
    pub canonical: bool,
    pub stable: bool,
    /// The criterion preferred the piecewise model.
    pub nonlinear: bool,
}

pub fn classify_trajectory(
    params: &PiecewiseParams,
    stable: bool,
    nonlinear: bool,
    t_star_cap: f64,
) -> TrajectoryClass {
    TrajectoryClass {
        quadrant: classify_quadrant(params.m1, params.m2),
        canonical: is_canonical(params, t_star_cap),
        stable,
        nonlinear,
    }
}

/// Career year of maximum output, earliest on ties. `None` for an empty or
/// all-zero series.
pub fn peak_year(series: &CareerSeries) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (t, &c) in series.counts.iter().enumerate() {
        if c > 0.0 && best.is_none_or(|(_, b)| c > b) {
            best = Some((t, c));
        }
    }
    best.map(|(t, _)| t)
}

/// Everything the cohort summaries need about one fitted faculty member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortMember {
    pub faculty_id: String,
    pub career_length: usize,
    pub params: PiecewiseParams,
    pub chosen: ModelChoice,
    pub stable: bool,
}

impl CohortMember {
    pub fn nonlinear(&self) -> bool {
        self.chosen == ModelChoice::Piecewise
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangepointPair {
    pub faculty_id: String,
    pub career_length: usize,
    pub t_star: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub year: i64,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChangepointTable {
    pub pairs: Vec<ChangepointPair>,
    /// Change points binned to the nearest career year.
    pub histogram: Vec<HistogramBin>,
}

impl ChangepointTable {
    pub fn mode(&self) -> Option<i64> {
        mode_of(&self.histogram)
    }
}

fn mode_of(histogram: &[HistogramBin]) -> Option<i64> {
    histogram
        .iter()
        .fold(None::<HistogramBin>, |best, &bin| match best {
            Some(b) if b.count >= bin.count => Some(b),
            _ => Some(bin),
        })
        .map(|b| b.year)
}

fn histogram(values: impl Iterator<Item = i64>) -> Vec<HistogramBin> {
    let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
    for v in values {
        *bins.entry(v).or_default() += 1;
    }
    bins.into_iter()
        .map(|(year, count)| HistogramBin { year, count })
        .collect()
}

/// `(career_length, t*)` for faculty that are both stable and better
/// described by the piecewise model.
pub fn changepoint_table(members: &[CohortMember]) -> ChangepointTable {
    let pairs: Vec<ChangepointPair> = members
        .iter()
        .filter(|m| m.stable && m.nonlinear())
        .map(|m| ChangepointPair {
            faculty_id: m.faculty_id.clone(),
            career_length: m.career_length,
            t_star: m.params.t_star,
        })
        .collect();
    let histogram = histogram(pairs.iter().map(|p| p.t_star.round() as i64));
    ChangepointTable { pairs, histogram }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakYearTable {
    /// `(career_length, peak_year)` per faculty.
    pub pairs: Vec<(usize, usize)>,
    pub histogram: Vec<HistogramBin>,
}

impl PeakYearTable {
    pub fn mode(&self) -> Option<i64> {
        mode_of(&self.histogram)
    }
}

/// Empirical peak years. Careers shorter than `min_career` are left out of
/// both the pairs and the marginal histogram, as are series with no output.
pub fn peak_year_table(series: &[CareerSeries], min_career: usize) -> PeakYearTable {
    let pairs: Vec<(usize, usize)> = series
        .iter()
        .filter(|s| s.career_length() >= min_career)
        .filter_map(|s| peak_year(s).map(|p| (s.career_length(), p)))
        .collect();
    let histogram = histogram(pairs.iter().map(|&(_, p)| p as i64));
    PeakYearTable { pairs, histogram }
}

/// Heat-map input: counts of identical `(x, y)` cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatCell {
    pub x: i64,
    pub y: i64,
    pub weight: f64,
}

pub fn heat_cells(points: impl IntoIterator<Item = (i64, i64)>) -> Vec<HeatCell> {
    let mut cells: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for p in points {
        *cells.entry(p).or_default() += 1;
    }
    cells
        .into_iter()
        .map(|((x, y), n)| HeatCell {
            x,
            y,
            weight: n as f64,
        })
        .collect()
}

/// Assigns each faculty member a prestige stratum. `edges` are increasing
/// cumulative fractions in (0, 1); a member whose institution has a share
/// `s` of the cohort at strictly better ranks lands in stratum
/// `#{e in edges : e <= s}`, so colleagues at one institution stay together.
pub fn assign_strata(faculty: &[FacultyRecord], edges: &[f64]) -> Vec<usize> {
    let n = faculty.len() as f64;
    let mut ranks: Vec<u32> = faculty.iter().map(|f| f.employer_rank).collect();
    ranks.sort_unstable();
    faculty
        .iter()
        .map(|f| {
            let better = ranks.partition_point(|&r| r < f.employer_rank) as f64;
            let share = better / n;
            edges.iter().filter(|&&e| e <= share + 1e-12).count()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub stratum: usize,
    pub career_year: usize,
    pub mean: f64,
    pub n: usize,
}

fn join_series(series: &[CareerSeries]) -> HashMap<&str, &CareerSeries> {
    series.iter().map(|s| (s.faculty_id.as_str(), s)).collect()
}

/// Mean (adjusted) count per career year within each prestige stratum,
/// averaged over the members whose careers reach that year.
pub fn cohort_curves(
    faculty: &[FacultyRecord],
    series: &[CareerSeries],
    edges: &[f64],
) -> Vec<CurvePoint> {
    let by_id = join_series(series);
    let strata = assign_strata(faculty, edges);
    let mut sums: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    let mut populated = vec![false; edges.len() + 1];
    for (f, &stratum) in faculty.iter().zip(&strata) {
        let Some(s) = by_id.get(f.faculty_id.as_str()) else {
            continue;
        };
        populated[stratum] = true;
        for (t, &c) in s.counts.iter().enumerate() {
            let e = sums.entry((stratum, t)).or_default();
            e.0 += c;
            e.1 += 1;
        }
    }
    for (stratum, seen) in populated.iter().enumerate() {
        if !seen {
            log::warn!("prestige stratum {stratum} has no faculty; omitted");
        }
    }
    sums.into_iter()
        .map(|((stratum, career_year), (sum, n))| CurvePoint {
            stratum,
            career_year,
            mean: sum / n as f64,
            n,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedianWindow {
    /// First ten career years; careers shorter than that are excluded.
    FirstDecade,
    Lifetime,
}

impl std::str::FromStr for MedianWindow {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first_decade" => Ok(MedianWindow::FirstDecade),
            "lifetime" => Ok(MedianWindow::Lifetime),
            other => Err(format!("unknown window `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstitutionMedian {
    pub employer_rank: u32,
    pub is_private: bool,
    pub n_faculty: usize,
    pub median: f64,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

/// Median per-person total output for each employing institution
/// (identified by its prestige rank), ordered by rank.
pub fn institution_medians(
    faculty: &[FacultyRecord],
    series: &[CareerSeries],
    window: MedianWindow,
) -> Vec<InstitutionMedian> {
    let by_id = join_series(series);
    let mut groups: BTreeMap<u32, (bool, Vec<f64>)> = BTreeMap::new();
    for f in faculty {
        let Some(s) = by_id.get(f.faculty_id.as_str()) else {
            continue;
        };
        let total = match window {
            MedianWindow::FirstDecade if s.career_length() < 10 => continue,
            MedianWindow::FirstDecade => s.counts[..10].iter().sum(),
            MedianWindow::Lifetime => s.total(),
        };
        groups
            .entry(f.employer_rank)
            .or_insert_with(|| (f.is_private, Vec::new()))
            .1
            .push(total);
    }
    groups
        .into_iter()
        .filter_map(|(rank, (is_private, mut totals))| {
            let n = totals.len();
            median(&mut totals).map(|median| InstitutionMedian {
                employer_rank: rank,
                is_private,
                n_faculty: n,
                median,
            })
        })
        .collect()
}

/// Cohort-level fractions. All fields are `None` for an empty cohort.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub n: usize,
    pub piecewise_selected: Option<f64>,
    pub stable: Option<f64>,
    pub stable_and_nonlinear: Option<f64>,
    /// Stable, nonlinear and inside the canonical octant.
    pub canonical: Option<f64>,
}

pub fn summarize_population(members: &[CohortMember], t_star_cap: f64) -> PopulationSummary {
    let n = members.len();
    if n == 0 {
        return PopulationSummary::default();
    }
    let frac = |pred: &dyn Fn(&CohortMember) -> bool| {
        Some(members.iter().filter(|m| pred(m)).count() as f64 / n as f64)
    };
    PopulationSummary {
        n,
        piecewise_selected: frac(&|m| m.nonlinear()),
        stable: frac(&|m| m.stable),
        stable_and_nonlinear: frac(&|m| m.stable && m.nonlinear()),
        canonical: frac(&|m| m.stable && m.nonlinear() && is_canonical(&m.params, t_star_cap)),
    }
}

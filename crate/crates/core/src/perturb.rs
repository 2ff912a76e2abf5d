//! Publication-date noise: per-publication Gaussian year shifts, repeated
//! refits, per-trajectory stability verdicts and the pooled noise-added
//! ensemble.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::{adjust, AdjustmentModel, CalibrationError};
use crate::classify::{classify_quadrant, is_canonical, Quadrant, DEFAULT_TSTAR_CAP};
use crate::ingest::{build_series, build_series_from_years, FacultyRecord, PublicationRecord, SeriesOptions};
use crate::piecewise::{compare_models, fit_piecewise, Criterion, FitError, ModelChoice};
use crate::rng;

pub const DEFAULT_SIGMA: f64 = 0.7413011;
pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_STABILITY_THRESHOLD: f64 = 0.75;

const STREAM_DOMAIN: &str = "perturb.year";

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("noise spec invalid: {0}")]
    InvalidSpec(String),
    #[error("noise-free fit for {faculty_id} failed: {source}")]
    BaselineFit {
        faculty_id: String,
        #[source]
        source: FitError,
    },
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SIGMA,
            trials: DEFAULT_TRIALS,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), PerturbError> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(PerturbError::InvalidSpec(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.trials == 0 {
            return Err(PerturbError::InvalidSpec("trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// Seed material for one publication; combined with the trial index to
/// give that publication's draw in that trial.
fn pub_key(seed: u64, pub_rec: &PublicationRecord) -> u64 {
    rng::address_u64(
        STREAM_DOMAIN,
        &[seed.into(), pub_rec.faculty_id.as_str().into(), pub_rec.pub_id.as_str().into()],
    )
}

fn shift(key: u64, trial: u64, sigma: f64) -> i32 {
    let g: f64 = rng::substream(key, trial).sample(StandardNormal);
    // f64::round rounds half away from zero
    (g * sigma).round() as i32
}

/// Year shift applied to one publication in one trial.
pub fn year_shift(seed: u64, pub_rec: &PublicationRecord, trial: u64, sigma: f64) -> i32 {
    shift(pub_key(seed, pub_rec), trial, sigma)
}

/// Copies of `pubs` with each year replaced by `round(year + g)`,
/// `g ~ N(0, sigma)`, drawn from a stream addressed by
/// `(seed, faculty_id, trial_index, pub_id)`.
pub fn perturb_years(pubs: &[PublicationRecord], spec: &NoiseSpec, trial_index: u64) -> Vec<PublicationRecord> {
    pubs.iter()
        .map(|p| {
            let mut q = p.clone();
            q.year = shifted_year(p.year, year_shift(spec.seed, p, trial_index, spec.sigma));
            q
        })
        .collect()
}

fn shifted_year(year: i32, s: i32) -> i32 {
    year.saturating_add(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    pub threshold: f64,
    pub series: SeriesOptions,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_STABILITY_THRESHOLD,
            series: SeriesOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub faculty_id: String,
    pub baseline_quadrant: Quadrant,
    /// Votes for quadrants I..IV.
    pub quadrant_votes: [usize; 4],
    /// Trials whose refit failed.
    pub degenerate: usize,
    /// `None` when every trial was degenerate.
    pub modal_quadrant: Option<Quadrant>,
    pub modal_fraction: f64,
    pub stable: bool,
    pub signflip_fraction: f64,
}

impl StabilityReport {
    pub fn trials(&self) -> usize {
        self.quadrant_votes.iter().sum::<usize>() + self.degenerate
    }

    /// Builds the verdict from raw vote counts. Modal ties go to the lower
    /// quadrant; sign flips count non-degenerate trials off the baseline.
    pub fn from_votes(
        faculty_id: impl Into<String>,
        baseline_quadrant: Quadrant,
        quadrant_votes: [usize; 4],
        degenerate: usize,
        threshold: f64,
    ) -> Self {
        let trials = quadrant_votes.iter().sum::<usize>() + degenerate;
        let mut modal: Option<(Quadrant, usize)> = None;
        for q in Quadrant::ALL {
            let v = quadrant_votes[q.index()];
            if v > 0 && modal.is_none_or(|(_, best)| v > best) {
                modal = Some((q, v));
            }
        }
        let frac = |k: usize| if trials == 0 { 0.0 } else { k as f64 / trials as f64 };
        let modal_fraction = frac(modal.map_or(0, |(_, v)| v));
        let modal_quadrant = modal.map(|(q, _)| q);
        let off_baseline = quadrant_votes.iter().sum::<usize>() - quadrant_votes[baseline_quadrant.index()];
        Self {
            faculty_id: faculty_id.into(),
            baseline_quadrant,
            quadrant_votes,
            degenerate,
            modal_quadrant,
            modal_fraction,
            stable: modal_fraction >= threshold && modal_quadrant == Some(baseline_quadrant),
            signflip_fraction: frac(off_baseline),
        }
    }
}

/// Flat CSV form of a [`StabilityReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub faculty_id: String,
    pub votes_q1: usize,
    pub votes_q2: usize,
    pub votes_q3: usize,
    pub votes_q4: usize,
    pub degenerate: usize,
    pub modal_fraction: f64,
    pub stable: bool,
    pub signflip_fraction: f64,
}

impl From<&StabilityReport> for StabilityRow {
    fn from(r: &StabilityReport) -> Self {
        let [votes_q1, votes_q2, votes_q3, votes_q4] = r.quadrant_votes;
        Self {
            faculty_id: r.faculty_id.clone(),
            votes_q1,
            votes_q2,
            votes_q3,
            votes_q4,
            degenerate: r.degenerate,
            modal_fraction: r.modal_fraction,
            stable: r.stable,
            signflip_fraction: r.signflip_fraction,
        }
    }
}

/// Publications that enter the noise-free series, with their precomputed
/// stream keys.
struct Prepared<'a> {
    faculty: &'a FacultyRecord,
    years: Vec<i32>,
    keys: Vec<u64>,
    career_length: usize,
}

fn prepare<'a>(
    faculty: &'a FacultyRecord,
    pubs: &[PublicationRecord],
    spec: &NoiseSpec,
    opts: SeriesOptions,
) -> Prepared<'a> {
    let own: Vec<&PublicationRecord> = pubs
        .iter()
        .filter(|p| p.faculty_id == faculty.faculty_id)
        .filter(|p| opts.include_prehire || p.year >= faculty.hire_year)
        .collect();
    let career_length = build_series(faculty, own.iter().copied(), opts).career_length();
    Prepared {
        faculty,
        years: own.iter().map(|p| p.year).collect(),
        keys: own.iter().map(|p| pub_key(spec.seed, p)).collect(),
        career_length,
    }
}

impl Prepared<'_> {
    /// Perturbed years mapped back onto the noise-free career span: shifts
    /// before hire land in year 0, shifts past the last year land there.
    fn trial_series(&self, trial: u64, sigma: f64, opts: SeriesOptions) -> crate::ingest::CareerSeries {
        let t0 = self.faculty.hire_year;
        let last = t0 + self.career_length as i32 - 1;
        let years = self
            .years
            .iter()
            .zip(&self.keys)
            .map(|(&y, &k)| shifted_year(y, shift(k, trial, sigma)).clamp(t0, last.max(t0)));
        let mut s = build_series_from_years(
            &self.faculty.faculty_id,
            t0,
            years,
            SeriesOptions {
                include_prehire: true,
                ..opts
            },
        );
        s.counts.resize(self.career_length, 0.0);
        s
    }
}

/// Quadrant votes over `spec.trials` noise-added refits of one career.
pub fn stability_analysis(
    faculty: &FacultyRecord,
    pubs: &[PublicationRecord],
    model: &AdjustmentModel,
    spec: &NoiseSpec,
    opts: &StabilityOptions,
) -> Result<StabilityReport, PerturbError> {
    spec.validate()?;
    let prepared = prepare(faculty, pubs, spec, opts.series);
    let baseline_series = build_series(faculty, pubs.iter().filter(|p| p.faculty_id == faculty.faculty_id), opts.series);
    let baseline = fit_piecewise(&adjust(model, &baseline_series, faculty.source)?).map_err(|source| {
        PerturbError::BaselineFit {
            faculty_id: faculty.faculty_id.clone(),
            source,
        }
    })?;
    let baseline_quadrant = classify_quadrant(baseline.m1, baseline.m2);

    let mut votes = [0usize; 4];
    let mut degenerate = 0usize;
    for trial in 0..spec.trials as u64 {
        let series = prepared.trial_series(trial, spec.sigma, opts.series);
        match fit_piecewise(&adjust(model, &series, faculty.source)?) {
            Ok(p) => votes[classify_quadrant(p.m1, p.m2).index()] += 1,
            Err(_) => degenerate += 1,
        }
    }
    Ok(StabilityReport::from_votes(
        faculty.faculty_id.clone(),
        baseline_quadrant,
        votes,
        degenerate,
        opts.threshold,
    ))
}

/// [`stability_analysis`] over a cohort, in parallel; output order follows
/// the input.
pub fn stability_cohort(
    cohort: &[(FacultyRecord, Vec<PublicationRecord>)],
    model: &AdjustmentModel,
    spec: &NoiseSpec,
    opts: &StabilityOptions,
) -> Vec<Result<StabilityReport, PerturbError>> {
    cohort
        .par_iter()
        .map(|(f, p)| stability_analysis(f, p, model, spec, opts))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub criterion: Criterion,
    pub t_star_cap: f64,
    pub series: SeriesOptions,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            criterion: Criterion::Aicc,
            t_star_cap: DEFAULT_TSTAR_CAP,
            series: SeriesOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    /// `I`..`IV` or `canonical`.
    pub region: String,
    pub count: usize,
    pub mass: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnsembleTable {
    pub total_trials: usize,
    /// Trials in which the criterion preferred the piecewise model.
    pub kept_trials: usize,
    /// Empty when no trial was kept.
    pub rows: Vec<EnsembleRow>,
}

impl EnsembleTable {
    pub fn mass(&self, region: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.region == region).map(|r| r.mass)
    }
}

#[derive(Default)]
struct Tally {
    total: usize,
    kept: usize,
    quadrants: [usize; 4],
    canonical: usize,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.total += o.total;
        self.kept += o.kept;
        self.canonical += o.canonical;
        for i in 0..4 {
            self.quadrants[i] += o.quadrants[i];
        }
        self
    }
}

/// Pools every noise-added trial of every career and reports where the
/// nonlinear ones fall. Faculty whose perturbed series cannot be adjusted
/// or fitted contribute only to `total_trials`.
pub fn ensemble_distribution(
    cohort: &[(FacultyRecord, Vec<PublicationRecord>)],
    model: &AdjustmentModel,
    spec: &NoiseSpec,
    opts: &EnsembleOptions,
) -> Result<EnsembleTable, PerturbError> {
    spec.validate()?;
    let tally = cohort
        .par_iter()
        .map(|(f, pubs)| {
            let prepared = prepare(f, pubs, spec, opts.series);
            let mut t = Tally::default();
            for trial in 0..spec.trials as u64 {
                t.total += 1;
                let series = prepared.trial_series(trial, spec.sigma, opts.series);
                let Ok(adjusted) = adjust(model, &series, f.source) else {
                    continue;
                };
                let Ok(cmp) = compare_models(&adjusted, opts.criterion) else {
                    continue;
                };
                if cmp.selection.chosen != ModelChoice::Piecewise {
                    continue;
                }
                t.kept += 1;
                let p = &cmp.piecewise;
                t.quadrants[classify_quadrant(p.m1, p.m2).index()] += 1;
                if is_canonical(p, opts.t_star_cap) {
                    t.canonical += 1;
                }
            }
            t
        })
        .reduce(Tally::default, Tally::merge);

    let mut table = EnsembleTable {
        total_trials: tally.total,
        kept_trials: tally.kept,
        rows: Vec::new(),
    };
    if tally.kept > 0 {
        let kept = tally.kept as f64;
        for q in Quadrant::ALL {
            let count = tally.quadrants[q.index()];
            table.rows.push(EnsembleRow {
                region: q.as_str().into(),
                count,
                mass: count as f64 / kept,
            });
        }
        table.rows.push(EnsembleRow {
            region: "canonical".into(),
            count: tally.canonical,
            mass: tally.canonical as f64 / kept,
        });
    }
    Ok(table)
}

//! Synthetic cohorts with known trajectories.
//!
//! Each career draws its parameters from a mixture of uniform boxes, turns
//! the piecewise trend into per-year counts under a chosen noise law,
//! optionally thins them by database coverage, and fabricates publication
//! records with author lists whose order follows a role schedule and a pool
//! of alphabetizing and non-alphabetizing venues.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::{coverage_fraction, AdjustmentModel, CalibrationError};
use crate::classify::{classify_quadrant, is_canonical_parts, Quadrant, DEFAULT_TSTAR_CAP};
use crate::ingest::{CareerSeries, FacultyRecord, Gender, PublicationRecord, Source, DEFAULT_CENSUS_YEAR};
use crate::piecewise::{Theta, TSTAR_MARGIN};
use crate::rng;

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("infeasible generator spec: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

/// Closed interval sampled uniformly; `lo == hi` is a constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    fn sample(&self, r: &mut impl Rng) -> f64 {
        self.lo + (self.hi - self.lo) * r.random::<f64>()
    }
}

/// One mixture component over `(m1, m2, b, t*)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaComponent {
    pub label: String,
    pub weight: f64,
    pub m1: Range,
    pub m2: Range,
    pub b: Range,
    pub t_star: Range,
    /// Straight line: `m2` is set equal to `m1`.
    #[serde(default)]
    pub linear: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum CountNoise {
    /// Counts are the rounded rate.
    None,
    Poisson,
    /// Gamma-Poisson with variance `mu + zeta * mu^2`.
    Negbin { zeta: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuthorshipSpec {
    pub n_venues: usize,
    /// Share of venues that list authors alphabetically.
    pub alphabetized_venue_fraction: f64,
    /// Largest author count per paper.
    pub max_authors: usize,
    /// Exactly `round(decline_fraction * n_faculty)` careers switch from
    /// mostly-first to mostly-last authorship after year 2; the rest move
    /// the other way.
    pub decline_fraction: f64,
    pub high_first: f64,
    pub low_first: f64,
}

impl Default for AuthorshipSpec {
    fn default() -> Self {
        Self {
            n_venues: 40,
            alphabetized_venue_fraction: 0.1,
            max_authors: 5,
            decline_fraction: 0.7,
            high_first: 0.85,
            low_first: 0.15,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub n_faculty: usize,
    /// Inclusive bounds on career length in years.
    pub career_length_range: (usize, usize),
    pub census_year: i32,
    pub components: Vec<ThetaComponent>,
    pub count_noise: CountNoise,
    /// Keep each publication with the coverage probability of its year and
    /// mark faculty as DBLP-sourced.
    pub apply_coverage_thinning: bool,
    /// Round `m1`, `m2`, `b` and `t*` to integers so noise-free rates are
    /// whole numbers.
    pub lattice: bool,
    pub employer_rank_range: (u32, u32),
    pub t_star_cap: f64,
    pub authorship: AuthorshipSpec,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    /// A mixed cohort: one fifth canonical, the rest spread over the other
    /// shapes.
    fn default() -> Self {
        Self {
            n_faculty: 200,
            career_length_range: (10, 25),
            census_year: DEFAULT_CENSUS_YEAR,
            components: vec![
                ThetaComponent {
                    label: "canonical".into(),
                    weight: 0.2,
                    m1: Range::new(1.0, 2.0),
                    m2: Range::new(-0.6, -0.3),
                    b: Range::new(1.0, 3.0),
                    t_star: Range::new(3.0, 7.0),
                    linear: false,
                },
                ThetaComponent {
                    label: "steep_decline".into(),
                    weight: 0.2,
                    m1: Range::new(0.8, 1.2),
                    m2: Range::new(-3.0, -2.0),
                    b: Range::new(2.0, 4.0),
                    t_star: Range::new(3.0, 6.0),
                    linear: false,
                },
                ThetaComponent {
                    label: "growth".into(),
                    weight: 0.2,
                    m1: Range::new(0.2, 0.5),
                    m2: Range::new(1.2, 2.0),
                    b: Range::new(1.0, 3.0),
                    t_star: Range::new(3.0, 7.0),
                    linear: false,
                },
                ThetaComponent {
                    label: "late_start".into(),
                    weight: 0.2,
                    m1: Range::new(-1.5, -0.8),
                    m2: Range::new(0.8, 1.5),
                    b: Range::new(8.0, 12.0),
                    t_star: Range::new(3.0, 6.0),
                    linear: false,
                },
                ThetaComponent {
                    label: "line".into(),
                    weight: 0.2,
                    m1: Range::new(0.2, 0.6),
                    m2: Range::point(0.0),
                    b: Range::new(2.0, 5.0),
                    t_star: Range::new(3.0, 7.0),
                    linear: true,
                },
            ],
            count_noise: CountNoise::Poisson,
            apply_coverage_thinning: false,
            lattice: false,
            employer_rank_range: (1, 200),
            t_star_cap: DEFAULT_TSTAR_CAP,
            authorship: AuthorshipSpec::default(),
            seed: 0,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: String| Err(GeneratorError::Infeasible(m));
        let (tmin, tmax) = self.career_length_range;
        if tmin < 1 || tmin > tmax {
            return bad(format!("career length range ({tmin}, {tmax})"));
        }
        if self.components.is_empty() {
            return bad("no mixture components".into());
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if !(total > 0.0) || self.components.iter().any(|c| !(c.weight >= 0.0)) {
            return bad("mixture weights must be nonnegative with a positive sum".into());
        }
        for c in &self.components {
            for (name, r) in [("m1", c.m1), ("m2", c.m2), ("b", c.b), ("t_star", c.t_star)] {
                if !(r.lo <= r.hi) || !r.lo.is_finite() || !r.hi.is_finite() {
                    return bad(format!("component `{}`: empty {name} range", c.label));
                }
            }
            // upper bound on the rate anywhere in the box
            let span = tmax as f64;
            let best = c.b.hi + c.m1.hi.max(0.0) * span + c.m2.hi.max(0.0) * span;
            if best <= 0.0 && c.weight > 0.0 {
                return bad(format!("component `{}` has nonpositive rates everywhere", c.label));
            }
        }
        if let CountNoise::Negbin { zeta } = self.count_noise {
            if !(zeta > 0.0 && zeta.is_finite()) {
                return bad(format!("negbin zeta {zeta}"));
            }
        }
        let (rlo, rhi) = self.employer_rank_range;
        if rlo < 1 || rlo > rhi {
            return bad(format!("rank range ({rlo}, {rhi})"));
        }
        let a = &self.authorship;
        if a.n_venues == 0 || a.max_authors < 2 {
            return bad("authorship needs at least one venue and two authors".into());
        }
        for (name, p) in [
            ("alphabetized_venue_fraction", a.alphabetized_venue_fraction),
            ("decline_fraction", a.decline_fraction),
            ("high_first", a.high_first),
            ("low_first", a.low_first),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} outside [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn n_decliners(&self) -> usize {
        ((self.authorship.decline_fraction * self.n_faculty as f64).round() as usize).min(self.n_faculty)
    }

    pub fn n_alphabetized_venues(&self) -> usize {
        let a = &self.authorship;
        ((a.alphabetized_venue_fraction * a.n_venues as f64).round() as usize).min(a.n_venues)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub faculty_id: String,
    pub label: String,
    pub m1: f64,
    pub m2: f64,
    pub b: f64,
    pub t_star: f64,
    pub quadrant: Quadrant,
    pub canonical: bool,
    pub linear: bool,
    pub career_length: usize,
    pub hire_year: i32,
    pub declining_first_author: bool,
}

impl TruthRow {
    pub fn theta(&self) -> Theta {
        Theta {
            m1: self.m1,
            m2: self.m2,
            b: self.b,
            t_star: self.t_star,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRate {
    pub faculty_id: String,
    pub career_year: usize,
    /// `f(t)` as drawn, possibly negative.
    pub unclipped: f64,
    /// `max(0, f(t))`, the mean of the count law before growth and coverage.
    pub rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GeneratedCohort {
    pub faculty: Vec<FacultyRecord>,
    pub publications: Vec<PublicationRecord>,
    pub truth: Vec<TruthRow>,
    pub rates: Vec<TruthRate>,
    /// Venue labels that list authors alphabetically.
    pub alphabetized_venues: Vec<String>,
}

impl GeneratedCohort {
    /// Noise-free (unclipped) trend of every career as a series.
    pub fn trend_series(&self) -> Vec<CareerSeries> {
        self.truth
            .iter()
            .map(|t| {
                let theta = t.theta();
                CareerSeries::new(
                    t.faculty_id.clone(),
                    t.hire_year,
                    (0..t.career_length).map(|i| theta.eval(i as f64)).collect(),
                )
            })
            .collect()
    }

    /// `(faculty, publications)` pairs in faculty order.
    pub fn cohort(&self) -> Vec<(FacultyRecord, Vec<PublicationRecord>)> {
        let mut out: Vec<(FacultyRecord, Vec<PublicationRecord>)> =
            self.faculty.iter().map(|f| (f.clone(), Vec::new())).collect();
        let index: std::collections::HashMap<&str, usize> =
            self.faculty.iter().enumerate().map(|(i, f)| (f.faculty_id.as_str(), i)).collect();
        for p in &self.publications {
            if let Some(&i) = index.get(p.faculty_id.as_str()) {
                out[i].1.push(p.clone());
            }
        }
        out
    }
}

pub fn venue_label(index: usize) -> String {
    format!("V{index:03}")
}

pub fn faculty_label(index: usize) -> String {
    format!("S{index:05}")
}

const SURNAMES: &[&str] = &[
    "Abbott", "Baker", "Castro", "Dubois", "Eriksen", "Fischer", "Garcia", "Hughes", "Ito", "Jensen",
    "Kowalski", "Larsen", "Moreau", "Nakamura", "Okafor", "Petrov", "Quinn", "Rossi", "Silva", "Tanaka",
    "Ueda", "Vargas", "Wagner", "Xu", "Yilmaz", "Zhang",
];

fn pick_component<'a>(components: &'a [ThetaComponent], r: &mut impl Rng) -> &'a ThetaComponent {
    let total: f64 = components.iter().map(|c| c.weight).sum();
    let mut u = r.random::<f64>() * total;
    for c in components {
        if u < c.weight {
            return c;
        }
        u -= c.weight;
    }
    components.iter().rev().find(|c| c.weight > 0.0).expect("positive weight")
}

fn draw_count(mean: f64, noise: CountNoise, r: &mut impl Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    match noise {
        CountNoise::None => mean.round() as u64,
        CountNoise::Poisson => Poisson::new(mean).expect("positive mean").sample(r) as u64,
        CountNoise::Negbin { zeta } => {
            let lambda = Gamma::new(1.0 / zeta, zeta * mean).expect("positive shape").sample(r);
            if lambda <= 0.0 {
                0
            } else {
                Poisson::new(lambda).expect("positive mean").sample(r) as u64
            }
        }
    }
}

struct Career {
    faculty: FacultyRecord,
    pubs: Vec<PublicationRecord>,
    truth: TruthRow,
    rates: Vec<TruthRate>,
}

fn generate_one(
    spec: &GeneratorSpec,
    model: &AdjustmentModel,
    index: usize,
    declining: bool,
    alphabetized: &[bool],
) -> Result<Career, GeneratorError> {
    let mut r = rng::stream("synthgen.faculty", &[spec.seed.into(), index.into()]);
    let id = faculty_label(index);
    let (tmin, tmax) = spec.career_length_range;
    let t_len = r.random_range(tmin..=tmax);
    let hire_year = spec.census_year - t_len as i32 + 1;

    let c = pick_component(&spec.components, &mut r);
    let mut theta = Theta {
        m1: c.m1.sample(&mut r),
        m2: c.m2.sample(&mut r),
        b: c.b.sample(&mut r),
        t_star: c.t_star.sample(&mut r),
    };
    if spec.lattice {
        theta.m1 = theta.m1.round();
        theta.m2 = theta.m2.round();
        theta.b = theta.b.round();
        theta.t_star = theta.t_star.round();
    }
    if c.linear {
        theta.m2 = theta.m1;
    }
    // keep t* where the fit can place it
    let hi = (t_len as f64 - 1.0 - TSTAR_MARGIN).max(TSTAR_MARGIN);
    let clamp_lo = if spec.lattice { 2.0 } else { TSTAR_MARGIN };
    let clamp_hi = if spec.lattice { hi.floor() } else { hi };
    theta.t_star = theta.t_star.clamp(clamp_lo.min(clamp_hi), clamp_hi);

    let (rlo, rhi) = spec.employer_rank_range;
    let faculty = FacultyRecord {
        faculty_id: id.clone(),
        hire_year,
        doctoral_rank: r.random_range(rlo..=rhi),
        employer_rank: r.random_range(rlo..=rhi),
        is_private: r.random_bool(0.5),
        gender: if r.random_bool(0.5) { Gender::F } else { Gender::M },
        had_postdoc: r.random_bool(0.3),
        source: if spec.apply_coverage_thinning {
            Source::DBLP
        } else {
            Source::CV
        },
    };

    let a = &spec.authorship;
    let focal_surname = SURNAMES[r.random_range(0..SURNAMES.len())];
    let mut pubs = Vec::new();
    let mut rates = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let year = hire_year + t as i32;
        let unclipped = theta.eval(t as f64);
        let rate = unclipped.max(0.0);
        rates.push(TruthRate {
            faculty_id: id.clone(),
            career_year: t,
            unclipped,
            rate,
        });
        let mean = rate * model.growth_ratio(year)?;
        let n = draw_count(mean, spec.count_noise, &mut r);
        let keep = if spec.apply_coverage_thinning {
            coverage_fraction(model, year)?.min(1.0)
        } else {
            1.0
        };
        let p_first = match (declining, t < 3) {
            (true, true) | (false, false) => a.high_first,
            _ => a.low_first,
        };
        for j in 0..n {
            if keep < 1.0 && !r.random_bool(keep) {
                continue;
            }
            let venue = r.random_range(0..a.n_venues);
            let first = r.random_bool(p_first);
            let m = if first {
                r.random_range(1..=a.max_authors)
            } else {
                r.random_range(2..=a.max_authors)
            };
            let focal = if first {
                0
            } else if m == 2 || r.random_bool(0.7) {
                m - 1
            } else {
                r.random_range(1..m - 1)
            };
            let mut coauthors: Vec<&str> = SURNAMES.choose_multiple(&mut r, m - 1).copied().collect();
            coauthors.shuffle(&mut r);
            let mut authors: Vec<String> = coauthors.into_iter().map(|s| format!("{} {s}", initial(&mut r))).collect();
            let focal_name = format!("{} {focal_surname}", initial(&mut r));
            authors.insert(focal, focal_name.clone());
            let mut focal_index = focal;
            if alphabetized[venue] {
                authors.sort_by_key(|n| crate::authorship::surname_key(n));
                focal_index = authors.iter().position(|n| *n == focal_name).expect("focal present");
            }
            pubs.push(PublicationRecord {
                pub_id: format!("{id}-{t:02}-{j:03}"),
                faculty_id: id.clone(),
                year,
                venue: venue_label(venue),
                authors,
                focal_index,
            });
        }
    }

    let truth = TruthRow {
        faculty_id: id,
        label: c.label.clone(),
        m1: theta.m1,
        m2: theta.m2,
        b: theta.b,
        t_star: theta.t_star,
        quadrant: classify_quadrant(theta.m1, theta.m2),
        canonical: is_canonical_parts(theta.m1, theta.m2, theta.t_star, spec.t_star_cap),
        linear: c.linear,
        career_length: t_len,
        hire_year,
        declining_first_author: declining,
    };
    Ok(Career {
        faculty,
        pubs,
        truth,
        rates,
    })
}

fn initial(r: &mut ChaCha8Rng) -> String {
    let c = (b'A' + r.random_range(0..26u8)) as char;
    format!("{c}.")
}

/// Generates `spec.n_faculty` careers. The adjustment model supplies growth
/// (and coverage, when thinning): counts are drawn on the CV scale with
/// mean `max(0, f(t)) * growth_ratio(year)`.
pub fn generate_cohort(spec: &GeneratorSpec, model: &AdjustmentModel) -> Result<GeneratedCohort, GeneratorError> {
    spec.validate()?;
    let n_alpha = spec.n_alphabetized_venues();
    let mut venue_order: Vec<usize> = (0..spec.authorship.n_venues).collect();
    venue_order.shuffle(&mut rng::stream("synthgen.venues", &[spec.seed.into()]));
    let mut alphabetized = vec![false; spec.authorship.n_venues];
    for &v in &venue_order[..n_alpha] {
        alphabetized[v] = true;
    }
    let mut decliners: Vec<bool> = (0..spec.n_faculty).map(|i| i < spec.n_decliners()).collect();
    decliners.shuffle(&mut rng::stream("synthgen.roles", &[spec.seed.into()]));

    let careers = (0..spec.n_faculty)
        .into_par_iter()
        .map(|i| generate_one(spec, model, i, decliners[i], &alphabetized))
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = GeneratedCohort {
        alphabetized_venues: (0..spec.authorship.n_venues)
            .filter(|&v| alphabetized[v])
            .map(venue_label)
            .collect(),
        ..Default::default()
    };
    for c in careers {
        out.faculty.push(c.faculty);
        out.publications.extend(c.pubs);
        out.truth.push(c.truth);
        out.rates.extend(c.rates);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::adjust;
    use crate::ingest::{build_series, check_integrity, Corpus, SeriesOptions};
    use crate::piecewise::fit_piecewise;
    use proptest::prelude::*;

    fn single(label: &str, m1: Range, m2: Range, b: Range, t_star: Range, linear: bool) -> Vec<ThetaComponent> {
        vec![ThetaComponent {
            label: label.into(),
            weight: 1.0,
            m1,
            m2,
            b,
            t_star,
            linear,
        }]
    }

    #[test]
    fn default_spec_generates_consistent_records() {
        let spec = GeneratorSpec {
            n_faculty: 30,
            seed: 5,
            ..Default::default()
        };
        let g = generate_cohort(&spec, &AdjustmentModel::published()).unwrap();
        assert_eq!(g.faculty.len(), 30);
        let corpus = Corpus {
            faculty: g.faculty.clone(),
            publications: g.publications.clone(),
        };
        check_integrity(&corpus).unwrap();
        for (t, f) in g.truth.iter().zip(&g.faculty) {
            assert_eq!(t.quadrant, classify_quadrant(t.m1, t.m2));
            assert_eq!(f.hire_year + t.career_length as i32 - 1, spec.census_year);
        }
        for p in &g.publications {
            assert!(p.focal_index < p.authors.len());
        }
    }

    #[test]
    fn generation_is_reproducible_and_seed_sensitive() {
        let spec = GeneratorSpec {
            n_faculty: 10,
            seed: 1,
            ..Default::default()
        };
        let model = AdjustmentModel::identity();
        let a = generate_cohort(&spec, &model).unwrap();
        assert_eq!(a, generate_cohort(&spec, &model).unwrap());
        let b = generate_cohort(&GeneratorSpec { seed: 2, ..spec }, &model).unwrap();
        assert_ne!(a.publications, b.publications);
    }

    #[test]
    fn lattice_noise_free_pipeline_reproduces_truth() {
        let spec = GeneratorSpec {
            n_faculty: 40,
            career_length_range: (10, 14),
            components: single(
                "kink",
                Range::new(1.0, 3.0),
                Range::new(-1.0, -0.5),
                Range::new(10.0, 12.0),
                Range::new(3.0, 8.0),
                false,
            ),
            count_noise: CountNoise::None,
            lattice: true,
            seed: 3,
            ..Default::default()
        };
        let model = AdjustmentModel::identity();
        let g = generate_cohort(&spec, &model).unwrap();
        for ((f, pubs), truth) in g.cohort().iter().zip(&g.truth) {
            let s = adjust(&model, &build_series(f, pubs, SeriesOptions::default()), f.source).unwrap();
            let fit = fit_piecewise(&s).unwrap();
            assert!((fit.m1 - truth.m1).abs() < 1e-6, "{fit:?} vs {truth:?}");
            assert!((fit.m2 - truth.m2).abs() < 1e-6);
            assert!((fit.t_star - truth.t_star).abs() < 1e-4);
            assert_eq!(classify_quadrant(fit.m1, fit.m2), truth.quadrant);
        }
    }

    #[test]
    fn poisson_mean() {
        let spec = GeneratorSpec {
            n_faculty: 500,
            career_length_range: (20, 20),
            components: single("flat", Range::point(0.0), Range::point(0.0), Range::point(3.0), Range::point(5.0), true),
            seed: 11,
            ..Default::default()
        };
        let g = generate_cohort(&spec, &AdjustmentModel::identity()).unwrap();
        let years = (spec.n_faculty * 20) as f64;
        let mean = g.publications.len() as f64 / years;
        assert!((mean - 3.0).abs() < 3.0 * (3.0 / years).sqrt(), "mean {mean}");
    }

    #[test]
    fn negbin_variance() {
        let zeta = 0.5;
        let spec = GeneratorSpec {
            n_faculty: 500,
            career_length_range: (20, 20),
            components: single("flat", Range::point(0.0), Range::point(0.0), Range::point(4.0), Range::point(5.0), true),
            count_noise: CountNoise::Negbin { zeta },
            seed: 12,
            ..Default::default()
        };
        let g = generate_cohort(&spec, &AdjustmentModel::identity()).unwrap();
        let series: Vec<CareerSeries> = g
            .cohort()
            .iter()
            .map(|(f, p)| build_series(f, p, SeriesOptions::default()))
            .collect();
        let ys: Vec<f64> = series.iter().flat_map(|s| s.counts.clone()).collect();
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // target variance 4 + 0.5 * 16 = 12
        assert!((mean - 4.0).abs() < 0.15, "mean {mean}");
        assert!((var - 12.0).abs() < 1.5, "var {var}");
    }

    #[test]
    fn thinning_ratio_matches_coverage() {
        let model = AdjustmentModel::published();
        let spec = GeneratorSpec {
            n_faculty: 300,
            career_length_range: (10, 10),
            components: single("flat", Range::point(0.0), Range::point(0.0), Range::point(20.0), Range::point(5.0), true),
            count_noise: CountNoise::None,
            apply_coverage_thinning: true,
            seed: 13,
            ..Default::default()
        };
        let g = generate_cohort(&spec, &model).unwrap();
        let mut latent = 0.0;
        let mut expected_kept = 0.0;
        for f in &g.faculty {
            for t in 0..10 {
                let year = f.hire_year + t;
                let m = (20.0 * model.growth_ratio(year).unwrap()).round();
                latent += m;
                expected_kept += m * coverage_fraction(&model, year).unwrap();
            }
        }
        let observed = g.publications.len() as f64;
        let p = expected_kept / latent;
        let se = (latent * p * (1.0 - p)).sqrt();
        assert!((observed - expected_kept).abs() < 4.0 * se);
        assert!(g.faculty.iter().all(|f| f.source == Source::DBLP));
    }

    #[test]
    fn decliner_count_is_exact() {
        let spec = GeneratorSpec {
            n_faculty: 33,
            seed: 4,
            ..Default::default()
        };
        let g = generate_cohort(&spec, &AdjustmentModel::identity()).unwrap();
        let n = g.truth.iter().filter(|t| t.declining_first_author).count();
        assert_eq!(n, (0.7f64 * 33.0).round() as usize);
    }

    #[test]
    fn alphabetized_venues_sort_authors() {
        let spec = GeneratorSpec {
            n_faculty: 20,
            seed: 6,
            ..Default::default()
        };
        let g = generate_cohort(&spec, &AdjustmentModel::identity()).unwrap();
        assert_eq!(g.alphabetized_venues.len(), 4);
        for p in g.publications.iter().filter(|p| g.alphabetized_venues.contains(&p.venue)) {
            assert!(crate::authorship::is_alphabetized(&p.authors).unwrap());
        }
    }

    #[test]
    fn infeasible_specs() {
        let spec = GeneratorSpec {
            components: single("neg", Range::new(-2.0, -1.0), Range::new(-2.0, -1.0), Range::new(-5.0, -1.0), Range::point(5.0), false),
            ..GeneratorSpec::default()
        };
        assert!(generate_cohort(&spec, &AdjustmentModel::identity()).is_err());
        let spec = GeneratorSpec {
            career_length_range: (12, 10),
            ..Default::default()
        };
        assert!(spec.validate().is_err());
        let spec = GeneratorSpec {
            components: vec![],
            ..Default::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = GeneratorSpec::default();
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<GeneratorSpec>(&json).unwrap(), spec);
        let partial: GeneratorSpec = serde_json::from_str(r#"{"n_faculty": 7}"#).unwrap();
        assert_eq!(partial.n_faculty, 7);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn truth_agrees_with_classification(seed in any::<u64>()) {
            let spec = GeneratorSpec { n_faculty: 25, seed, ..Default::default() };
            let g = generate_cohort(&spec, &AdjustmentModel::identity()).unwrap();
            for t in &g.truth {
                prop_assert_eq!(t.quadrant, classify_quadrant(t.m1, t.m2));
                prop_assert_eq!(t.canonical, is_canonical_parts(t.m1, t.m2, t.t_star, spec.t_star_cap));
            }
            for r in &g.rates {
                prop_assert!(r.rate >= 0.0);
                prop_assert_eq!(r.rate, r.unclipped.max(0.0));
            }
        }
    }
}

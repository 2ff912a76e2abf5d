//! Author-order conventions: detection of venues that list authors
//! alphabetically, and first/last-author roles over a career.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::Rng;
use rand_distr::Binomial;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::classify::assign_strata;
use crate::ingest::{FacultyRecord, PublicationRecord, SeriesOptions};
use crate::rng;

pub const DEFAULT_ALPHA_LEVEL: f64 = 0.05;
pub const DEFAULT_RATIO_THRESHOLD: f64 = 2.0;
pub const DEFAULT_MC_DRAWS: usize = 100_000;
/// Venues with more multi-author papers than this use simulation.
pub const EXACT_LIMIT: usize = 10_000;
/// Beyond this author count 1/M! is below double precision and taken as 0.
pub const MAX_FACTORIAL_M: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum AuthorshipError {
    #[error("publication {pub_id}: author name at position {position} is empty")]
    EmptyName { pub_id: String, position: usize },
    #[error("venue `{0}` has no multi-author papers")]
    NoData(String),
    #[error("career of {faculty_id} spans {years} years; role transitions need more than 6")]
    CareerTooShort { faculty_id: String, years: usize },
}

/// Sort key for a name: the part before a comma ("Adams, B.") or else the
/// last whitespace-delimited token, with diacritics stripped, case folded
/// and punctuation other than hyphens dropped.
pub fn surname_key(name: &str) -> Option<String> {
    let raw = match name.split_once(',') {
        Some((before, _)) => before.split_whitespace().last(),
        None => name.split_whitespace().last(),
    }?;
    let key: String = raw
        .nfd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .filter(|c| c.is_alphanumeric() || *c == '-')
        .collect();
    (!key.is_empty()).then_some(key)
}

fn keys(authors: &[String], pub_id: &str) -> Result<Vec<String>, AuthorshipError> {
    authors
        .iter()
        .enumerate()
        .map(|(position, a)| {
            surname_key(a).ok_or_else(|| AuthorshipError::EmptyName {
                pub_id: pub_id.into(),
                position,
            })
        })
        .collect()
}

/// Whether surname keys are in nondecreasing order; equal keys count as
/// ordered.
pub fn is_alphabetized(authors: &[String]) -> Result<bool, AuthorshipError> {
    let k = keys(authors, "")?;
    Ok(k.windows(2).all(|w| w[0] <= w[1]))
}

/// Probability that `m` authors are alphabetized by chance.
pub fn chance_alphabetized(m: usize) -> f64 {
    if m > MAX_FACTORIAL_M {
        return 0.0;
    }
    (2..=m).fold(1.0, |p, k| p / k as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMode {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VenueTestOptions {
    pub alpha_level: f64,
    pub ratio_threshold: f64,
    /// `None` picks exact up to [`EXACT_LIMIT`] papers.
    pub mode: Option<TestMode>,
    pub mc_draws: usize,
    pub seed: u64,
}

impl Default for VenueTestOptions {
    fn default() -> Self {
        Self {
            alpha_level: DEFAULT_ALPHA_LEVEL,
            ratio_threshold: DEFAULT_RATIO_THRESHOLD,
            mode: None,
            mc_draws: DEFAULT_MC_DRAWS,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VenueOrderStats {
    pub venue: String,
    pub n_multi: usize,
    pub n_alpha: usize,
    pub expected_alpha: f64,
    pub p_value: f64,
    pub flagged: bool,
}

/// `P(K >= k)` for a sum of independent Bernoulli(`probs[j]`).
pub fn poisson_binomial_tail(probs: &[f64], k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let live: Vec<f64> = probs.iter().copied().filter(|&p| p > 0.0).collect();
    if k > live.len() {
        return 0.0;
    }
    let mut dist = vec![0.0; live.len() + 1];
    dist[0] = 1.0;
    for (j, &p) in live.iter().enumerate() {
        for i in (1..=j + 1).rev() {
            dist[i] = dist[i] * (1.0 - p) + dist[i - 1] * p;
        }
        dist[0] *= 1.0 - p;
    }
    // small terms first
    dist[k..].iter().rev().sum::<f64>().min(1.0)
}

/// Simulated `P(K >= k)`, drawing per-author-count binomials.
pub fn poisson_binomial_tail_mc(author_counts: &[usize], k: usize, draws: usize, rng: &mut impl Rng) -> f64 {
    let mut by_m: BTreeMap<usize, u64> = BTreeMap::new();
    for &m in author_counts {
        if chance_alphabetized(m) > 0.0 {
            *by_m.entry(m).or_default() += 1;
        }
    }
    let laws: Vec<Binomial> = by_m
        .iter()
        .map(|(&m, &n)| Binomial::new(n, chance_alphabetized(m)).expect("valid binomial"))
        .collect();
    let hits = (0..draws)
        .filter(|_| laws.iter().map(|b| rng.sample(b)).sum::<u64>() as usize >= k)
        .count();
    hits as f64 / draws as f64
}

/// Tests one venue's multi-author papers against the chance model.
/// Single-author papers are ignored.
pub fn venue_test(
    venue: &str,
    papers: &[&PublicationRecord],
    opts: &VenueTestOptions,
) -> Result<VenueOrderStats, AuthorshipError> {
    let mut counts = Vec::new();
    let mut n_alpha = 0;
    for p in papers.iter().filter(|p| p.authors.len() >= 2) {
        let k = keys(&p.authors, &p.pub_id)?;
        if k.windows(2).all(|w| w[0] <= w[1]) {
            n_alpha += 1;
        }
        counts.push(p.authors.len());
    }
    if counts.is_empty() {
        return Err(AuthorshipError::NoData(venue.into()));
    }
    let probs: Vec<f64> = counts.iter().map(|&m| chance_alphabetized(m)).collect();
    let expected_alpha: f64 = probs.iter().sum();
    let mode = opts.mode.unwrap_or(if counts.len() <= EXACT_LIMIT {
        TestMode::Exact
    } else {
        TestMode::MonteCarlo
    });
    let p_value = match mode {
        TestMode::Exact => poisson_binomial_tail(&probs, n_alpha),
        TestMode::MonteCarlo => {
            let mut r = rng::stream("authorship.venue", &[opts.seed.into(), venue.into()]);
            poisson_binomial_tail_mc(&counts, n_alpha, opts.mc_draws.max(1), &mut r)
        }
    };
    Ok(VenueOrderStats {
        venue: venue.into(),
        n_multi: counts.len(),
        n_alpha,
        expected_alpha,
        p_value,
        flagged: p_value < opts.alpha_level && n_alpha as f64 >= opts.ratio_threshold * expected_alpha,
    })
}

/// Runs [`venue_test`] on every venue with multi-author papers, in venue
/// order. A paper listed under several faculty is counted once.
pub fn detect_alphabetized_venues(
    pubs: &[PublicationRecord],
    opts: &VenueTestOptions,
) -> Result<Vec<VenueOrderStats>, AuthorshipError> {
    let mut seen = HashSet::new();
    let mut by_venue: BTreeMap<&str, Vec<&PublicationRecord>> = BTreeMap::new();
    for p in pubs {
        if p.authors.len() >= 2 && seen.insert(p.pub_id.as_str()) {
            by_venue.entry(p.venue.as_str()).or_default().push(p);
        }
    }
    by_venue
        .into_iter()
        .map(|(venue, papers)| venue_test(venue, &papers, opts))
        .collect()
}

pub fn flagged_set(stats: &[VenueOrderStats]) -> HashSet<String> {
    stats.iter().filter(|s| s.flagged).map(|s| s.venue.clone()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// First of several authors, or sole author.
    First,
    Last,
    Middle,
}

pub fn role_of(p: &PublicationRecord) -> Role {
    if p.focal_index == 0 {
        Role::First
    } else if p.focal_index + 1 == p.authors.len() {
        Role::Last
    } else {
        Role::Middle
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RoleYear {
    pub career_year: usize,
    pub n_papers: usize,
    /// `None` when the year has no counted papers.
    pub frac_first: Option<f64>,
    pub frac_last: Option<f64>,
}

#[derive(Clone, Copy, Default)]
struct RoleTally {
    first: usize,
    last: usize,
    total: usize,
}

impl RoleTally {
    fn add(&mut self, role: Role) {
        self.total += 1;
        match role {
            Role::First => self.first += 1,
            Role::Last => self.last += 1,
            Role::Middle => {}
        }
    }

    fn fractions(&self) -> (Option<f64>, Option<f64>) {
        if self.total == 0 {
            return (None, None);
        }
        let n = self.total as f64;
        (Some(self.first as f64 / n), Some(self.last as f64 / n))
    }
}

fn career_span(faculty: &FacultyRecord, opts: SeriesOptions) -> usize {
    (opts.census_year - faculty.hire_year + 1).max(0) as usize
}

fn tally_years(
    faculty: &FacultyRecord,
    pubs: &[PublicationRecord],
    flagged: &HashSet<String>,
) -> BTreeMap<usize, RoleTally> {
    let mut years: BTreeMap<usize, RoleTally> = BTreeMap::new();
    for p in pubs {
        if p.faculty_id != faculty.faculty_id || flagged.contains(&p.venue) || p.year < faculty.hire_year {
            continue;
        }
        years.entry((p.year - faculty.hire_year) as usize).or_default().add(role_of(p));
    }
    years
}

/// First- and last-author fractions for each career year from hire through
/// the census (or the last publication, if later). Publications in flagged
/// venues are left out.
pub fn role_series(
    faculty: &FacultyRecord,
    pubs: &[PublicationRecord],
    flagged: &HashSet<String>,
    opts: SeriesOptions,
) -> Vec<RoleYear> {
    let years = tally_years(faculty, pubs, flagged);
    let span = career_span(faculty, opts).max(years.keys().next_back().map_or(0, |&t| t + 1));
    (0..span)
        .map(|t| {
            let tally = years.get(&t).copied().unwrap_or_default();
            let (frac_first, frac_last) = tally.fractions();
            RoleYear {
                career_year: t,
                n_papers: tally.total,
                frac_first,
                frac_last,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoleFractions {
    pub faculty_id: String,
    /// Career years 0-2 pooled.
    pub frac_first_early: f64,
    /// Career years 3-5 pooled.
    pub frac_first_late: f64,
    pub transitioned: bool,
}

/// First-author share early versus a little later in the career. `Ok(None)`
/// when either window has no counted papers.
pub fn transition_fractions(
    faculty: &FacultyRecord,
    pubs: &[PublicationRecord],
    flagged: &HashSet<String>,
    opts: SeriesOptions,
) -> Result<Option<RoleFractions>, AuthorshipError> {
    let span = career_span(faculty, opts);
    if span <= 6 {
        return Err(AuthorshipError::CareerTooShort {
            faculty_id: faculty.faculty_id.clone(),
            years: span,
        });
    }
    let years = tally_years(faculty, pubs, flagged);
    let pooled = |range: std::ops::Range<usize>| {
        let mut t = RoleTally::default();
        for y in range {
            if let Some(v) = years.get(&y) {
                t.first += v.first;
                t.last += v.last;
                t.total += v.total;
            }
        }
        t.fractions().0
    };
    let (Some(early), Some(late)) = (pooled(0..3), pooled(3..6)) else {
        return Ok(None);
    };
    Ok(Some(RoleFractions {
        faculty_id: faculty.faculty_id.clone(),
        frac_first_early: early,
        frac_first_late: late,
        transitioned: early > late,
    }))
}

/// Share of defined [`RoleFractions`] that transitioned.
pub fn transition_rate<'a>(fractions: impl IntoIterator<Item = &'a RoleFractions>) -> Option<f64> {
    let (mut n, mut k) = (0usize, 0usize);
    for f in fractions {
        n += 1;
        k += f.transitioned as usize;
    }
    (n > 0).then(|| k as f64 / n as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoleCurvePoint {
    pub stratum: usize,
    pub career_year: usize,
    pub mean_frac_first: f64,
    pub mean_frac_last: f64,
    /// Faculty with at least one counted paper that year.
    pub n: usize,
}

/// Per-stratum mean of individual first/last fractions by career year.
pub fn role_curves(
    faculty: &[FacultyRecord],
    pubs: &[PublicationRecord],
    flagged: &HashSet<String>,
    edges: &[f64],
    opts: SeriesOptions,
) -> Vec<RoleCurvePoint> {
    let mut by_faculty: HashMap<&str, Vec<PublicationRecord>> = HashMap::new();
    for p in pubs {
        by_faculty.entry(p.faculty_id.as_str()).or_default().push(p.clone());
    }
    let strata = assign_strata(faculty, edges);
    let mut sums: BTreeMap<(usize, usize), (f64, f64, usize)> = BTreeMap::new();
    for (f, &stratum) in faculty.iter().zip(&strata) {
        let own = by_faculty.get(f.faculty_id.as_str()).map_or(&[][..], |v| v.as_slice());
        for y in role_series(f, own, flagged, opts) {
            if let (Some(a), Some(b)) = (y.frac_first, y.frac_last) {
                let e = sums.entry((stratum, y.career_year)).or_default();
                e.0 += a;
                e.1 += b;
                e.2 += 1;
            }
        }
    }
    sums.into_iter()
        .map(|((stratum, career_year), (a, b, n))| RoleCurvePoint {
            stratum,
            career_year,
            mean_frac_first: a / n as f64,
            mean_frac_last: b / n as f64,
            n,
        })
        .collect()
}

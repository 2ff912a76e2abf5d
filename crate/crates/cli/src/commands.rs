use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use log::warn;
use prodtraj::authorship::{self, TestMode, VenueTestOptions};
use prodtraj::calibrate::{self, adjust};
use prodtraj::classify::{self, CohortMember, PopulationSummary, Quadrant};
use prodtraj::countmodels::{self, CountData, CountFitRow};
use prodtraj::ingest::{
    self, build_series, eligible_for_fit, EligibilityRule, SeriesOptions,
};
use prodtraj::inequality;
use prodtraj::perturb::{self, EnsembleOptions, NoiseSpec, StabilityOptions, StabilityRow};
use prodtraj::piecewise::{self, compare_models, select_from_fits};
use prodtraj::synthgen::{self, GeneratorSpec, TruthRow};
use prodtraj::{AdjustmentModel, CareerSeries, Criterion, FacultyRecord, ModelChoice, PublicationRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::*;
use crate::error::{CliError, Result};
use crate::output::{Outputs, RunMetadata};
use crate::report;

pub fn run(cmd: &Command) -> Result<()> {
    let config = serde_json::to_value(cmd)
        .ok()
        .and_then(|v| v.get(cmd.name()).cloned())
        .unwrap_or(Value::Null);
    let mut meta = RunMetadata::new(cmd.name(), config);
    let default_dir = match cmd {
        Command::Report(a) => a.in_dir.clone(),
        _ => PathBuf::from("."),
    };
    let dir = cmd.common().out_dir.clone().unwrap_or(default_dir);
    let mut out = Outputs::new(&dir)?;
    match cmd {
        Command::Calibrate(a) => calibrate_cmd(a, &mut out, &mut meta)?,
        Command::Fit(a) => fit_cmd(a, &mut out, &mut meta)?,
        Command::Select(a) => select_cmd(a, &mut out, &mut meta)?,
        Command::Classify(a) => classify_cmd(a, &mut out, &mut meta)?,
        Command::Stability(a) => stability_cmd(a, &mut out, &mut meta)?,
        Command::Ensemble(a) => ensemble_cmd(a, &mut out, &mut meta)?,
        Command::Gini(a) => gini_cmd(a, &mut out, &mut meta)?,
        Command::Authorship(a) => authorship_cmd(a, &mut out, &mut meta)?,
        Command::Curves(a) => curves_cmd(a, &mut out, &mut meta)?,
        Command::Medians(a) => medians_cmd(a, &mut out, &mut meta)?,
        Command::Simulate(a) => simulate_cmd(a, &mut out, &mut meta)?,
        Command::Report(a) => report::compose(&a.in_dir, &mut out, &mut meta)?,
    }
    out.finish(meta)
}

fn usage(msg: impl ToString) -> CliError {
    CliError::Usage(msg.to_string())
}

fn resolve_model(args: &ModelArgs, meta: &mut RunMetadata) -> Result<AdjustmentModel> {
    let mut model = match &args.model {
        Some(p) => AdjustmentModel::load(p).map_err(|e| CliError::file(p, e))?,
        None => AdjustmentModel::published(),
    };
    if let Some(y) = args.reference_year {
        model.reference_year = y;
    }
    if let Some(n) = args.normalize_growth {
        model.normalize_growth = n;
    }
    if model.normalize_growth {
        model
            .growth_form(model.reference_year)
            .map_err(|e| usage(format!("reference year {}: {e}", model.reference_year)))?;
    }
    meta.decide("adjustment_model", serde_json::to_value(&model).unwrap_or(Value::Null));
    meta.decide("growth_normalized_at_reference_year", model.normalize_growth);
    Ok(model)
}

fn series_options(c: &CorpusArgs) -> SeriesOptions {
    SeriesOptions {
        census_year: c.census_year,
        include_prehire: false,
    }
}

fn series_decisions(meta: &mut RunMetadata, opts: SeriesOptions) {
    meta.decide("census_year", opts.census_year);
    meta.decide("prehire_publications", "dropped");
}

struct Career {
    faculty: FacultyRecord,
    pubs: Vec<PublicationRecord>,
    raw: CareerSeries,
    adjusted: CareerSeries,
}

/// Loads the corpus and builds adjusted series. Careers outside the
/// calibration domain are skipped with a warning; with `rule` set, so are
/// those the rule rejects.
fn load_careers(
    corpus: &CorpusArgs,
    model: &AdjustmentModel,
    rule: Option<EligibilityRule>,
    meta: &mut RunMetadata,
) -> Result<Vec<Career>> {
    let loaded = ingest::load_corpus(&corpus.faculty, &corpus.pubs)?;
    let opts = series_options(corpus);
    series_decisions(meta, opts);
    if let Some(r) = rule {
        meta.decide("eligibility", serde_json::to_value(r).unwrap_or(Value::Null));
    }
    meta.count("faculty_loaded", loaded.faculty.len());
    meta.count("publications_loaded", loaded.publications.len());
    let (mut ineligible, mut out_of_domain) = (0, 0);
    let mut careers = Vec::new();
    for (faculty, pubs) in loaded.cohort() {
        let raw = build_series(&faculty, &pubs, opts);
        if rule.is_some_and(|r| !eligible_for_fit(&raw, r)) {
            ineligible += 1;
            continue;
        }
        match adjust(model, &raw, faculty.source) {
            Ok(adjusted) => careers.push(Career {
                faculty,
                pubs,
                raw,
                adjusted,
            }),
            Err(e) => {
                warn!("{}: {e}; skipped", faculty.faculty_id);
                out_of_domain += 1;
            }
        }
    }
    if rule.is_some() {
        meta.count("faculty_ineligible", ineligible);
    }
    meta.count("faculty_outside_calibration_domain", out_of_domain);
    meta.count("faculty_analyzed", careers.len());
    Ok(careers)
}

fn fit_decisions(meta: &mut RunMetadata) {
    meta.decide("tstar_window_margin", piecewise::TSTAR_MARGIN);
    meta.decide("tstar_coarse_step", piecewise::COARSE_STEP);
    meta.decide("tstar_refine_rounds", piecewise::REFINE_ROUNDS);
    meta.decide("criterion_ties", "line");
    meta.decide("parameters_line_piecewise", json!([piecewise::K_LINE, piecewise::K_PIECEWISE]));
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CoverageYear {
    year: i32,
    dblp_count: u64,
    cv_count: u64,
    ratio: f64,
    fitted: f64,
}

fn calibrate_cmd(a: &CalibrateArgs, out: &mut Outputs, meta: &mut RunMetadata) -> Result<()> {
    let pairs = calibrate::read_benchmarks(&a.benchmarks)?;
    let fit = calibrate::fit_coverage(&pairs).map_err(|e| CliError::file(&a.benchmarks, e))?;
    let model = resolve_model(&a.model, meta)?.with_coverage(fit.m_alpha, fit.b_alpha);
    meta.decide("coverage_aggregation", "counts summed per calendar year before the ratio");
    meta.count("benchmark_pairs", pairs.len());

    let mut per_year: BTreeMap<i32, (u64, u64)> = BTreeMap::new();
    for p in &pairs {
        let e = per_year.entry(p.year).or_default();
        e.0 += u64::from(p.dblp_count);
        e.1 += u64::from(p.cv_count);
    }
    let years: Vec<CoverageYear> = per_year
        .into_iter()
        .map(|(year, (dblp, cv))| CoverageYear {
            year,
            dblp_count: dblp,
            cv_count: cv,
            ratio: dblp as f64 / cv as f64,
            fitted: fit.m_alpha * year as f64 + fit.b_alpha,
        })
        .collect();
    out.json("adjustment_model.json", &model)?;
    out.json("coverage_fit.json", &fit)?;
    out.csv("coverage_by_year.csv", &["year", "dblp_count", "cv_count", "ratio", "fitted"], &years)
}

/// The fit export: the documented columns plus the career length the
/// change-point tables need.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct FitExport {
    faculty_id: String,
    m1: f64,
    m2: f64,
    b: f64,
    t_star: f64,
    sse: f64,
    sse_line: f64,
    chosen_model: ModelChoice,
    criterion: Criterion,
    career_length: usize,
}

impl FitExport {
    fn params(&self) -> prodtraj::PiecewiseParams {
        prodtraj::PiecewiseParams {
            m1: self.m1,
            m2: self.m2,
            b: self.b,
            t_star: self.t_star,
            sse: self.sse,
        }
    }
}

const FIT_HEADER: &[&str] = &[
    "faculty_id", "m1", "m2", "b", "t_star", "sse", "sse_line", "chosen_model", "criterion", "career_length",
];

fn fit_cmd(a: &FitArgs, out: &mut Outputs, meta: &mut RunMetadata) -> Result<()> {
    let model = resolve_model(&a.model, meta)?;
    let careers = load_careers(&a.corpus, &model, Some(EligibilityRule::default()), meta)?;
    let criterion: Criterion = a.criterion.into();
    fit_decisions(meta);

    let fitted: Vec<Option<FitExport>> = careers
        .par_iter()
        .map(|c| match compare_models(&c.adjusted, criterion) {
            Ok(cmp) => {
                let row = piecewise::FitRow::new(&c.faculty.faculty_id, &cmp);
                Some(FitExport {
                    faculty_id: row.faculty_id,
                    m1: row.m1,
                    m2: row.m2,
                    b: row.b,
                    t_star: row.t_star,
                    sse: row.sse,
                    sse_line: row.sse_line,
                    chosen_model: row.chosen_model,
                    criterion: row.criterion,
                    career_length: c.adjusted.career_length(),
                })
            }
            Err(e) => {
                warn!("{}: {e}; no fit", c.faculty.faculty_id);
                None
            }
        })
        .collect();
    let failures = fitted.iter().filter(|r| r.is_none()).count();
    let rows: Vec<FitExport> = fitted.into_iter().flatten().collect();
    meta.count("fit_failures", failures);
    out.csv("fits.csv", FIT_HEADER, &rows)?;

    if let Some(family) = a.count_family {
        let family = family.into();
        meta.decide("count_convergence_tol", countmodels::CONVERGENCE_TOL);
        meta.decide("count_zeta_bounds", json!([countmodels::ZETA_MIN, countmodels::ZETA_MAX]));
        meta.decide("count_optimizer", "Fisher scoring per change point inside the change-point search");
        let fits: Vec<Option<CountFitRow>> = careers
            .par_iter()
            .map(|c| {
                let result = CountData::from_series_for_source(&c.raw, &model, c.faculty.source)
                    .map_err(countmodels::CountError::from)
                    .and_then(|d| countmodels::fit_count_data(&d, family));
                match result {
                    Ok(f) => Some(CountFitRow::new(&c.faculty.faculty_id, &f)),
                    Err(e) => {
                        warn!("{}: count fit failed: {e}", c.faculty.faculty_id);
                        None
                    }
                }
            })
            .collect();
        meta.count("count_fit_failures", fits.iter().filter(|r| r.is_none()).count());
        let rows: Vec<CountFitRow> = fits.into_iter().flatten().collect();
        out.csv(
            "count_fits.csv",
            &["faculty_id", "family", "m1", "m2", "b", "t_star", "zeta", "log_score", "converged"],
            &rows,
        )?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SelectionRow {
    faculty_id: String,
    criterion: Criterion,
    score_line: f64,
    score_piecewise: f64,
    chosen_model: ModelChoice,
}

fn select_cmd(a: &SelectArgs, out: &mut Outputs, meta: &mut RunMetadata) -> Result<()> {
    let model = resolve_model(&a.model, meta)?;
    let careers = load_careers(&a.corpus, &model, Some(EligibilityRule::default()), meta)?;
    fit_decisions(meta);
    let criteria: Vec<Criterion> = match a.criterion {
        Some(c) => vec![c.into()],
        None => vec![Criterion::Aic, Criterion::Aicc, Criterion::Bic],
    };
    let per_career: Vec<Vec<SelectionRow>> = careers
        .par_iter()
        .map(|c| {
            let Ok(cmp) = compare_models(&c.adjusted, Criterion::Aic) else {
                warn!("{}: no fit", c.faculty.faculty_id);
                return Vec::new();
            };
            let ys = &c.adjusted.counts;
            criteria
                .iter()
                .filter_map(|&crit| select_from_fits(crit, ys, &cmp.line, &cmp.piecewise).ok())
                .map(|s| SelectionRow {
                    faculty_id: c.faculty.faculty_id.clone(),
                    criterion: s.criterion,
                    score_line: s.score_line,
                    score_piecewise: s.score_piecewise,
                    chosen_model: s.chosen,
                })
                .collect()
        })
        .collect();
    let rows: Vec<SelectionRow> = per_career.into_iter().flatten().collect();
    let mut summary = BTreeMap::new();
    for crit in &criteria {
        let mine: Vec<&SelectionRow> = rows.iter().filter(|r| r.criterion == *crit).collect();
        let pw = mine.iter().filter(|r| r.chosen_model == ModelChoice::Piecewise).count();
        summary.insert(
            crit.as_str(),
            json!({
                "n": mine.len(),
                "piecewise_selected": pw,
                "piecewise_fraction": (!mine.is_empty()).then(|| pw as f64 / mine.len() as f64),
            }),
        );
    }
    out.csv(
        "selection.csv",
        &["faculty_id", "criterion", "score_line", "score_piecewise", "chosen_model"],
        &rows,
    )?;
    out.json("selection_summary.json", &summary)
}

#[derive(Debug, Serialize)]
struct ClassRow {
    faculty_id: String,
    career_length: usize,
    quadrant: Quadrant,
    canonical: bool,
    stable: bool,
    nonlinear: bool,
    t_star: f64,
    /// Stable, nonlinear and canonical: what the population summary counts.
    counted_canonical: bool,
}

#[derive(Debug, Serialize)]
struct ClassifySummary {
    #[serde(flatten)]
    population: PopulationSummary,
    quadrant_counts: BTreeMap<&'static str, usize>,
    t_star_mode: Option<i64>,
    t_star_cap: f64,
    stability_assumed: bool,
}

#[derive(Debug, Serialize)]
struct RecoveryRow {
    faculty_id: String,
    label: String,
    true_quadrant: Quadrant,
    fitted_quadrant: Quadrant,
    quadrant_match: bool,
    true_canonical: bool,
    fitted_canonical: bool,
    true_linear: bool,
    chosen_model: ModelChoice,
    true_t_star: f64,
    fitted_t_star: f64,
    abs_err_t_star: f64,
}

fn read_table<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    Ok(ingest::read_records(path)?)
}

fn classify_cmd(a: &ClassifyArgs, out: &mut Outputs, meta: &mut RunMetadata) -> Result<()> {
    if !(a.tstar_cap > 0.0) {
        return Err(usage(format!("--tstar-cap must be positive, got {}", a.tstar_cap)));
    }
    let fits: Vec<FitExport> = read_table(&a.fits)?;
    meta.count("fits_loaded", fits.len());
    let stable: Option<HashMap<String, bool>> = match &a.stability {
        Some(p) => {
            let rows: Vec<StabilityRow> = read_table(p)?;
            Some(rows.into_iter().map(|r| (r.faculty_id, r.stable)).collect())
        }
        None => None,
    };
    meta.decide("stability_assumed", stable.is_none());
    meta.decide("tstar_cap", a.tstar_cap);
    meta.decide("zero_slope", "nonpositive");
    meta.decide("tstar_histogram_binning", "nearest career year");

    let mut missing = 0;
    let members: Vec<CohortMember> = fits
        .iter()
        .map(|f| CohortMember {
            faculty_id: f.faculty_id.clone(),
            career_length: f.career_length,
            params: f.params(),
            chosen: f.chosen_model,
            stable: match &stable {
                None => true,
                Some(m) => m.get(&f.faculty_id).copied().unwrap_or_else(|| {
                    missing += 1;
                    false
                }),
            },
        })
        .collect();
    if stable.is_some() {
        meta.count("missing_stability_rows", missing);
    }

    let mut quadrant_counts: BTreeMap<&'static str, usize> = Quadrant::ALL.iter().map(|q| (q.as_str(), 0)).collect();
    let classes: Vec<ClassRow> = members
        .iter()
        .map(|m| {
            let c = classify::classify_trajectory(&m.params, m.stable, m.nonlinear(), a.tstar_cap);
            *quadrant_counts.entry(c.quadrant.as_str()).or_default() += 1;
            ClassRow {
                faculty_id: m.faculty_id.clone(),
                career_length: m.career_length,
                quadrant: c.quadrant,
                canonical: c.canonical,
                stable: c.stable,
                nonlinear: c.nonlinear,
                t_star: m.params.t_star,
                counted_canonical: c.canonical && c.stable && c.nonlinear,
            }
        })
        .collect();
    let table = classify::changepoint_table(&members);
    let heat = classify::heat_cells(table.pairs.iter().map(|p| (p.career_length as i64, p.t_star.round() as i64)));
    let summary = ClassifySummary {
        population: classify::summarize_population(&members, a.tstar_cap),
        quadrant_counts,
        t_star_mode: table.mode(),
        t_star_cap: a.tstar_cap,
        stability_assumed: stable.is_none(),
    };
    out.csv(
        "classes.csv",
        &["faculty_id", "career_length", "quadrant", "canonical", "stable", "nonlinear", "t_star", "counted_canonical"],
        &classes,
    )?;
    out.csv("changepoints.csv", &["faculty_id", "career_length", "t_star"], &table.pairs)?;
    out.csv("tstar_histogram.csv", &["year", "count"], &table.histogram)?;
    out.csv("changepoint_heat.csv", &["x", "y", "weight"], &heat)?;
    out.json("population_summary.json", &summary)?;

    if let Some(truth_path) = &a.truth {
        let truth: Vec<TruthRow> = read_table(truth_path)?;
        let by_id: HashMap<&str, &FitExport> = fits.iter().map(|f| (f.faculty_id.as_str(), f)).collect();
        let rows: Vec<RecoveryRow> = truth
            .iter()
            .filter_map(|t| {
                let f = by_id.get(t.faculty_id.as_str())?;
                let fitted_quadrant = classify::classify_quadrant(f.m1, f.m2);
                Some(RecoveryRow {
                    faculty_id: t.faculty_id.clone(),
                    label: t.label.clone(),
                    true_quadrant: t.quadrant,
                    fitted_quadrant,
                    quadrant_match: fitted_quadrant == t.quadrant,
                    true_canonical: t.canonical,
                    fitted_canonical: classify::is_canonical(&f.params(), a.tstar_cap),
                    true_linear: t.linear,
                    chosen_model: f.chosen_model,
                    true_t_star: t.t_star,
                    fitted_t_star: f.t_star,
                    abs_err_t_star: (f.t_star - t.t_star).abs(),
                })
            })
            .collect();
        meta.count("truth_rows", truth.len());
        meta.count("truth_rows_without_fit", truth.len() - rows.len());
        out.csv(
            "truth_recovery.csv",
            &[
                "faculty_id", "label", "true_quadrant", "fitted_quadrant", "quadrant_match", "true_canonical",
                "fitted_canonical", "true_linear", "chosen_model", "true_t_star", "fitted_t_star", "abs_err_t_star",
            ],
            &rows,
        )?;
        out.json("truth_recovery.json", &recovery_summary(&rows))?;
    }
    Ok(())
}

fn recovery_summary(rows: &[RecoveryRow]) -> Value {
    let n = rows.len();
    let share = |k: usize| (n > 0).then(|| k as f64 / n as f64);
    let mut errs: Vec<f64> = rows
        .iter()
        .filter(|r| !r.true_linear && r.chosen_model == ModelChoice::Piecewise)
        .map(|r| r.abs_err_t_star)
        .collect();
    json!({
        "n": n,
        "quadrant_agreement": share(rows.iter().filter(|r| r.quadrant_match).count()),
        "canonical_agreement": share(rows.iter().filter(|r| r.true_canonical == r.fitted_canonical).count()),
        "model_agreement": share(rows.iter().filter(|r| r.true_linear == (r.chosen_model == ModelChoice::Line)).count()),
        "median_abs_err_t_star_kinked": classify::median(&mut errs),
    })
}

fn noise_spec(n: &NoiseArgs, meta: &mut RunMetadata) -> Result<NoiseSpec> {
    let spec = NoiseSpec {
        sigma: n.sigma,
        trials: n.trials,
        seed: meta.seed(n.seed),
    };
    spec.validate().map_err(usage)?;
    meta.decide("year_shift", "round(sigma * standard normal), one stream per (seed, faculty, publication, trial)");
    meta.decide(
        "perturbed_year_retention",
        "clamped into the noise-free career span: before hire counts at year 0, past the last year counts there",
    );
    Ok(spec)
}

fn cohort_of(careers: Vec<Career>) -> Vec<(FacultyRecord, Vec<PublicationRecord>)> {
    careers.into_iter().map(|c| (c.faculty, c.pubs)).collect()
}

fn stability_cmd(a: &StabilityArgs, out: &mut Outputs, meta: &mut RunMetadata) -> Result<()> {
    if !(a.stability_threshold > 0.0 && a.stability_threshold <= 1.0) {
        return Err(usage(format!("--stability-threshold must be in (0, 1], got {}", a.stability_threshold)));
    }
    let model = resolve_model(&a.model, meta)?;
    let spec = noise_spec(&a.noise, meta)?;
    let careers = load_careers(&a.corpus, &model, Some(EligibilityRule::default()), meta)?;
    meta.decide("modal_quadrant_ties", "lowest-numbered quadrant");
    meta.decide("stable_rule", "modal share >= threshold and modal quadrant equals the noise-free quadrant");
    let opts = StabilityOptions {
        threshold: a.stability_threshold,
        series: series_options(&a.corpus),
    };
    let cohort = cohort_of(careers);
    let reports = perturb::stability_cohort(&cohort, &model, &spec, &opts);
    let mut rows = Vec::new();
    let mut failed = 0;
    for (r, (f, _)) in reports.iter().zip(&cohort) {
        match r {
            Ok(rep) => rows.push(StabilityRow::from(rep)),
            Err(e) => {
                warn!("{}: {e}; skipped", f.faculty_id);
                failed += 1;
            }
        }
    }
    meta.count("stability_failures", failed);
    let n = rows.len();
    let mean = |f: &dyn Fn(&StabilityRow) -> f64| (n > 0).then(|| rows.iter().map(f).sum::<f64>() / n as f64);
    let summary = json!({
        "n": n,
        "stable_fraction": mean(&|r| r.stable as u8 as f64),
        "mean_modal_fraction": mean(&|r| r.modal_fraction),
        "mean_signflip_fraction": mean(&|r| r.signflip_fraction),
    });
    out.csv(
        "stability.csv",
        &[
            "faculty_id", "votes_q1", "votes_q2", "votes_q3", "votes_q4", "degenerate", "modal_fraction", "stable",
            "signflip_fraction",
        ],
        &rows,
    )?;
    out.json("stability_summary.json", &summary)
}

fn ensemble_cmd(a: &EnsembleArgs, out: &mut Outputs, meta: &mut RunMetadata) -> Result<()> {
    if !(a.tstar_cap > 0.0) {
        return Err(usage(format!("--tstar-cap must be positive, got {}", a.tstar_cap)));
    }
    let model = resolve_model(&a.model, meta)?;
    let spec = noise_spec(&a.noise, meta)?;
    let careers = load_careers(&a.corpus, &model, Some(EligibilityRule::default()), meta)?;
    fit_decisions(meta);
    meta.decide("failed_trials", "counted in total_trials only");
    let opts = EnsembleOptions {
        criterion: a.criterion.into(),
        t_star_cap: a.tstar_cap,
        series: series_options(&a.corpus),
    };
    let table = perturb::ensemble_distribution(&cohort_of(careers), &model, &spec, &opts).map_err(CliError::data)?;
    out.csv("ensemble.csv", &["region", "count", "mass"], &table.rows)?;
    out.json(
        "ensemble_summary.json",
        &json!({
            "total_trials": table.total_trials,
            "kept_trials": table.kept_trials,
            "kept_fraction": (table.total_trials > 0).then(|| table.kept_trials as f64 / table.total_trials as f64),
        }),
    )
}

#[derive(Debug, Serialize)]
struct LorenzRow {
    decade: i32,
    x: f64,
    y: f64,
}

fn gini_cmd(a: &GiniArgs, out: &mut Outputs, meta: &mut RunMetadata) -> Result<()> {
    let model = resolve_model(&a.model, meta)?;
    let careers = load_careers(&a.corpus, &model, None, meta)?;
    meta.decide("hire_decade", "floor(hire_year / 10) * 10");
    meta.decide("gini_estimator", "1 - 2 * trapezoid area under the Lorenz curve");
    let faculty: Vec<FacultyRecord> = careers.iter().map(|c| c.faculty.clone()).collect();
    let series: Vec<CareerSeries> = careers.into_iter().map(|c| c.adjusted).collect();
    let ginis = inequality::decade_ginis(&faculty, &series, a.window_years.get());
    let lorenz: Vec<LorenzRow> = ginis
        .iter()
        .flat_map(|g| {
            g.curve
                .iter()
                .flat_map(|c| c.points.iter())
                .map(|&(x, y)| LorenzRow { decade: g.decade, x, y })
        })
        .collect();
    out.csv("gini.csv", &["decade", "n_faculty", "gini"], &ginis)?;
    out.csv("lorenz.csv", &["decade", "x", "y"], &lorenz)
}

fn authorship_cmd(a: &AuthorshipArgs, out: &mut Outputs, meta: &mut RunMetadata) -> Result<()> {
    if !(a.alpha_level > 0.0 && a.alpha_level < 1.0) {
        return Err(usage(format!("--alpha-level must be in (0, 1), got {}", a.alpha_level)));
    }
    if !(a.ratio_threshold > 0.0) {
        return Err(usage(format!("--ratio-threshold must be positive, got {}", a.ratio_threshold)));
    }
    if a.mc_draws == 0 {
        return Err(usage("--mc-draws must be positive"));
    }
    let corpus = ingest::load_corpus(&a.corpus.faculty, &a.corpus.pubs)?;
    meta.count("faculty_loaded", corpus.faculty.len());
    meta.count("publications_loaded", corpus.publications.len());
    let opts = series_options(&a.corpus);
    series_decisions(meta, opts);
    let test = VenueTestOptions {
        alpha_level: a.alpha_level,
        ratio_threshold: a.ratio_threshold,
        mode: match a.mode {
            ModeArg::Auto => None,
            ModeArg::Exact => Some(TestMode::Exact),
            ModeArg::MonteCarlo => Some(TestMode::MonteCarlo),
        },
        mc_draws: a.mc_draws,
        seed: meta.seed(a.seed),
    };
    meta.decide("exact_tail_limit_papers", authorship::EXACT_LIMIT);
    meta.decide("surname_key", "text before a comma, else the last token; accents stripped, case folded");
    meta.decide("chance_alphabetized", "1/M! for M authors, 0 beyond 20");

    let stats = authorship::detect_alphabetized_venues(&corpus.publications, &test).map_err(CliError::data)?;
    let flagged = authorship::flagged_set(&stats);
    let mut fractions = Vec::new();
    let (mut too_short, mut undefined) = (0, 0);
    for (f, pubs) in corpus.cohort() {
        match authorship::transition_fractions(&f, &pubs, &flagged, opts) {
            Ok(Some(r)) => fractions.push(r),
            Ok(None) => undefined += 1,
            Err(_) => too_short += 1,
        }
    }
    meta.count("careers_too_short_for_transition", too_short);
    meta.count("careers_with_empty_window", undefined);
    let curves = authorship::role_curves(&corpus.faculty, &corpus.publications, &flagged, &a.strata.0, opts);
    let mut flagged_list: Vec<&String> = flagged.iter().collect();
    flagged_list.sort();

    out.csv(
        "venues.csv",
        &["venue", "n_multi", "n_alpha", "expected_alpha", "p_value", "flagged"],
        &stats,
    )?;
    out.csv(
        "transitions.csv",
        &["faculty_id", "frac_first_early", "frac_first_late", "transitioned"],
        &fractions,
    )?;
    out.csv(
        "role_curves.csv",
        &["stratum", "career_year", "mean_frac_first", "mean_frac_last", "n"],
        &curves,
    )?;
    out.json(
        "authorship_summary.json",
        &json!({
            "n_venues_tested": stats.len(),
            "flagged_venues": flagged_list,
            "n_transition_defined": fractions.len(),
            "transition_rate": authorship::transition_rate(&fractions),
        }),
    )
}

#[derive(Debug, Serialize)]
struct PeakRow {
    career_length: usize,
    peak_year: usize,
}

fn curves_cmd(a: &CurvesArgs, out: &mut Outputs, meta: &mut RunMetadata) -> Result<()> {
    let model = resolve_model(&a.model, meta)?;
    let careers = load_careers(&a.corpus, &model, None, meta)?;
    meta.decide("strata", "cumulative faculty shares at strictly better employer rank");
    meta.decide("peak_year_ties", "earliest year");
    meta.decide("peak_min_career", a.peak_min_career);
    let faculty: Vec<FacultyRecord> = careers.iter().map(|c| c.faculty.clone()).collect();
    let series: Vec<CareerSeries> = careers.into_iter().map(|c| c.adjusted).collect();
    let curves = classify::cohort_curves(&faculty, &series, &a.strata.0);
    let peaks = classify::peak_year_table(&series, a.peak_min_career);
    let heat = classify::heat_cells(peaks.pairs.iter().map(|&(t, p)| (t as i64, p as i64)));
    let pairs: Vec<PeakRow> = peaks
        .pairs
        .iter()
        .map(|&(career_length, peak_year)| PeakRow {
            career_length,
            peak_year,
        })
        .collect();
    out.csv("curves.csv", &["stratum", "career_year", "mean", "n"], &curves)?;
    out.csv("peak_years.csv", &["career_length", "peak_year"], &pairs)?;
    out.csv("peak_heat.csv", &["x", "y", "weight"], &heat)?;
    out.csv("peak_histogram.csv", &["year", "count"], &peaks.histogram)?;
    out.json("curves_summary.json", &json!({ "peak_year_mode": peaks.mode() }))
}

/// Least-squares slope of `y` on `x`; `None` below two distinct `x`.
fn ols_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn medians_cmd(a: &MediansArgs, out: &mut Outputs, meta: &mut RunMetadata) -> Result<()> {
    let model = resolve_model(&a.model, meta)?;
    let careers = load_careers(&a.corpus, &model, None, meta)?;
    meta.decide("institution_key", "employer_rank");
    let faculty: Vec<FacultyRecord> = careers.iter().map(|c| c.faculty.clone()).collect();
    let series: Vec<CareerSeries> = careers.into_iter().map(|c| c.adjusted).collect();
    let rows = classify::institution_medians(&faculty, &series, a.window.into());
    let slope = |keep: &dyn Fn(&classify::InstitutionMedian) -> bool| {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| keep(r))
            .map(|r| (r.employer_rank as f64, r.median))
            .collect();
        ols_slope(&pts)
    };
    let summary = json!({
        "n_institutions": rows.len(),
        "slope_per_rank": slope(&|_| true),
        "slope_per_rank_public": slope(&|r| !r.is_private),
        "slope_per_rank_private": slope(&|r| r.is_private),
    });
    out.csv("medians.csv", &["employer_rank", "is_private", "n_faculty", "median"], &rows)?;
    out.json("medians_summary.json", &summary)
}

fn simulate_cmd(a: &SimulateArgs, out: &mut Outputs, meta: &mut RunMetadata) -> Result<()> {
    let (mut spec, file_seed) = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::file(p, e))?;
            let raw: Value = serde_json::from_str(&text).map_err(|e| CliError::file(p, e))?;
            let seed = raw.get("seed").and_then(Value::as_u64);
            let spec: GeneratorSpec = serde_json::from_value(raw).map_err(|e| CliError::file(p, e))?;
            (spec, seed)
        }
        None => (GeneratorSpec::default(), None),
    };
    if let Some(n) = a.n_faculty {
        spec.n_faculty = n;
    }
    if let Some(y) = a.census_year {
        spec.census_year = y;
    }
    spec.seed = meta.seed(a.seed.or(file_seed));
    spec.validate().map_err(usage)?;
    let model = resolve_model(&a.model, meta)?;
    meta.decide("rates", "max(0, f(t)) times the growth ratio of the calendar year");
    let cohort = synthgen::generate_cohort(&spec, &model).map_err(CliError::data)?;
    meta.count("faculty", cohort.faculty.len());
    meta.count("publications", cohort.publications.len());
    let venue_rows: Vec<VenueRow> = cohort
        .alphabetized_venues
        .iter()
        .map(|v| VenueRow { venue: v.clone() })
        .collect();
    out.jsonl("faculty.jsonl", &cohort.faculty)?;
    out.jsonl("publications.jsonl", &cohort.publications)?;
    out.csv(
        "truth.csv",
        &[
            "faculty_id", "label", "m1", "m2", "b", "t_star", "quadrant", "canonical", "linear", "career_length",
            "hire_year", "declining_first_author",
        ],
        &cohort.truth,
    )?;
    out.csv("truth_rates.csv", &["faculty_id", "career_year", "unclipped", "rate"], &cohort.rates)?;
    out.csv("alphabetized_venues.csv", &["venue"], &venue_rows)?;
    out.json("generator_spec.json", &spec)
}

#[derive(Debug, Serialize)]
struct VenueRow {
    venue: String,
}

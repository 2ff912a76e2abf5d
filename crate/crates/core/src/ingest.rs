//! Faculty and publication records, career-aligned count series and the
//! eligibility filter applied before trajectory fitting.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

/// Last calendar year observed by the faculty census.
pub const DEFAULT_CENSUS_YEAR: i32 = 2011;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("publications reference unknown faculty: {}", .0.join(", "))]
    DanglingFaculty(Vec<String>),
    #[error("duplicate publication id `{0}`")]
    DuplicatePublication(String),
    #[error("duplicate faculty id `{0}`")]
    DuplicateFaculty(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Gender {
    M,
    F,
    #[default]
    #[serde(rename = "unknown", alias = "U", alias = "Unknown")]
    Unknown,
}

/// Where a faculty member's publication list came from. CV lists are
/// complete; DBLP lists need the coverage correction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Source {
    #[default]
    #[serde(alias = "dblp")]
    DBLP,
    #[serde(alias = "cv")]
    CV,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FacultyRecord {
    pub faculty_id: String,
    pub hire_year: i32,
    /// Prestige rank of the doctoral institution, 1 is best.
    pub doctoral_rank: u32,
    /// Prestige rank of the employing institution, 1 is best.
    pub employer_rank: u32,
    #[serde(default, deserialize_with = "flexible_bool")]
    pub is_private: bool,
    #[serde(default)]
    pub gender: Gender,
    #[serde(default, deserialize_with = "flexible_bool")]
    pub had_postdoc: bool,
    #[serde(default)]
    pub source: Source,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PublicationRecord {
    pub pub_id: String,
    pub faculty_id: String,
    pub year: i32,
    #[serde(default)]
    pub venue: String,
    #[serde(deserialize_with = "deserialize_authors")]
    pub authors: Vec<String>,
    /// Position of the focal faculty member in `authors`.
    pub focal_index: usize,
}

impl PublicationRecord {
    pub fn is_single_author(&self) -> bool {
        self.authors.len() == 1
    }
}

/// Publication counts indexed by career year, year 0 being the hire year.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CareerSeries {
    pub faculty_id: String,
    pub t0: i32,
    pub counts: Vec<f64>,
}

impl CareerSeries {
    pub fn new(faculty_id: impl Into<String>, t0: i32, counts: Vec<f64>) -> Self {
        Self {
            faculty_id: faculty_id.into(),
            t0,
            counts,
        }
    }

    pub fn career_length(&self) -> usize {
        self.counts.len()
    }

    pub fn calendar_year(&self, career_year: usize) -> i32 {
        self.t0 + career_year as i32
    }

    /// Number of career years with at least one publication.
    pub fn active_years(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0.0).count()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// `(t, count)` pairs with `t` as a real career year.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.counts.iter().enumerate().map(|(t, &y)| (t as f64, y))
    }

    pub fn map_counts(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        Self {
            faculty_id: self.faculty_id.clone(),
            t0: self.t0,
            counts: self
                .counts
                .iter()
                .enumerate()
                .map(|(t, &c)| f(t, c))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Corpus {
    pub faculty: Vec<FacultyRecord>,
    pub publications: Vec<PublicationRecord>,
}

impl Corpus {
    /// Publications grouped by faculty id, preserving input order.
    pub fn publications_by_faculty(&self) -> HashMap<&str, Vec<&PublicationRecord>> {
        let mut grouped: HashMap<&str, Vec<&PublicationRecord>> = HashMap::new();
        for p in &self.publications {
            grouped.entry(p.faculty_id.as_str()).or_default().push(p);
        }
        grouped
    }

    /// Owned per-faculty publication lists, in faculty order.
    pub fn cohort(&self) -> Vec<(FacultyRecord, Vec<PublicationRecord>)> {
        let grouped = self.publications_by_faculty();
        self.faculty
            .iter()
            .map(|f| {
                let pubs = grouped
                    .get(f.faculty_id.as_str())
                    .map(|ps| ps.iter().map(|&p| p.clone()).collect())
                    .unwrap_or_default();
                (f.clone(), pubs)
            })
            .collect()
    }
}

/// Reads faculty and publication files (JSON Lines, or CSV when the file
/// extension is `.csv`) and checks referential integrity.
pub fn load_corpus(
    faculty_path: impl AsRef<Path>,
    publications_path: impl AsRef<Path>,
) -> Result<Corpus, IngestError> {
    let faculty: Vec<FacultyRecord> = read_records(faculty_path.as_ref())?;
    let publications: Vec<PublicationRecord> = read_records(publications_path.as_ref())?;
    for (line, f) in faculty.iter().enumerate() {
        if f.doctoral_rank == 0 || f.employer_rank == 0 {
            return Err(IngestError::Malformed {
                path: faculty_path.as_ref().to_path_buf(),
                line: line + 1,
                message: "ranks must be >= 1".into(),
            });
        }
    }
    for (line, p) in publications.iter().enumerate() {
        if let Err(message) = validate_publication(p) {
            return Err(IngestError::Malformed {
                path: publications_path.as_ref().to_path_buf(),
                line: line + 1,
                message,
            });
        }
    }
    let corpus = Corpus {
        faculty,
        publications,
    };
    check_integrity(&corpus)?;
    Ok(corpus)
}

fn validate_publication(p: &PublicationRecord) -> Result<(), String> {
    if p.authors.is_empty() {
        return Err("publication has no authors".into());
    }
    if p.focal_index >= p.authors.len() {
        return Err(format!(
            "focal_index {} out of range for {} authors",
            p.focal_index,
            p.authors.len()
        ));
    }
    Ok(())
}

/// Rejects duplicate ids and publications whose faculty is unknown.
pub fn check_integrity(corpus: &Corpus) -> Result<(), IngestError> {
    let mut ids = HashSet::new();
    for f in &corpus.faculty {
        if !ids.insert(f.faculty_id.as_str()) {
            return Err(IngestError::DuplicateFaculty(f.faculty_id.clone()));
        }
    }
    let mut pub_ids = HashSet::new();
    let mut dangling = BTreeSet::new();
    for p in &corpus.publications {
        if !pub_ids.insert(p.pub_id.as_str()) {
            return Err(IngestError::DuplicatePublication(p.pub_id.clone()));
        }
        if !ids.contains(p.faculty_id.as_str()) {
            dangling.insert(p.faculty_id.clone());
        }
    }
    if dangling.is_empty() {
        Ok(())
    } else {
        Err(IngestError::DanglingFaculty(dangling.into_iter().collect()))
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads one record per line (JSON Lines) or per row (CSV, by extension).
pub fn read_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, IngestError> {
    let file = open(path)?;
    if is_csv(path) {
        read_csv(file, path)
    } else {
        read_jsonl(file, path)
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(
    reader: impl Read,
    path: &Path,
) -> Result<Vec<T>, IngestError> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| IngestError::Malformed {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

fn read_csv<T: serde::de::DeserializeOwned>(
    reader: impl Read,
    path: &Path,
) -> Result<Vec<T>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (idx, row) in rdr.deserialize().enumerate() {
        let record = row.map_err(|e| IngestError::Malformed {
            path: path.to_path_buf(),
            // header is line 1
            line: e
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(idx + 2),
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Writes records as JSON Lines.
pub fn write_jsonl<T: Serialize>(
    mut writer: impl std::io::Write,
    records: &[T],
) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

fn flexible_bool<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Bool(bool),
        Int(i64),
        Str(String),
    }
    match Repr::deserialize(d)? {
        Repr::Bool(b) => Ok(b),
        Repr::Int(i) => Ok(i != 0),
        Repr::Str(s) => match s.trim().to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" | "t" => Ok(true),
            "false" | "0" | "no" | "f" | "" => Ok(false),
            other => Err(serde::de::Error::custom(format!("invalid boolean `{other}`"))),
        },
    }
}

fn deserialize_authors<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        List(Vec<String>),
        Joined(String),
    }
    Ok(match Repr::deserialize(d)? {
        Repr::List(v) => v,
        Repr::Joined(s) if s.is_empty() => Vec::new(),
        Repr::Joined(s) => s.split('|').map(|a| a.trim().to_string()).collect(),
    })
}

/// Options controlling how publications become a career series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    pub census_year: i32,
    /// When set, publications dated before the hire year are counted at
    /// career year 0 instead of being dropped.
    pub include_prehire: bool,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            census_year: DEFAULT_CENSUS_YEAR,
            include_prehire: false,
        }
    }
}

/// Counts publications per career year. The series runs from the hire year
/// to the later of the census year and the last publication year.
pub fn build_series<'a, I>(faculty: &FacultyRecord, pubs: I, opts: SeriesOptions) -> CareerSeries
where
    I: IntoIterator<Item = &'a PublicationRecord>,
{
    build_series_from_years(
        &faculty.faculty_id,
        faculty.hire_year,
        pubs.into_iter().map(|p| p.year),
        opts,
    )
}

pub(crate) fn build_series_from_years(
    faculty_id: &str,
    t0: i32,
    years: impl IntoIterator<Item = i32>,
    opts: SeriesOptions,
) -> CareerSeries {
    let mut offsets = Vec::new();
    for y in years {
        let t = y - t0;
        if t >= 0 {
            offsets.push(t as usize);
        } else if opts.include_prehire {
            offsets.push(0);
        }
    }
    let census_len = (opts.census_year - t0 + 1).max(0) as usize;
    let last_len = offsets.iter().max().map_or(0, |&t| t + 1);
    let mut counts = vec![0.0; census_len.max(last_len)];
    for t in offsets {
        counts[t] += 1.0;
    }
    CareerSeries::new(faculty_id, t0, counts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EligibilityRule {
    pub min_career: usize,
    pub max_career: usize,
    pub min_active_years: usize,
}

impl Default for EligibilityRule {
    fn default() -> Self {
        Self {
            min_career: 10,
            max_career: 25,
            min_active_years: 3,
        }
    }
}

pub fn eligible_for_fit(series: &CareerSeries, rule: EligibilityRule) -> bool {
    let t = series.career_length();
    rule.min_career <= t && t <= rule.max_career && series.active_years() >= rule.min_active_years
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn faculty(id: &str, hire: i32) -> FacultyRecord {
        FacultyRecord {
            faculty_id: id.into(),
            hire_year: hire,
            doctoral_rank: 3,
            employer_rank: 7,
            is_private: false,
            gender: Gender::Unknown,
            had_postdoc: false,
            source: Source::DBLP,
        }
    }

    fn publication(id: &str, fid: &str, year: i32) -> PublicationRecord {
        PublicationRecord {
            pub_id: id.into(),
            faculty_id: fid.into(),
            year,
            venue: "STOC".into(),
            authors: vec!["A Smith".into(), "B Jones".into()],
            focal_index: 0,
        }
    }

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    const FACULTY_LINE: &str = r#"{"faculty_id":"f1","hire_year":2000,"doctoral_rank":4,"employer_rank":9,"is_private":true,"gender":"F","had_postdoc":false,"source":"DBLP","extra":1}"#;

    #[test]
    fn empty_publications_file() {
        let dir = tempfile::tempdir().unwrap();
        let fac = write(dir.path(), "faculty.jsonl", FACULTY_LINE);
        let pubs = write(dir.path(), "pubs.jsonl", "");
        let corpus = load_corpus(fac, pubs).unwrap();
        assert_eq!(corpus.faculty.len(), 1);
        assert!(corpus.publications.is_empty());
        assert_eq!(corpus.faculty[0].gender, Gender::F);
        assert!(corpus.faculty[0].is_private);
    }

    #[test]
    fn preserves_author_order() {
        let dir = tempfile::tempdir().unwrap();
        let fac = write(dir.path(), "faculty.jsonl", FACULTY_LINE);
        let body = [
            r#"{"pub_id":"p1","faculty_id":"f1","year":2001,"venue":"KDD","authors":["Zed","Amy","Bob"],"focal_index":2}"#,
            r#"{"pub_id":"p2","faculty_id":"f1","year":2002,"authors":["Bob"],"focal_index":0}"#,
            r#"{"pub_id":"p3","faculty_id":"f1","year":2003,"venue":"","authors":["Cy","Bob"],"focal_index":1}"#,
        ]
        .join("\n");
        let pubs = write(dir.path(), "pubs.jsonl", &body);
        let corpus = load_corpus(fac, pubs).unwrap();
        assert_eq!(corpus.publications.len(), 3);
        assert_eq!(corpus.publications[0].authors, vec!["Zed", "Amy", "Bob"]);
        assert_eq!(corpus.publications[1].venue, "");
    }

    #[test]
    fn dangling_faculty_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let fac = write(dir.path(), "faculty.jsonl", FACULTY_LINE);
        let pubs = write(
            dir.path(),
            "pubs.jsonl",
            r#"{"pub_id":"p1","faculty_id":"ghost","year":2001,"authors":["A"],"focal_index":0}"#,
        );
        match load_corpus(fac, pubs) {
            Err(IngestError::DanglingFaculty(ids)) => assert_eq!(ids, vec!["ghost"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_carries_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let fac = write(dir.path(), "faculty.jsonl", FACULTY_LINE);
        let pubs = write(
            dir.path(),
            "pubs.jsonl",
            "{\"pub_id\":\"p1\",\"faculty_id\":\"f1\",\"year\":2001,\"authors\":[\"A\"],\"focal_index\":0}\n{not json",
        );
        match load_corpus(fac, pubs) {
            Err(IngestError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn focal_index_out_of_range_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let fac = write(dir.path(), "faculty.jsonl", FACULTY_LINE);
        let pubs = write(
            dir.path(),
            "pubs.jsonl",
            r#"{"pub_id":"p1","faculty_id":"f1","year":2001,"authors":["A"],"focal_index":1}"#,
        );
        assert!(matches!(
            load_corpus(fac, pubs),
            Err(IngestError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_publication_rejected() {
        let corpus = Corpus {
            faculty: vec![faculty("f1", 2000)],
            publications: vec![publication("p", "f1", 2001), publication("p", "f1", 2002)],
        };
        assert!(matches!(
            check_integrity(&corpus),
            Err(IngestError::DuplicatePublication(id)) if id == "p"
        ));
    }

    #[test]
    fn csv_variant_splits_authors() {
        let dir = tempfile::tempdir().unwrap();
        let fac = write(
            dir.path(),
            "faculty.csv",
            "faculty_id,hire_year,doctoral_rank,employer_rank,is_private,gender,had_postdoc,source\nf1,2000,4,9,false,M,true,CV\n",
        );
        let pubs = write(
            dir.path(),
            "pubs.csv",
            "pub_id,faculty_id,year,venue,authors,focal_index\np1,f1,2003,SODA,Ann Lee|Bo Kim,1\n",
        );
        let corpus = load_corpus(fac, pubs).unwrap();
        assert_eq!(corpus.faculty[0].source, Source::CV);
        assert!(corpus.faculty[0].had_postdoc);
        assert_eq!(corpus.publications[0].authors, vec!["Ann Lee", "Bo Kim"]);
    }

    #[test]
    fn counts_per_career_year() {
        let f = faculty("f", 2000);
        let pubs = vec![
            publication("a", "f", 2000),
            publication("b", "f", 2000),
            publication("c", "f", 2002),
        ];
        let opts = SeriesOptions {
            census_year: 2003,
            include_prehire: false,
        };
        let s = build_series(&f, &pubs, opts);
        assert_eq!(s.counts, vec![2.0, 0.0, 1.0, 0.0]);
        assert_eq!(s.calendar_year(3), 2003);
    }

    #[test]
    fn prehire_publications() {
        let f = faculty("f", 2000);
        let pubs = vec![publication("a", "f", 1999), publication("b", "f", 2001)];
        let opts = SeriesOptions {
            census_year: 2001,
            include_prehire: false,
        };
        assert_eq!(build_series(&f, &pubs, opts).counts, vec![0.0, 1.0]);
        let with = SeriesOptions {
            include_prehire: true,
            ..opts
        };
        assert_eq!(build_series(&f, &pubs, with).counts, vec![1.0, 1.0]);
    }

    #[test]
    fn empty_series_spans_to_census() {
        let f = faculty("f", 2005);
        let opts = SeriesOptions {
            census_year: 2007,
            include_prehire: false,
        };
        assert_eq!(build_series(&f, &[], opts).counts, vec![0.0; 3]);
    }

    #[test]
    fn eligibility() {
        let rule = EligibilityRule::default();
        let mut counts = vec![0.0; 12];
        for t in [0, 2, 4, 6, 8] {
            counts[t] = 1.0;
        }
        assert!(eligible_for_fit(&CareerSeries::new("a", 2000, counts), rule));
        let mut two = vec![0.0; 12];
        two[1] = 3.0;
        two[5] = 1.0;
        assert!(!eligible_for_fit(&CareerSeries::new("b", 2000, two), rule));
        assert!(!eligible_for_fit(
            &CareerSeries::new("c", 2000, vec![1.0; 9]),
            rule
        ));
    }

    proptest! {
        #[test]
        fn series_total_matches_posthire_count(
            years in proptest::collection::vec(1990i32..2012, 0..60),
            seed in any::<u64>(),
        ) {
            let f = faculty("f", 2000);
            let mut pubs: Vec<_> = years
                .iter()
                .enumerate()
                .map(|(i, &y)| publication(&format!("p{i}"), "f", y))
                .collect();
            let opts = SeriesOptions::default();
            let s = build_series(&f, &pubs, opts);
            let posthire = years.iter().filter(|&&y| y >= 2000).count();
            prop_assert_eq!(s.total(), posthire as f64);

            // permutation invariance
            let n = pubs.len();
            let mut state = seed;
            for i in (1..n).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (state >> 33) as usize % (i + 1);
                pubs.swap(i, j);
            }
            prop_assert_eq!(build_series(&f, &pubs, opts), s);
        }
    }
}

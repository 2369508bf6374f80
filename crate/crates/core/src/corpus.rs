//! Papers, researcher profiles, and corpus ingestion.
//!
//! The on-disk corpus is JSONL with one paper per line:
//!
//! ```text
//! {"id":"p1","title":"...","venue":"ICLR","year":2024,"authors":["A. Smith"],"body":"...","blog":"..."}
//! ```
//!
//! `body` and `blog` are optional. Loading validates every record and returns
//! papers sorted by id.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::ops::RangeInclusive;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::io::{to_jsonl, write_atomic, ArtifactError};
use crate::transport::{send_with_retry, HttpRequest, HttpTransport, RetryPolicy, TransportError};

/// Environment variable holding the bearer token for the paper feed.
pub const FEED_TOKEN_ENV: &str = "IDEAFORGE_OR_TOKEN";

const REQUIRED_FIELDS: [&str; 5] = ["id", "title", "venue", "year", "authors"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paper {
    pub id: String,
    pub title: String,
    pub venue: String,
    pub year: i32,
    pub authors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blog: Option<String>,
}

/// A self-contained statement extracted from a paper's distilled summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptualUnit {
    pub id: String,
    pub paper_id: String,
    /// Position within the paper's summary, contiguous from 0.
    pub ordinal: usize,
    pub text: String,
}

impl ConceptualUnit {
    pub fn new(paper_id: &str, ordinal: usize, text: impl Into<String>) -> Self {
        ConceptualUnit {
            id: format!("{paper_id}#{ordinal}"),
            paper_id: paper_id.to_string(),
            ordinal,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResearcherProfile {
    /// Equal to `name_key`; kept separate so a future disambiguator can
    /// split one key into several profiles.
    pub id: String,
    pub name_key: String,
    /// Sorted by (year, paper id).
    pub paper_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub paper_count: usize,
    pub unit_count: usize,
    pub author_count: usize,
    pub mean_atoms_per_paper: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {source}")]
    Malformed {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: missing required field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: duplicate paper id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: {reason}")]
    Invalid { line: usize, reason: String },
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

/// Validation knobs for ingestion.
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub years: RangeInclusive<i32>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { years: 1900..=2100 }
    }
}

/// An immutable, validated set of papers ordered by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    papers: Vec<Paper>,
}

impl Corpus {
    /// Validates and sorts. Line numbers in errors are 1-based input positions.
    pub fn from_papers(papers: Vec<Paper>, opts: &LoadOptions) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for (idx, paper) in papers.iter().enumerate() {
            validate(paper, idx + 1, opts)?;
            if !seen.insert(paper.id.clone()) {
                return Err(CorpusError::DuplicateId {
                    line: idx + 1,
                    id: paper.id.clone(),
                });
            }
        }
        let mut papers = papers;
        papers.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(Corpus { papers })
    }

    pub fn papers(&self) -> &[Paper] {
        &self.papers
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Paper> {
        self.papers
            .binary_search_by(|p| p.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.papers[i])
    }

    /// Replaces a paper's summary. Used by the compression stage, which
    /// produces a new corpus rather than mutating a shared one.
    pub fn with_blogs(&self, blogs: &BTreeMap<String, String>) -> Corpus {
        let papers = self
            .papers
            .iter()
            .map(|p| {
                let mut p = p.clone();
                if let Some(blog) = blogs.get(&p.id) {
                    p.blog = Some(blog.clone());
                }
                p
            })
            .collect();
        Corpus { papers }
    }

    pub fn stats(&self) -> CorpusStats {
        let authors: HashSet<String> = self
            .papers
            .iter()
            .flat_map(|p| p.authors.iter().map(|a| normalize_name(a)))
            .collect();
        CorpusStats {
            paper_count: self.papers.len(),
            author_count: authors.len(),
            ..CorpusStats::default()
        }
    }

    pub fn to_jsonl(&self) -> Result<Vec<u8>, ArtifactError> {
        to_jsonl(&self.papers)
    }
}

fn validate(paper: &Paper, line: usize, opts: &LoadOptions) -> Result<(), CorpusError> {
    let invalid = |reason: String| CorpusError::Invalid { line, reason };
    if paper.id.trim().is_empty() {
        return Err(invalid("empty paper id".into()));
    }
    if paper.authors.is_empty() {
        return Err(invalid(format!("paper `{}` has no authors", paper.id)));
    }
    if let Some(bad) = paper.authors.iter().find(|a| normalize_name(a).is_empty()) {
        return Err(invalid(format!(
            "paper `{}` has an unusable author name {bad:?}",
            paper.id
        )));
    }
    if !opts.years.contains(&paper.year) {
        return Err(invalid(format!(
            "paper `{}` year {} outside {:?}",
            paper.id, paper.year, opts.years
        )));
    }
    Ok(())
}

/// Parses corpus JSONL from any reader.
pub fn parse_corpus<R: Read>(reader: R, opts: &LoadOptions) -> Result<Corpus, CorpusError> {
    let mut papers = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| ArtifactError::io(Path::new("<corpus>"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|source| CorpusError::Malformed {
            line: line_no,
            source,
        })?;
        for field in REQUIRED_FIELDS {
            if value.get(field).is_none_or(Value::is_null) {
                return Err(CorpusError::MissingField {
                    line: line_no,
                    field,
                });
            }
        }
        let paper: Paper = serde_json::from_value(value).map_err(|source| CorpusError::Malformed {
            line: line_no,
            source,
        })?;
        validate(&paper, line_no, opts)?;
        if !seen.insert(paper.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: paper.id,
            });
        }
        papers.push(paper);
    }
    papers.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(Corpus { papers })
}

pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    load_corpus_with(path, &LoadOptions::default())
}

pub fn load_corpus_with(path: &Path, opts: &LoadOptions) -> Result<Corpus, CorpusError> {
    let file = fs::File::open(path).map_err(|e| ArtifactError::io(path, e))?;
    parse_corpus(file, opts)
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    write_atomic(path, &corpus.to_jsonl()?)?;
    Ok(())
}

/// Casefold, drop punctuation, collapse whitespace.
pub fn normalize_name(name: &str) -> String {
    let cleaned: String = name
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// One profile per normalized author name, ordered by name key. Each profile
/// lists that author's papers by (year, id).
pub fn build_researcher_profiles(corpus: &Corpus) -> Vec<ResearcherProfile> {
    let mut by_key: BTreeMap<String, Vec<&Paper>> = BTreeMap::new();
    for paper in corpus.papers() {
        let mut keys: Vec<String> = paper.authors.iter().map(|a| normalize_name(a)).collect();
        keys.sort();
        keys.dedup();
        for key in keys {
            by_key.entry(key).or_default().push(paper);
        }
    }
    by_key
        .into_iter()
        .map(|(key, mut papers)| {
            papers.sort_by(|a, b| (a.year, &a.id).cmp(&(b.year, &b.id)));
            ResearcherProfile {
                id: key.clone(),
                name_key: key,
                paper_ids: papers.into_iter().map(|p| p.id.clone()).collect(),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Paginated feed

#[derive(Debug, Clone)]
pub struct FetchConfig {
    pub endpoint: String,
    /// Case-insensitive substring match against the venue; empty keeps all.
    pub venues: Vec<String>,
    pub years: RangeInclusive<i32>,
    pub page_size: usize,
    /// Pages requested concurrently per wave.
    pub parallel: usize,
    pub retry: RetryPolicy,
    pub token: Option<String>,
    pub max_pages: usize,
}

impl FetchConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        FetchConfig {
            endpoint: endpoint.into(),
            venues: Vec::new(),
            years: 1900..=2100,
            page_size: 100,
            parallel: 4,
            retry: RetryPolicy::default(),
            token: std::env::var(FEED_TOKEN_ENV).ok(),
            max_pages: 100_000,
        }
    }
}

#[derive(Debug)]
pub struct FetchReport {
    pub corpus: Corpus,
    pub pages: usize,
    pub retries: u32,
    pub filtered_out: usize,
    pub skipped_without_authors: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("fetching offset {offset}: {source}")]
    Transport {
        offset: usize,
        #[source]
        source: TransportError,
    },
    #[error("offset {offset}: response is not a JSON submission list: {reason}")]
    NotJson { offset: usize, reason: String },
    #[error("offset {offset}: page repeats already-fetched submissions (cursor loop)")]
    CursorLoop { offset: usize },
    #[error("stopped after {0} pages without reaching the end of the feed")]
    TooManyPages(usize),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Pulls every page of `endpoint` using `offset`/`limit` query parameters,
/// filters to the configured venues and years, and returns a corpus built
/// through the same parser as [`load_corpus`].
pub fn fetch_papers(transport: &dyn HttpTransport, cfg: &FetchConfig) -> Result<FetchReport, FetchError> {
    let page_size = cfg.page_size.max(1);
    let parallel = cfg.parallel.max(1);
    let mut submissions: Vec<Value> = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    let mut retries = 0;
    let mut pages = 0;
    let mut next_page = 0usize;

    'waves: loop {
        let wave: Vec<usize> = (next_page..next_page + parallel).collect();
        next_page += parallel;
        let results: Vec<Result<(Vec<Value>, u32), FetchError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = wave
                .iter()
                .map(|&page| scope.spawn(move || fetch_page(transport, cfg, page * page_size, page_size)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("page fetch thread panicked"))
                .collect()
        });
        for (page, result) in wave.iter().zip(results) {
            let (items, page_retries) = result?;
            retries += page_retries;
            pages += 1;
            let offset = page * page_size;
            let ids: Vec<String> = items.iter().filter_map(submission_id).collect();
            if !ids.is_empty() && ids.iter().all(|id| seen_ids.contains(id)) {
                return Err(FetchError::CursorLoop { offset });
            }
            seen_ids.extend(ids);
            let short = items.len() < page_size;
            submissions.extend(items);
            if short {
                break 'waves;
            }
            if pages >= cfg.max_pages {
                return Err(FetchError::TooManyPages(pages));
            }
        }
    }

    let mut warnings = Vec::new();
    let mut filtered_out = 0;
    let mut skipped = 0;
    let mut papers = Vec::new();
    let mut kept_ids = HashSet::new();
    for sub in &submissions {
        let Some(paper) = submission_to_paper(sub) else {
            skipped += 1;
            continue;
        };
        if !venue_matches(&paper.venue, &cfg.venues) || !cfg.years.contains(&paper.year) {
            filtered_out += 1;
            continue;
        }
        if paper.authors.is_empty() {
            skipped += 1;
            continue;
        }
        if kept_ids.insert(paper.id.clone()) {
            papers.push(paper);
        }
    }
    if skipped > 0 {
        warnings.push(format!("{skipped} submissions skipped (missing id or authors)"));
    }
    if papers.is_empty() {
        warnings.push(format!(
            "no submissions matched venues {:?} and years {:?}",
            cfg.venues, cfg.years
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let bytes = to_jsonl(&papers).map_err(CorpusError::from)?;
    let corpus = parse_corpus(bytes.as_slice(), &LoadOptions { years: cfg.years.clone() })?;
    Ok(FetchReport {
        corpus,
        pages,
        retries,
        filtered_out,
        skipped_without_authors: skipped,
        warnings,
    })
}

fn fetch_page(
    transport: &dyn HttpTransport,
    cfg: &FetchConfig,
    offset: usize,
    limit: usize,
) -> Result<(Vec<Value>, u32), FetchError> {
    let request = HttpRequest::get(&cfg.endpoint)
        .query("offset", offset)
        .query("limit", limit)
        .bearer(cfg.token.clone());
    let delivered = send_with_retry(transport, &request, &cfg.retry)
        .map_err(|source| FetchError::Transport { offset, source })?;
    let value: Value = serde_json::from_str(&delivered.response.body).map_err(|e| FetchError::NotJson {
        offset,
        reason: e.to_string(),
    })?;
    let items = match value {
        Value::Array(items) => items,
        Value::Object(mut map) => ["notes", "items", "data", "submissions"]
            .iter()
            .find_map(|k| match map.remove(*k) {
                Some(Value::Array(items)) => Some(items),
                _ => None,
            })
            .ok_or_else(|| FetchError::NotJson {
                offset,
                reason: "object without a notes/items/data/submissions array".into(),
            })?,
        _ => {
            return Err(FetchError::NotJson {
                offset,
                reason: "expected an array or object".into(),
            })
        }
    };
    Ok((items, delivered.retries))
}

fn venue_matches(venue: &str, filters: &[String]) -> bool {
    if filters.is_empty() {
        return true;
    }
    let venue = venue.to_lowercase();
    filters.iter().any(|f| venue.contains(&f.to_lowercase()))
}

fn submission_id(sub: &Value) -> Option<String> {
    sub.get("id").and_then(Value::as_str).map(str::to_string)
}

/// Reads a field either at the top level or under `content`, unwrapping
/// OpenReview's `{"value": ...}` wrappers.
fn field<'a>(sub: &'a Value, key: &str) -> Option<&'a Value> {
    let raw = sub
        .get(key)
        .or_else(|| sub.get("content").and_then(|c| c.get(key)))?;
    match raw.get("value") {
        Some(inner) => Some(inner),
        None => Some(raw),
    }
}

fn field_str(sub: &Value, key: &str) -> Option<String> {
    field(sub, key).and_then(Value::as_str).map(str::to_string)
}

fn submission_to_paper(sub: &Value) -> Option<Paper> {
    let id = submission_id(sub)?;
    let year = field(sub, "year")
        .and_then(|v| v.as_i64().or_else(|| v.as_str().and_then(|s| s.parse().ok())))
        .or_else(|| field(sub, "cdate").and_then(Value::as_i64).map(year_from_millis))?;
    let authors = field(sub, "authors")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
        .unwrap_or_default();
    Some(Paper {
        id,
        title: field_str(sub, "title").unwrap_or_default(),
        venue: field_str(sub, "venue")
            .or_else(|| field_str(sub, "venueid"))
            .unwrap_or_default(),
        year: year as i32,
        authors,
        body: field_str(sub, "body").or_else(|| field_str(sub, "abstract")),
        blog: field_str(sub, "blog"),
    })
}

/// Gregorian year of a Unix timestamp in milliseconds.
fn year_from_millis(ms: i64) -> i64 {
    // Civil-from-days (Howard Hinnant's algorithm).
    let days = ms.div_euclid(86_400_000);
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = yoe + era * 400;
    if month <= 2 {
        y + 1
    } else {
        y
    }
}

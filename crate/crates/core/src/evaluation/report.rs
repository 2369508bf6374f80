use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DiversityReport, EvalError, MannWhitney, OverlapReport, ReconstructionReport, Representation};
use crate::io::{write_atomic, ArtifactError};

pub const REPORT_SCHEMA: &str = "ideaforge-eval/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodDiversity {
    pub method: String,
    pub report: DiversityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOverlap {
    pub method: String,
    pub overlap: OverlapReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodNovelty {
    pub method: String,
    /// Distances were computed on embeddings of canonical atom text rather
    /// than of reconstructed ideas.
    pub proxy: bool,
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: String,
    pub method_a: String,
    pub method_b: String,
    pub result: MannWhitney,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEmbedding {
    pub id: String,
    pub vector: Vec<f64>,
}

/// Everything the evaluate stage produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub seed: u64,
    pub diversity: Vec<MethodDiversity>,
    pub coherence: Vec<MethodOverlap>,
    pub novelty: Vec<MethodNovelty>,
    pub comparisons: Vec<Comparison>,
    pub reconstruction: Vec<ReconstructionReport>,
    pub stability: Option<Stability>,
    pub embeddings: Vec<LabeledEmbedding>,
}

/// Mean pairwise similarity of repeated reconstructions, per combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub reconstructions: usize,
    pub per_combo: Vec<f64>,
    pub mean: f64,
}

impl EvaluationReport {
    pub fn new(seed: u64) -> Self {
        EvaluationReport {
            seed,
            diversity: Vec::new(),
            coherence: Vec::new(),
            novelty: Vec::new(),
            comparisons: Vec::new(),
            reconstruction: Vec::new(),
            stability: None,
            embeddings: Vec::new(),
        }
    }

    pub fn summary(&self) -> Summary {
        let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        Summary {
            schema: REPORT_SCHEMA.to_string(),
            seed: self.seed,
            diversity: self.diversity.clone(),
            coherence: self
                .coherence
                .iter()
                .map(|m| OverlapSummary {
                    method: m.method.clone(),
                    candidates: m.overlap.per_candidate.len(),
                    max_int_mean: m.overlap.max_int_mean,
                    max_jac_mean: m.overlap.max_jac_mean,
                })
                .collect(),
            novelty: self
                .novelty
                .iter()
                .map(|m| NoveltySummary {
                    method: m.method.clone(),
                    proxy: m.proxy,
                    candidates: m.distances.len(),
                    mean_distance: mean(&m.distances),
                })
                .collect(),
            comparisons: self.comparisons.clone(),
            reconstruction: self
                .reconstruction
                .iter()
                .map(|r| ReconstructionSummary {
                    representation: r.representation,
                    histogram: r.histogram,
                    mean: r.mean,
                    rated: r.ratings.len(),
                    empty_inputs: r.empty_inputs,
                    failures: r.failures.len(),
                })
                .collect(),
            stability: self.stability.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSummary {
    pub method: String,
    pub candidates: usize,
    pub max_int_mean: f64,
    pub max_jac_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltySummary {
    pub method: String,
    pub proxy: bool,
    pub candidates: usize,
    pub mean_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSummary {
    pub representation: Representation,
    pub histogram: [usize; 5],
    pub mean: f64,
    pub rated: usize,
    pub empty_inputs: usize,
    pub failures: usize,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub seed: u64,
    pub diversity: Vec<MethodDiversity>,
    pub coherence: Vec<OverlapSummary>,
    pub novelty: Vec<NoveltySummary>,
    pub comparisons: Vec<Comparison>,
    pub reconstruction: Vec<ReconstructionSummary>,
    pub stability: Option<Stability>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityRow {
    pub method: String,
    pub unique_atoms: usize,
    pub coverage: f64,
    pub gini: f64,
    pub mean_repetition: f64,
    pub top10_share: f64,
    pub total_selections: u64,
    pub vocab_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceRow {
    pub method: String,
    pub candidate: usize,
    /// Space-separated atom ids.
    pub atoms: String,
    pub max_int: usize,
    pub max_jac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltyRow {
    pub method: String,
    pub candidate: usize,
    pub proxy: bool,
    pub distance: f64,
}

pub const DIVERSITY_CSV: &str = "diversity.csv";
pub const COHERENCE_CSV: &str = "coherence.csv";
pub const NOVELTY_CSV: &str = "novelty.csv";
pub const EMBEDDINGS_CSV: &str = "embeddings.csv";
pub const SUMMARY_JSON: &str = "summary.json";

fn csv_bytes<T: Serialize>(what: &'static str, rows: &[T], header: &[&str]) -> Result<Vec<u8>, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header).map_err(|e| EvalError::Csv { what, source: e })?;
    }
    for row in rows {
        w.serialize(row).map_err(|e| EvalError::Csv { what, source: e })?;
    }
    w.into_inner().map_err(|e| EvalError::Csv {
        what,
        source: e.into_error().into(),
    })
}

pub fn diversity_rows(report: &EvaluationReport) -> Vec<DiversityRow> {
    report
        .diversity
        .iter()
        .map(|m| DiversityRow {
            method: m.method.clone(),
            unique_atoms: m.report.unique_atoms,
            coverage: m.report.coverage,
            gini: m.report.gini,
            mean_repetition: m.report.mean_repetition,
            top10_share: m.report.top10_share,
            total_selections: m.report.total_selections,
            vocab_size: m.report.vocab_size,
        })
        .collect()
}

pub fn coherence_rows(report: &EvaluationReport) -> Vec<CoherenceRow> {
    report
        .coherence
        .iter()
        .flat_map(|m| {
            m.overlap.per_candidate.iter().enumerate().map(|(i, c)| CoherenceRow {
                method: m.method.clone(),
                candidate: i,
                atoms: c.atoms.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
                max_int: c.max_int,
                max_jac: c.max_jac,
            })
        })
        .collect()
}

pub fn novelty_rows(report: &EvaluationReport) -> Vec<NoveltyRow> {
    report
        .novelty
        .iter()
        .flat_map(|m| {
            m.distances.iter().enumerate().map(|(i, &d)| NoveltyRow {
                method: m.method.clone(),
                candidate: i,
                proxy: m.proxy,
                distance: d,
            })
        })
        .collect()
}

fn embeddings_bytes(embeddings: &[LabeledEmbedding]) -> Result<Vec<u8>, EvalError> {
    let what = "embeddings";
    let dim = embeddings.first().map_or(0, |e| e.vector.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string()];
    header.extend((0..dim).map(|i| format!("v{i}")));
    w.write_record(&header).map_err(|e| EvalError::Csv { what, source: e })?;
    for e in embeddings {
        if e.vector.len() != dim {
            return Err(EvalError::DimensionMismatch {
                expected: dim,
                found: e.vector.len(),
            });
        }
        let mut rec = vec![e.id.clone()];
        rec.extend(e.vector.iter().map(f64::to_string));
        w.write_record(&rec).map_err(|e| EvalError::Csv { what, source: e })?;
    }
    w.into_inner().map_err(|e| EvalError::Csv {
        what,
        source: e.into_error().into(),
    })
}

/// Writes the CSV tables and `summary.json` into `dir`, each atomically, and
/// returns the paths written.
pub fn emit_report(report: &EvaluationReport, dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    let files: Vec<(&str, Vec<u8>)> = vec![
        (
            DIVERSITY_CSV,
            csv_bytes(
                "diversity",
                &diversity_rows(report),
                &[
                    "method",
                    "unique_atoms",
                    "coverage",
                    "gini",
                    "mean_repetition",
                    "top10_share",
                    "total_selections",
                    "vocab_size",
                ],
            )?,
        ),
        (
            COHERENCE_CSV,
            csv_bytes(
                "coherence",
                &coherence_rows(report),
                &["method", "candidate", "atoms", "max_int", "max_jac"],
            )?,
        ),
        (
            NOVELTY_CSV,
            csv_bytes("novelty", &novelty_rows(report), &["method", "candidate", "proxy", "distance"])?,
        ),
        (EMBEDDINGS_CSV, embeddings_bytes(&report.embeddings)?),
        (SUMMARY_JSON, {
            let mut bytes = serde_json::to_vec_pretty(&report.summary()).map_err(|e| {
                EvalError::Artifact(ArtifactError::Serialize {
                    what: "summary",
                    source: e,
                })
            })?;
            bytes.push(b'\n');
            bytes
        }),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = dir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

/// Reads one of the CSV tables back.
pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvalError> {
    let what = "csv table";
    let mut r = csv::Reader::from_path(path).map_err(|e| EvalError::Csv { what, source: e })?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| EvalError::Csv { what, source: e })
}

//! Metrics for comparing atom selection methods.
//!
//! * [`diversity`]: coverage, Gini, repetition and top-10 concentration of
//!   atom usage.
//! * [`coherence_overlap`]: how closely candidates resemble real papers.
//! * [`novelty`]: embedding distance from the nearest corpus paper.
//! * [`mann_whitney`]: two-sample rank test with rank-biserial effect size.
//! * [`reconstruction_eval`] and [`stability_eval`]: how much of an idea
//!   survives being reduced to atoms.

mod diversity;
mod overlap;
mod reconstruction;
mod report;
mod stats;

pub use diversity::{diversity, diversity_from_counts, gini, DiversityReport, SelectionCounts};
pub use overlap::{coherence_overlap, novelty, CandidateOverlap, OverlapReport};
pub use reconstruction::{
    mean_by_representation, reconstruction_eval, representation_texts, stability_eval, PaperRating,
    ReconstructionInputs, ReconstructionReport, Representation,
};
pub use report::{
    coherence_rows, diversity_rows, emit_report, novelty_rows, read_csv, CoherenceRow, Comparison, DiversityRow,
    EvaluationReport, LabeledEmbedding, MethodDiversity, MethodNovelty, MethodOverlap, NoveltyRow, NoveltySummary,
    OverlapSummary, ReconstructionSummary, Stability, Summary, COHERENCE_CSV, DIVERSITY_CSV, EMBEDDINGS_CSV, NOVELTY_CSV,
    REPORT_SCHEMA, SUMMARY_JSON,
};
pub use stats::{mann_whitney, mann_whitney_normal_p, normal_p, rank_biserial, MannWhitney, EXACT_LIMIT};

use crate::io::ArtifactError;
use crate::providers::ProviderError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no {0} to evaluate")]
    Empty(&'static str),
    #[error("atom {atom} is outside a vocabulary of {vocab_size}")]
    AtomOutOfRange { atom: usize, vocab_size: usize },
    #[error("embedding dimension {found} differs from {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("writing {what}: {source}")]
    Csv {
        what: &'static str,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

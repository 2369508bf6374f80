//! Idea atoms and alien research directions.
//!
//! The crate turns a corpus of papers into a discrete vocabulary of *idea
//! atoms* and then searches that vocabulary for combinations that are
//! coherent (they read like real research) yet unlikely to be proposed by a
//! typical researcher. The pipeline is:
//!
//! 1. [`corpus`]: load or fetch papers and group them into researcher profiles.
//! 2. [`providers`]: distill papers, extract conceptual units and embed text
//!    through an OpenAI-compatible endpoint or a deterministic offline mock.
//! 3. [`clustering`]: HDBSCAN over unit embeddings.
//! 4. [`atomizer`]: clusters become atoms; papers and researchers become
//!    atom sequences.
//! 5. [`seqmodel`]: smoothed autoregressive models over atom tokens, one for
//!    coherence and one for availability.
//! 6. [`sampler`]: sample, score, rank, fuse with reciprocal rank fusion.
//! 7. [`evaluation`]: diversity, overlap, novelty and reconstruction metrics.
//!
//! The guide in `book/` walks through each stage with runnable snippets.

pub mod atomizer;
pub mod clustering;
pub mod corpus;
pub mod evaluation;
pub mod io;
pub mod providers;
pub mod sampler;
pub mod seqmodel;
pub mod transport;

pub use atomizer::{AtomVocabulary, PaperAtomSeq, ResearcherAtomSeq};
pub use clustering::{hdbscan, ClusterLabels, ClusterParams};
pub use corpus::{Corpus, Paper, ResearcherProfile};
pub use sampler::{Candidate, SamplerConfig};
pub use seqmodel::AtomLm;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/atoms.md")]
    mod atoms {}
    #[doc = include_str!("../../../book/src/seqmodel.md")]
    mod seqmodel {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}

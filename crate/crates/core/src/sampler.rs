//! Alien sampling: draw candidates from the coherence model, rank them by
//! coherence (high first) and by availability (low first), and fuse the two
//! rankings with reciprocal rank fusion.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atomizer::AtomVocabulary;
use crate::seqmodel::{AtomLm, SampleOptions, SeqModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_candidates: usize,
    pub seq_length: usize,
    pub temperature: f64,
    pub rrf_k: f64,
    pub top_k: usize,
    pub seed: u64,
    pub allow_repeats: bool,
    /// Score availability as the mean over every ordering of the atoms
    /// instead of the sampled ordering.
    pub order_averaged_availability: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_candidates: 10_000,
            seq_length: 3,
            temperature: 1.0,
            rrf_k: 60.0,
            top_k: 300,
            seed: 0,
            allow_repeats: false,
            order_averaged_availability: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::InvalidConfig(m.to_string()));
        if self.n_candidates == 0 || self.seq_length == 0 || self.top_k == 0 {
            return bad("n_candidates, seq_length and top_k must be positive");
        }
        if self.top_k > self.n_candidates {
            return bad("top_k exceeds n_candidates");
        }
        if !(self.rrf_k > 0.0) {
            return bad("rrf_k must be positive");
        }
        if !(self.temperature >= 0.0) {
            return bad("temperature must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] SeqModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub atom_ids: Vec<usize>,
    pub c_score: f64,
    pub a_score: f64,
    /// 1-based; 1 is the most coherent.
    pub rank_c: usize,
    /// 1-based; 1 is the least available.
    pub rank_a: usize,
    pub rrf: f64,
}

impl Candidate {
    pub fn new(atom_ids: Vec<usize>) -> Self {
        Candidate {
            atom_ids,
            c_score: 0.0,
            a_score: 0.0,
            rank_c: 0,
            rank_a: 0,
            rrf: 0.0,
        }
    }

    pub fn to_record(&self, vocabulary: &AtomVocabulary) -> CandidateRecord {
        CandidateRecord {
            atoms: self.atom_ids.clone(),
            atom_texts: self.atom_ids.iter().map(|&a| vocabulary.text(a).to_string()).collect(),
            c_score: self.c_score,
            a_score: self.a_score,
            rank_c: self.rank_c,
            rank_a: self.rank_a,
            rrf: self.rrf,
        }
    }
}

/// One line of the candidate JSONL output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub atoms: Vec<usize>,
    pub atom_texts: Vec<String>,
    pub c_score: f64,
    pub a_score: f64,
    pub rank_c: usize,
    pub rank_a: usize,
    pub rrf: f64,
}

impl From<CandidateRecord> for Candidate {
    fn from(r: CandidateRecord) -> Self {
        Candidate {
            atom_ids: r.atoms,
            c_score: r.c_score,
            a_score: r.a_score,
            rank_c: r.rank_c,
            rank_a: r.rank_a,
            rrf: r.rrf,
        }
    }
}

/// `1/(k + rank_c) + 1/(k + rank_a)`.
#[inline]
pub fn rrf_score(rank_c: usize, rank_a: usize, k: f64) -> f64 {
    1.0 / (k + rank_c as f64) + 1.0 / (k + rank_a as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    /// Distinct atom sets, each in its most coherent sampled ordering.
    pub candidates: Vec<Candidate>,
    pub drawn: usize,
}

/// Samples `n_candidates` sequences and collapses orderings of the same atom
/// set, keeping the ordering with the highest coherence score (ties: the
/// lexicographically smallest). Output is ordered by atom set.
pub fn generate_candidates(coherence: &AtomLm, cfg: &SamplerConfig) -> Result<Generation, SamplerError> {
    cfg.validate()?;
    let draws = coherence.sample(
        cfg.n_candidates,
        cfg.seq_length,
        SampleOptions {
            temperature: cfg.temperature,
            seed: cfg.seed,
            allow_repeats: cfg.allow_repeats,
        },
    )?;
    let drawn = draws.len();
    let candidates = dedup_by_set(coherence, draws)?;
    Ok(Generation { candidates, drawn })
}

/// Collapses sequences with the same atom multiset to their most coherent
/// ordering.
pub fn dedup_by_set(coherence: &AtomLm, sequences: Vec<Vec<usize>>) -> Result<Vec<Candidate>, SamplerError> {
    let mut by_set: BTreeMap<Vec<usize>, Vec<Vec<usize>>> = BTreeMap::new();
    for seq in sequences {
        let mut key = seq.clone();
        key.sort_unstable();
        let orderings = by_set.entry(key).or_default();
        if !orderings.contains(&seq) {
            orderings.push(seq);
        }
    }
    by_set
        .into_values()
        .map(|orderings| {
            let mut best: Option<Candidate> = None;
            for seq in orderings {
                let score = coherence.score(&seq)?.score;
                let better = match &best {
                    None => true,
                    Some(b) => score > b.c_score || (score == b.c_score && seq < b.atom_ids),
                };
                if better {
                    let mut c = Candidate::new(seq);
                    c.c_score = score;
                    best = Some(c);
                }
            }
            Ok(best.expect("every set has at least one ordering"))
        })
        .collect()
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Scores every candidate under both models, then ranks and fuses.
pub fn rank_and_fuse(
    candidates: &[Candidate],
    coherence: &AtomLm,
    availability: &AtomLm,
    cfg: &SamplerConfig,
) -> Result<Vec<Candidate>, SamplerError> {
    let scored: Vec<Candidate> = candidates
        .par_iter()
        .map(|c| {
            let mut c = c.clone();
            c.c_score = coherence.score(&c.atom_ids)?.score;
            c.a_score = if cfg.order_averaged_availability && c.atom_ids.len() <= 6 {
                let perms = permutations(&c.atom_ids);
                let total: f64 = perms
                    .iter()
                    .map(|p| availability.score(p).map(|s| s.score))
                    .sum::<Result<f64, _>>()?;
                total / perms.len() as f64
            } else {
                availability.score(&c.atom_ids)?.score
            };
            Ok(c)
        })
        .collect::<Result<_, SeqModelError>>()?;
    Ok(fuse(scored, cfg.rrf_k))
}

/// Assigns ranks from existing `c_score`/`a_score` and sorts by RRF
/// (descending), breaking ties by atom ids.
pub fn fuse(mut candidates: Vec<Candidate>, k: f64) -> Vec<Candidate> {
    let m = candidates.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        candidates[j]
            .c_score
            .total_cmp(&candidates[i].c_score)
            .then_with(|| candidates[i].atom_ids.cmp(&candidates[j].atom_ids))
    });
    for (rank, &i) in order.iter().enumerate() {
        candidates[i].rank_c = rank + 1;
    }
    order.sort_by(|&i, &j| {
        candidates[i]
            .a_score
            .total_cmp(&candidates[j].a_score)
            .then_with(|| candidates[i].atom_ids.cmp(&candidates[j].atom_ids))
    });
    for (rank, &i) in order.iter().enumerate() {
        candidates[i].rank_a = rank + 1;
    }
    for c in candidates.iter_mut() {
        c.rrf = rrf_score(c.rank_c, c.rank_a, k);
    }
    candidates.sort_by(|a, b| b.rrf.total_cmp(&a.rrf).then_with(|| a.atom_ids.cmp(&b.atom_ids)));
    candidates
}

/// The first `top_k` of a fused ranking (all of it, with a warning, when
/// fewer exist).
pub fn select_top(ranked: &[Candidate], top_k: usize) -> Vec<Candidate> {
    if top_k > ranked.len() {
        log::warn!("requested top {top_k} but only {} candidates survive", ranked.len());
    }
    ranked.iter().take(top_k).cloned().collect()
}

/// The `top_k` candidates by coherence rank alone.
pub fn coherence_top(ranked: &[Candidate], top_k: usize) -> Vec<Candidate> {
    let mut by_c = ranked.to_vec();
    by_c.sort_by_key(|c| c.rank_c);
    by_c.truncate(top_k);
    by_c
}

/// `n` independent draws of `length` distinct atoms, uniformly at random.
pub fn random_baseline(atom_count: usize, n: usize, length: usize, seed: u64) -> Result<Vec<Vec<usize>>, SamplerError> {
    if atom_count < length {
        return Err(SamplerError::Model(SeqModelError::VocabularyTooSmall {
            length,
            atoms: atom_count,
        }));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| rand::seq::index::sample(&mut rng, atom_count, length).into_vec())
        .collect())
}

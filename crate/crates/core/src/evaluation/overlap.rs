use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::providers::{dot, EmbeddingVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateOverlap {
    pub atoms: Vec<usize>,
    pub max_int: usize,
    pub max_jac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub max_int_mean: f64,
    pub max_jac_mean: f64,
    pub per_candidate: Vec<CandidateOverlap>,
}

fn as_set(atoms: &[usize]) -> Vec<usize> {
    let mut s = atoms.to_vec();
    s.sort_unstable();
    s.dedup();
    s
}

/// Per candidate, the largest intersection with any corpus paper's atom set
/// and, separately, the largest Jaccard similarity. The two maxima may come
/// from different papers.
pub fn coherence_overlap(candidates: &[Vec<usize>], corpus_sets: &[Vec<usize>]) -> Result<OverlapReport, EvalError> {
    if corpus_sets.is_empty() {
        return Err(EvalError::Empty("corpus atom sets"));
    }
    let corpus: Vec<Vec<usize>> = corpus_sets.iter().map(|s| as_set(s)).collect();
    let mut postings: HashMap<usize, Vec<usize>> = HashMap::new();
    for (p, set) in corpus.iter().enumerate() {
        for &a in set {
            postings.entry(a).or_default().push(p);
        }
    }
    let mut per_candidate = Vec::with_capacity(candidates.len());
    for cand in candidates {
        if cand.is_empty() {
            return Err(EvalError::Empty("candidate atom set"));
        }
        let set = as_set(cand);
        let mut shared: HashMap<usize, usize> = HashMap::new();
        for a in &set {
            for &p in postings.get(a).map(Vec::as_slice).unwrap_or(&[]) {
                *shared.entry(p).or_insert(0) += 1;
            }
        }
        let mut max_int = 0;
        let mut max_jac = 0.0f64;
        for (&p, &inter) in &shared {
            max_int = max_int.max(inter);
            let union = set.len() + corpus[p].len() - inter;
            max_jac = max_jac.max(inter as f64 / union as f64);
        }
        per_candidate.push(CandidateOverlap {
            atoms: cand.clone(),
            max_int,
            max_jac,
        });
    }
    let n = per_candidate.len().max(1) as f64;
    Ok(OverlapReport {
        max_int_mean: per_candidate.iter().map(|c| c.max_int as f64).sum::<f64>() / n,
        max_jac_mean: per_candidate.iter().map(|c| c.max_jac).sum::<f64>() / n,
        per_candidate,
    })
}

/// `1 − max cosine similarity` to the corpus, for each candidate. Inputs are
/// unit-norm, so cosine is a dot product.
pub fn novelty(candidates: &[EmbeddingVector], corpus: &[EmbeddingVector]) -> Result<Vec<f64>, EvalError> {
    let Some(first) = corpus.first() else {
        return Err(EvalError::Empty("corpus embeddings"));
    };
    let dim = first.dim();
    if let Some(bad) = corpus.iter().chain(candidates).find(|e| e.dim() != dim) {
        return Err(EvalError::DimensionMismatch {
            expected: dim,
            found: bad.dim(),
        });
    }
    Ok(candidates
        .iter()
        .map(|c| {
            let best = corpus
                .iter()
                .map(|p| dot(c.as_slice(), p.as_slice()))
                .fold(f64::NEG_INFINITY, f64::max);
            (1.0 - best).clamp(0.0, 2.0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_hand_case() {
        // {a,b,c} vs {{a,b,d},{c}}
        let r = coherence_overlap(&[vec![0, 1, 2]], &[vec![0, 1, 3], vec![2]]).unwrap();
        assert_eq!(r.per_candidate[0].max_int, 2);
        assert_eq!(r.per_candidate[0].max_jac, 0.5);
    }

    #[test]
    fn identical_set_gives_full_overlap() {
        let r = coherence_overlap(&[vec![4, 2, 9]], &[vec![1], vec![9, 4, 2]]).unwrap();
        assert_eq!(r.per_candidate[0].max_int, 3);
        assert_eq!(r.per_candidate[0].max_jac, 1.0);
    }

    #[test]
    fn overlap_errors() {
        assert!(coherence_overlap(&[vec![1]], &[]).is_err());
        assert!(coherence_overlap(&[vec![]], &[vec![1]]).is_err());
    }

    #[test]
    fn novelty_identity_and_orthogonality() {
        let e = |v: Vec<f64>| EmbeddingVector::normalized(v).unwrap();
        let corpus = vec![e(vec![1.0, 0.0, 0.0]), e(vec![0.0, 1.0, 0.0])];
        let d = novelty(&[e(vec![0.0, 1.0, 0.0]), e(vec![0.0, 0.0, 1.0])], &corpus).unwrap();
        assert_eq!(d, vec![0.0, 1.0]);
        assert!(matches!(
            novelty(&[e(vec![1.0, 0.0])], &corpus),
            Err(EvalError::DimensionMismatch { .. })
        ));
    }
}

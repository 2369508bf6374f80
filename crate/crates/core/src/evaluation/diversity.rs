use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// How often each atom was chosen across a batch of selections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionCounts {
    pub counts: BTreeMap<usize, u64>,
    pub total_selections: u64,
    pub vocab_size: usize,
}

impl SelectionCounts {
    pub fn tally(selections: &[Vec<usize>], vocab_size: usize) -> Result<Self, EvalError> {
        let mut counts = BTreeMap::new();
        let mut total = 0;
        for sel in selections {
            for &atom in sel {
                if atom >= vocab_size {
                    return Err(EvalError::AtomOutOfRange { atom, vocab_size });
                }
                *counts.entry(atom).or_insert(0) += 1;
                total += 1;
            }
        }
        Ok(SelectionCounts {
            counts,
            total_selections: total,
            vocab_size,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub unique_atoms: usize,
    pub coverage: f64,
    pub gini: f64,
    pub mean_repetition: f64,
    pub top10_share: f64,
    pub total_selections: u64,
    pub vocab_size: usize,
}

/// Gini coefficient `Σᵢ Σⱼ |xᵢ − xⱼ| / (2 n² x̄)`, computed in `O(n log n)`
/// from the sorted values. Zero for empty or all-zero input.
pub fn gini(values: &[f64]) -> f64 {
    let n = values.len();
    let total: f64 = values.iter().sum();
    if n == 0 || total == 0.0 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Σ_{i<j} (x_j - x_i) = Σ_j (2j - n + 1) x_j for 0-based j over sorted x.
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(j, &x)| (2.0 * j as f64 - n as f64 + 1.0) * x)
        .sum();
    weighted / (n as f64 * total)
}

/// Coverage, Gini over selected atoms, mean repetition, and the share of all
/// selections taken by the ten most-chosen atoms (ties by atom id).
pub fn diversity(selections: &[Vec<usize>], vocab_size: usize) -> Result<DiversityReport, EvalError> {
    if selections.is_empty() {
        return Err(EvalError::Empty("selections"));
    }
    let tally = SelectionCounts::tally(selections, vocab_size)?;
    Ok(diversity_from_counts(&tally))
}

pub fn diversity_from_counts(tally: &SelectionCounts) -> DiversityReport {
    let unique = tally.counts.len();
    let total = tally.total_selections;
    let values: Vec<f64> = tally.counts.values().map(|&c| c as f64).collect();
    let mut ranked: Vec<(usize, u64)> = tally.counts.iter().map(|(&a, &c)| (a, c)).collect();
    ranked.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
    let top10: u64 = ranked.iter().take(10).map(|&(_, c)| c).sum();
    let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
    DiversityReport {
        unique_atoms: unique,
        coverage: ratio(unique as f64, tally.vocab_size as f64),
        gini: gini(&values),
        mean_repetition: ratio(total as f64, unique as f64),
        top10_share: ratio(top10 as f64, total as f64),
        total_selections: total,
        vocab_size: tally.vocab_size,
    }
}

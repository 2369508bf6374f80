//! Mann-Whitney U with rank-biserial effect size.

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Above this `n₁·n₂` the p-value uses the normal approximation.
pub const EXACT_LIMIT: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// Rank-biserial magnitude `|1 − 2U/(n₁n₂)|`.
    pub r: f64,
    pub n1: usize,
    pub n2: usize,
    /// Number of groups of tied values (size ≥ 2).
    pub tie_groups: usize,
    pub exact: bool,
}

struct Ranked {
    /// Midranks doubled so they are integers.
    doubled: Vec<u64>,
    /// Σ(t³ − t) over tie groups.
    tie_term: f64,
    tie_groups: usize,
}

fn rank(a: &[f64], b: &[f64]) -> Ranked {
    let mut all: Vec<(f64, usize)> = a.iter().chain(b).copied().zip(0..).collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut doubled = vec![0u64; all.len()];
    let mut tie_term = 0.0;
    let mut tie_groups = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share the midrank (i + j + 2) / 2.
        let mid2 = (i + j + 2) as u64;
        for item in &all[i..=j] {
            doubled[item.1] = mid2;
        }
        let t = (j - i + 1) as f64;
        if t > 1.0 {
            tie_groups += 1;
            tie_term += t * t * t - t;
        }
        i = j + 1;
    }
    Ranked {
        doubled,
        tie_term,
        tie_groups,
    }
}

/// Two-sided test of whether `a` and `b` come from the same distribution.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<MannWhitney, EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::Empty("Mann-Whitney sample"));
    }
    let (n1, n2) = (a.len(), b.len());
    let ranked = rank(a, b);
    let r1_doubled: u64 = ranked.doubled[..n1].iter().sum();
    let u = r1_doubled as f64 / 2.0 - (n1 * (n1 + 1)) as f64 / 2.0;
    let exact = n1 * n2 <= EXACT_LIMIT;
    let p = if exact {
        exact_p(&ranked.doubled, n1, r1_doubled)
    } else {
        normal_p(u, n1, n2, ranked.tie_term)
    };
    Ok(MannWhitney {
        u,
        p,
        r: (1.0 - 2.0 * u / (n1 * n2) as f64).abs(),
        n1,
        n2,
        tie_groups: ranked.tie_groups,
        exact,
    })
}

/// Rank-biserial magnitude for a reported U.
pub fn rank_biserial(u: f64, n1: usize, n2: usize) -> f64 {
    (1.0 - 2.0 * u / (n1 * n2) as f64).abs()
}

/// Normal approximation with tie and continuity corrections.
pub fn normal_p(u: f64, n1: usize, n2: usize, tie_term: f64) -> f64 {
    let (f1, f2) = (n1 as f64, n2 as f64);
    let n = f1 + f2;
    let tie_adj = if n > 1.0 { tie_term / (n * (n - 1.0)) } else { 0.0 };
    let var = f1 * f2 / 12.0 * ((n + 1.0) - tie_adj);
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - f1 * f2 / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
    statrs::function::erf::erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Normal-approximation p-value for raw samples, for comparison with the
/// exact path.
pub fn mann_whitney_normal_p(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::Empty("Mann-Whitney sample"));
    }
    let ranked = rank(a, b);
    let n1 = a.len();
    let r1: u64 = ranked.doubled[..n1].iter().sum();
    let u = r1 as f64 / 2.0 - (n1 * (n1 + 1)) as f64 / 2.0;
    Ok(normal_p(u, n1, b.len(), ranked.tie_term))
}

/// Exact permutation p-value: the fraction of size-`n1` subsets of the
/// (doubled mid-)ranks whose rank sum is at least as far from its mean as
/// the observed one. Counts subsets by dynamic programming over
/// (subset size, rank sum).
fn exact_p(doubled: &[u64], n1: usize, observed: u64) -> f64 {
    let max_sum: u64 = doubled.iter().sum();
    let width = max_sum as usize + 1;
    // ways[k * width + s]: subsets of size k with doubled rank sum s.
    let mut ways = vec![0f64; (n1 + 1) * width];
    ways[0] = 1.0;
    for &r in doubled {
        let r = r as usize;
        for k in (1..=n1).rev() {
            let (lower, upper) = ways.split_at_mut(k * width);
            let prev = &lower[(k - 1) * width..k * width];
            let cur = &mut upper[..width];
            for s in (r..width).rev() {
                let add = prev[s - r];
                if add != 0.0 {
                    cur[s] += add;
                }
            }
        }
    }
    let row = &ways[n1 * width..(n1 + 1) * width];
    let total: f64 = row.iter().sum();
    // Mean doubled rank sum is n1 (N + 1); compare doubled distances.
    let n = doubled.len() as i64;
    let mean2 = n1 as i64 * (n + 1);
    let obs_dev = (observed as i64 - mean2).abs();
    let extreme: f64 = row
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s as i64 - mean2).abs() >= obs_dev)
        .map(|(_, &w)| w)
        .sum();
    (extreme / total).min(1.0)
}

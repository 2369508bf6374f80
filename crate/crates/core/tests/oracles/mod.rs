//! Brute-force reference implementations shared by the integration tests
//! and the acceptance suite.

#![allow(dead_code)]

use ideaforge::clustering::{euclidean, CondensedNode, CondensedTree, PointFallout};
use ideaforge::sampler::Candidate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

/// k-th nearest neighbour distance by sorting every distance.
pub fn brute_core(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    (0..points.len())
        .map(|i| {
            let mut d: Vec<f64> = (0..points.len())
                .filter(|&j| j != i)
                .map(|j| euclidean(&points[i], &points[j]))
                .collect();
            d.sort_by(f64::total_cmp);
            d[k - 1]
        })
        .collect()
}

/// Kruskal over every pair of the mutual reachability graph.
pub fn kruskal_weight(points: &[Vec<f64>], core: &[f64]) -> f64 {
    let n = points.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let w = euclidean(&points[i], &points[j]).max(core[i]).max(core[j]);
            edges.push((w, i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    let mut total = 0.0;
    for (w, i, j) in edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a] = b;
            total += w;
        }
    }
    total
}

/// Three well-separated isotropic blobs of 20 points in 3-D, with labels.
pub fn three_gaussians(seed: u64) -> (Vec<Vec<f64>>, Vec<i64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let centres = [[0.0, 0.0, 0.0], [20.0, 0.0, 0.0], [0.0, 20.0, 0.0]];
    let mut pts = Vec::new();
    let mut truth = Vec::new();
    for (label, c) in centres.iter().enumerate() {
        for _ in 0..20 {
            pts.push(c.iter().map(|x| x + noise.sample(&mut rng)).collect());
            truth.push(label as i64);
        }
    }
    (pts, truth)
}

/// A random binary hierarchy with `splits` splits and random stabilities.
pub fn random_tree(rng: &mut ChaCha8Rng, splits: usize) -> CondensedTree {
    let mut nodes = vec![CondensedNode {
        id: 0,
        parent: None,
        lambda_birth: 0.0,
        lambda_death: 1.0,
        size: 64,
        stability: rng.random_range(0.0..3.0),
        children: vec![],
    }];
    for _ in 0..splits {
        let leaves: Vec<usize> = nodes.iter().filter(|n| n.children.is_empty()).map(|n| n.id).collect();
        let parent = leaves[rng.random_range(0..leaves.len())];
        for _ in 0..2 {
            let id = nodes.len();
            let birth = nodes[parent].lambda_death;
            nodes.push(CondensedNode {
                id,
                parent: Some(parent),
                lambda_birth: birth,
                lambda_death: birth + 1.0,
                size: 2,
                stability: rng.random_range(0.0..3.0),
                children: vec![],
            });
            nodes[parent].children.push(id);
        }
    }
    let points = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| PointFallout {
            point: i,
            cluster: n.id,
            lambda: n.lambda_death,
        })
        .collect();
    let n_points = nodes.len();
    CondensedTree {
        nodes,
        points,
        root: 0,
        n_points,
    }
}

fn is_ancestor(tree: &CondensedTree, a: usize, mut b: usize) -> bool {
    while let Some(p) = tree.nodes[b].parent {
        if p == a {
            return true;
        }
        b = p;
    }
    false
}

/// Best antichain of non-root nodes by exhaustive subset search.
pub fn best_antichain(tree: &CondensedTree) -> (f64, Vec<usize>) {
    let candidates: Vec<usize> = (0..tree.nodes.len()).filter(|&i| i != tree.root).collect();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for mask in 0u32..(1 << candidates.len()) {
        let set: Vec<usize> = (0..candidates.len())
            .filter(|b| mask & (1 << b) != 0)
            .map(|b| candidates[b])
            .collect();
        let antichain = set
            .iter()
            .all(|&a| set.iter().all(|&b| a == b || (!is_ancestor(tree, a, b) && !is_ancestor(tree, b, a))));
        if !antichain {
            continue;
        }
        let total: f64 = set.iter().map(|&i| tree.nodes[i].stability).sum();
        if total > best.0 {
            best = (total, set);
        }
    }
    best
}

pub fn scored(ids: &[usize], c: f64, a: f64) -> Candidate {
    Candidate {
        c_score: c,
        a_score: a,
        ..Candidate::new(ids.to_vec())
    }
}

/// Five candidates (coherence descending, availability ascending) and their
/// hand-assigned ranks.
pub fn rrf_hand_table() -> (Vec<Candidate>, Vec<(Vec<usize>, usize, usize)>) {
    let cands = vec![
        scored(&[0, 1, 2], -1.0, -3.0),
        scored(&[0, 1, 3], -2.0, -1.0),
        scored(&[0, 1, 4], -3.0, -5.0),
        scored(&[0, 2, 3], -4.0, -2.0),
        scored(&[1, 2, 3], -5.0, -4.0),
    ];
    let ranks = vec![
        (vec![0, 1, 2], 1, 3),
        (vec![0, 1, 3], 2, 5),
        (vec![0, 1, 4], 3, 1),
        (vec![0, 2, 3], 4, 4),
        (vec![1, 2, 3], 5, 2),
    ];
    (cands, ranks)
}

/// Largest intersection and largest Jaccard of `cand` against any paper.
pub fn brute_overlap(cand: &[usize], corpus: &[Vec<usize>]) -> (usize, f64) {
    let mut best_int = 0;
    let mut best_jac = 0.0f64;
    for paper in corpus {
        let inter = cand.iter().filter(|a| paper.contains(a)).count();
        let union = cand.len() + paper.len() - inter;
        best_int = best_int.max(inter);
        best_jac = best_jac.max(inter as f64 / union as f64);
    }
    (best_int, best_jac)
}

/// `1 − max dot product` against the corpus.
pub fn brute_novelty(cand: &[f64], corpus: &[&[f64]]) -> f64 {
    let best = corpus
        .iter()
        .map(|p| cand.iter().zip(p.iter()).map(|(x, y)| x * y).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    1.0 - best
}

pub fn random_set(rng: &mut ChaCha8Rng, atoms: usize, max_len: usize) -> Vec<usize> {
    let len = rng.random_range(1..=max_len);
    let mut s: Vec<usize> = (0..len).map(|_| rng.random_range(0..atoms)).collect();
    s.sort();
    s.dedup();
    s
}

pub fn pairwise_gini(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let mut s = 0.0;
    for a in x {
        for b in x {
            s += (a - b).abs();
        }
    }
    s / (2.0 * n * n * mean)
}

/// U by counting pairs, ties as one half.
pub fn pair_u(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for x in a {
        for y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

/// Two-sided permutation p-value by listing every relabelling.
pub fn brute_mw_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (n1, n) = (a.len(), pooled.len());
    let centre = (a.len() * b.len()) as f64 / 2.0;
    let observed = (pair_u(a, b) - centre).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let x: Vec<f64> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| pooled[i]).collect();
        let y: Vec<f64> = (0..n).filter(|i| mask & (1 << i) == 0).map(|i| pooled[i]).collect();
        total += 1;
        if (pair_u(&x, &y) - centre).abs() >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

/// Pearson chi-square statistic.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum()
}

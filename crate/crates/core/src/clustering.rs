//! Hierarchical density-based clustering (HDBSCAN).
//!
//! The stages are exposed individually so each can be checked on its own:
//!
//! * [`core_distances`]: distance from each point to its `min_samples`-th
//!   nearest neighbour (the point itself excluded).
//! * [`mutual_reachability`]: `max(core_a, core_b, d(a, b))`.
//! * [`build_mst`]: Prim's algorithm over the implicit complete
//!   mutual-reachability graph, `O(n²)` time and `O(n)` memory.
//! * [`condense`]: the single-linkage hierarchy of the MST, pruned so that a
//!   cluster only splits when both sides keep `min_cluster_size` points.
//! * [`extract_clusters`]: excess-of-mass selection over the condensed tree.
//!
//! Ties are broken by the lowest point index throughout, so a run is a pure
//! function of the input order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// λ assigned to zero-length edges (exact duplicates).
pub const LAMBDA_CAP: f64 = 1e12;

const PARALLEL_THRESHOLD: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            min_cluster_size: 5,
            min_samples: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("point {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("need at least {needed} points, got {n}")]
    TooFewPoints { n: usize, needed: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Per-point cluster assignment; `-1` is noise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabels {
    pub labels: Vec<i64>,
    pub cluster_count: usize,
}

impl ClusterLabels {
    pub const NOISE: i64 = -1;

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == Self::NOISE).count()
    }

    /// Point indices of each cluster, in label order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count];
        for (i, &l) in self.labels.iter().enumerate() {
            if l >= 0 {
                out[l as usize].push(i);
            }
        }
        out
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check_points(points: &[Vec<f64>]) -> Result<(), ClusterError> {
    let Some(first) = points.first() else {
        return Ok(());
    };
    let dim = first.len();
    for (index, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(ClusterError::DimensionMismatch {
                index,
                expected: dim,
                found: p.len(),
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(ClusterError::NonFinite { index });
        }
    }
    Ok(())
}

pub fn core_distances(points: &[Vec<f64>], min_samples: usize) -> Result<Vec<f64>, ClusterError> {
    if min_samples < 1 {
        return Err(ClusterError::InvalidParams("min_samples must be >= 1".into()));
    }
    check_points(points)?;
    let n = points.len();
    if n < min_samples + 1 {
        return Err(ClusterError::TooFewPoints {
            n,
            needed: min_samples + 1,
        });
    }
    let row = |i: usize| {
        let mut d: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| euclidean(&points[i], &points[j]))
            .collect();
        let (_, kth, _) = d.select_nth_unstable_by(min_samples - 1, f64::total_cmp);
        *kth
    };
    Ok(if n >= PARALLEL_THRESHOLD {
        (0..n).into_par_iter().map(row).collect()
    } else {
        (0..n).map(row).collect()
    })
}

#[inline]
pub fn mutual_reachability(distance: f64, core_a: f64, core_b: f64) -> f64 {
    distance.max(core_a).max(core_b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    /// Lower endpoint index.
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Minimum spanning tree of the mutual-reachability graph, sorted by
/// `(weight, u, v)`. Returns `n - 1` edges (none when `n < 2`).
pub fn build_mst(points: &[Vec<f64>], core: &[f64]) -> Vec<MstEdge> {
    let n = points.len();
    assert_eq!(n, core.len(), "one core distance per point");
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut best_from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0usize;
    in_tree[0] = true;

    for _ in 1..n {
        let relax = |(v, (b, from)): (usize, (&mut f64, &mut usize))| {
            let w = mutual_reachability(euclidean(&points[current], &points[v]), core[current], core[v]);
            if w < *b {
                *b = w;
                *from = current;
            }
        };
        if n >= PARALLEL_THRESHOLD {
            best.par_iter_mut()
                .zip(best_from.par_iter_mut())
                .enumerate()
                .filter(|(v, _)| !in_tree[*v])
                .for_each(relax);
        } else {
            best.iter_mut()
                .zip(best_from.iter_mut())
                .enumerate()
                .filter(|(v, _)| !in_tree[*v])
                .for_each(relax);
        }

        let mut next = usize::MAX;
        let mut next_w = f64::INFINITY;
        for v in 0..n {
            if !in_tree[v] && (next == usize::MAX || best[v] < next_w) {
                next = v;
                next_w = best[v];
            }
        }
        in_tree[next] = true;
        let from = best_from[next];
        edges.push(MstEdge {
            u: from.min(next),
            v: from.max(next),
            weight: next_w,
        });
        current = next;
    }
    sort_edges(&mut edges);
    edges
}

pub(crate) fn sort_edges(edges: &mut [MstEdge]) {
    edges.sort_by(|a, b| {
        a.weight
            .total_cmp(&b.weight)
            .then(a.u.cmp(&b.u))
            .then(a.v.cmp(&b.v))
    });
}

fn weight_to_lambda(weight: f64) -> f64 {
    if weight <= 0.0 {
        LAMBDA_CAP
    } else {
        (1.0 / weight).min(LAMBDA_CAP)
    }
}

/// A cluster in the condensed hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensedNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub lambda_birth: f64,
    /// λ at which the cluster split into children, or the largest λ at which
    /// one of its points fell out if it never split.
    pub lambda_death: f64,
    /// Points in the cluster at birth.
    pub size: usize,
    pub stability: f64,
    pub children: Vec<usize>,
}

/// A point leaving cluster `cluster` at density `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointFallout {
    pub point: usize,
    pub cluster: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensedTree {
    /// Node ids equal their index; children always have larger ids than
    /// their parent.
    pub nodes: Vec<CondensedNode>,
    pub points: Vec<PointFallout>,
    pub root: usize,
    pub n_points: usize,
}

impl CondensedTree {
    /// Checks the structural invariants; returns a description of the first
    /// violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        for node in &self.nodes {
            if node.stability < 0.0 {
                return Err(format!("node {} has negative stability", node.id));
            }
            let child_sizes: usize = node.children.iter().map(|&c| self.nodes[c].size).sum();
            if child_sizes > node.size {
                return Err(format!("node {} children exceed its size", node.id));
            }
            for &c in &node.children {
                let child = &self.nodes[c];
                if child.parent != Some(node.id) || c <= node.id {
                    return Err(format!("node {c} is not a well-formed child of {}", node.id));
                }
                if child.lambda_birth < node.lambda_birth {
                    return Err(format!("node {c} born before its parent {}", node.id));
                }
            }
        }
        let mut seen = vec![false; self.n_points];
        for p in &self.points {
            if std::mem::replace(&mut seen[p.point], true) {
                return Err(format!("point {} falls out twice", p.point));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err("some point never falls out".into());
        }
        Ok(())
    }

    /// Cluster ids under `node`, including `node`.
    pub fn descendants(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(c) = stack.pop() {
            out.push(c);
            stack.extend(self.nodes[c].children.iter().copied());
        }
        out
    }
}

/// Single-linkage merge tree over the sorted MST: leaves `0..n`, internal
/// nodes `n..2n-1`.
struct LinkageTree {
    left: Vec<usize>,
    right: Vec<usize>,
    weight: Vec<f64>,
    size: Vec<usize>,
    min_leaf: Vec<usize>,
    n: usize,
}

impl LinkageTree {
    fn from_mst(edges: &[MstEdge], n: usize) -> Self {
        let total = 2 * n - 1;
        let mut parent: Vec<usize> = (0..total).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut tree = LinkageTree {
            left: vec![usize::MAX; total],
            right: vec![usize::MAX; total],
            weight: vec![0.0; total],
            size: vec![1; total],
            min_leaf: (0..total).collect(),
            n,
        };
        let mut next = n;
        for e in edges {
            let a = find(&mut parent, e.u);
            let b = find(&mut parent, e.v);
            debug_assert_ne!(a, b, "MST edges must not form a cycle");
            let (a, b) = if tree.min_leaf[a] <= tree.min_leaf[b] { (a, b) } else { (b, a) };
            tree.left[next] = a;
            tree.right[next] = b;
            tree.weight[next] = e.weight;
            tree.size[next] = tree.size[a] + tree.size[b];
            tree.min_leaf[next] = tree.min_leaf[a];
            parent[a] = next;
            parent[b] = next;
            next += 1;
        }
        tree
    }

    fn is_leaf(&self, node: usize) -> bool {
        node < self.n
    }

    fn leaves(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if self.is_leaf(x) {
                out.push(x);
            } else {
                stack.push(self.right[x]);
                stack.push(self.left[x]);
            }
        }
        out
    }
}

/// Builds the condensed tree from a (sorted) MST over `n` points.
pub fn condense(mst: &[MstEdge], n: usize, min_cluster_size: usize) -> CondensedTree {
    assert!(n >= 1, "cannot condense an empty point set");
    assert_eq!(mst.len(), n - 1, "MST must have n - 1 edges");
    let mut sorted = mst.to_vec();
    sort_edges(&mut sorted);
    let linkage = LinkageTree::from_mst(&sorted, n);
    let mcs = min_cluster_size.max(1);

    let mut nodes = vec![CondensedNode {
        id: 0,
        parent: None,
        lambda_birth: 0.0,
        lambda_death: 0.0,
        size: n,
        stability: 0.0,
        children: Vec::new(),
    }];
    let mut fallouts: Vec<PointFallout> = Vec::with_capacity(n);
    let root_link = 2 * n - 2;
    let mut stack = vec![(root_link, 0usize)];

    while let Some((link, cluster)) = stack.pop() {
        if linkage.is_leaf(link) {
            let lambda = nodes[cluster].lambda_birth;
            fallouts.push(PointFallout {
                point: link,
                cluster,
                lambda,
            });
            continue;
        }
        let lambda = weight_to_lambda(linkage.weight[link]);
        let (l, r) = (linkage.left[link], linkage.right[link]);
        let (l_big, r_big) = (linkage.size[l] >= mcs, linkage.size[r] >= mcs);
        if l_big && r_big {
            nodes[cluster].lambda_death = lambda;
            // Push right first so the left child is condensed (and numbered) first.
            let mut born = Vec::with_capacity(2);
            for child_link in [l, r] {
                let id = nodes.len();
                nodes.push(CondensedNode {
                    id,
                    parent: Some(cluster),
                    lambda_birth: lambda,
                    lambda_death: lambda,
                    size: linkage.size[child_link],
                    stability: 0.0,
                    children: Vec::new(),
                });
                nodes[cluster].children.push(id);
                born.push((child_link, id));
            }
            stack.push(born[1]);
            stack.push(born[0]);
        } else {
            for (child_link, big) in [(r, r_big), (l, l_big)] {
                if big {
                    stack.push((child_link, cluster));
                } else {
                    for point in linkage.leaves(child_link) {
                        fallouts.push(PointFallout {
                            point,
                            cluster,
                            lambda,
                        });
                    }
                }
            }
        }
    }

    for f in &fallouts {
        let node = &mut nodes[f.cluster];
        node.stability += f.lambda - node.lambda_birth;
        if node.children.is_empty() && f.lambda > node.lambda_death {
            node.lambda_death = f.lambda;
        }
    }
    for id in 1..nodes.len() {
        let (parent, birth, size) = {
            let c = &nodes[id];
            (c.parent.expect("non-root has a parent"), c.lambda_birth, c.size)
        };
        let p = &mut nodes[parent];
        p.stability += (birth - p.lambda_birth) * size as f64;
    }
    fallouts.sort_by_key(|f| f.point);
    CondensedTree {
        nodes,
        points: fallouts,
        root: 0,
        n_points: n,
    }
}

/// Excess-of-mass selection. A node is chosen iff its stability strictly
/// exceeds the best total achievable below it. The root is only eligible when
/// it never splits. Returns chosen node ids in ascending order.
pub fn select_clusters(tree: &CondensedTree) -> Vec<usize> {
    let root = &tree.nodes[tree.root];
    if root.children.is_empty() {
        return vec![tree.root];
    }
    let m = tree.nodes.len();
    let mut best = vec![0.0f64; m];
    let mut chosen = vec![false; m];
    for id in (0..m).rev() {
        let node = &tree.nodes[id];
        let below: f64 = node.children.iter().map(|&c| best[c]).sum();
        if node.children.is_empty() || (id != tree.root && node.stability > below) {
            chosen[id] = true;
            best[id] = node.stability;
        } else {
            best[id] = below;
        }
    }
    // Keep only the topmost chosen node on each root-to-leaf path.
    let mut selected = Vec::new();
    let mut stack = root.children.clone();
    while let Some(id) = stack.pop() {
        if chosen[id] {
            selected.push(id);
        } else {
            stack.extend(tree.nodes[id].children.iter().copied());
        }
    }
    selected.sort_unstable();
    selected
}

/// Labels every point with the selected cluster containing it. Labels are
/// numbered by each cluster's smallest point index.
pub fn extract_clusters(tree: &CondensedTree) -> ClusterLabels {
    let selected = select_clusters(tree);
    let mut owner: Vec<Option<usize>> = vec![None; tree.nodes.len()];
    for &s in &selected {
        for d in tree.descendants(s) {
            owner[d] = Some(s);
        }
    }
    let mut point_owner = vec![None; tree.n_points];
    for f in &tree.points {
        point_owner[f.point] = owner[f.cluster];
    }
    let mut first_point: Vec<(usize, usize)> = selected
        .iter()
        .filter_map(|&s| point_owner.iter().position(|o| *o == Some(s)).map(|p| (p, s)))
        .collect();
    first_point.sort_unstable();
    let mut label_of = vec![ClusterLabels::NOISE; tree.nodes.len()];
    for (label, &(_, s)) in first_point.iter().enumerate() {
        label_of[s] = label as i64;
    }
    ClusterLabels {
        labels: point_owner
            .iter()
            .map(|o| o.map_or(ClusterLabels::NOISE, |s| label_of[s]))
            .collect(),
        cluster_count: first_point.len(),
    }
}

/// Labels plus the intermediate structures, for inspection and debugging.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Clustering {
    pub labels: ClusterLabels,
    pub tree: CondensedTree,
    pub mst: Vec<MstEdge>,
}

pub fn hdbscan(points: &[Vec<f64>], params: ClusterParams) -> Result<ClusterLabels, ClusterError> {
    hdbscan_detailed(points, params).map(|c| c.labels)
}

pub fn hdbscan_detailed(points: &[Vec<f64>], params: ClusterParams) -> Result<Clustering, ClusterError> {
    if params.min_cluster_size < 2 {
        return Err(ClusterError::InvalidParams("min_cluster_size must be >= 2".into()));
    }
    let n = points.len();
    if n < params.min_cluster_size {
        return Err(ClusterError::TooFewPoints {
            n,
            needed: params.min_cluster_size,
        });
    }
    let core = core_distances(points, params.min_samples)?;
    let mst = build_mst(points, &core);
    let tree = condense(&mst, n, params.min_cluster_size);
    let labels = extract_clusters(&tree);
    Ok(Clustering { labels, tree, mst })
}

/// Adjusted Rand index between two labelings; noise (`-1`) counts as one
/// more label. Returns 1.0 when both labelings are trivial and identical.
pub fn adjusted_rand_index(a: &[i64], b: &[i64]) -> f64 {
    use std::collections::HashMap;
    assert_eq!(a.len(), b.len(), "labelings must cover the same points");
    let n = a.len() as f64;
    let choose2 = |x: f64| x * (x - 1.0) / 2.0;
    let mut table: HashMap<(i64, i64), f64> = HashMap::new();
    let mut rows: HashMap<i64, f64> = HashMap::new();
    let mut cols: HashMap<i64, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *rows.entry(x).or_default() += 1.0;
        *cols.entry(y).or_default() += 1.0;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(n);
    let max = 0.5 * (sum_a + sum_b);
    if (max - expected).abs() < f64::EPSILON {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

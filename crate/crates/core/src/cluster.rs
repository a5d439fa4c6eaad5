//! Density-based semantic de-duplication.
//!
//! The clustering follows HDBSCAN: core distances, mutual reachability, a
//! dense Prim minimum spanning tree, a single-linkage hierarchy condensed by
//! `min_cluster_size`, and excess-of-mass cluster selection. Edges of equal
//! weight are merged as one hierarchy level, so a level may split a cluster
//! into more than two components.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::MaintenanceLog;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding has a non-finite entry")]
    NonFinite,
    #[error("embedding has zero norm")]
    ZeroNorm,
    #[error("corpus of {n} points is too small for min_samples = {k}")]
    CorpusTooSmall { n: usize, k: usize },
    #[error("invalid dedup parameters: {0}")]
    Params(&'static str),
}

/// A unit-length embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// L2-normalizes raw values.
    pub fn normalized(values: Vec<f64>) -> Result<Self, ClusterError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ClusterError::NonFinite);
        }
        let norm = libm::sqrt(values.iter().map(|v| v * v).sum::<f64>());
        if norm == 0.0 || !norm.is_finite() {
            return Err(ClusterError::ZeroNorm);
        }
        Ok(EmbeddingVector(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// `1 - u·v`, clamped to `[0, 2]` against rounding.
pub fn cosine_distance(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, ClusterError> {
    if u.dimension() != v.dimension() {
        return Err(ClusterError::DimensionMismatch { expected: u.dimension(), got: v.dimension() });
    }
    let dot: f64 = u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum();
    Ok((1.0 - dot).clamp(0.0, 2.0))
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn add_random(acc: &mut [f64], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for a in acc.iter_mut() {
        *a += rand::Rng::gen_range(&mut rng, -1.0..1.0);
    }
}

/// Deterministic stand-in for a sentence-embedding model in offline runs.
/// Each lowercased alphanumeric token maps to a pseudo-random vector seeded
/// by its hash; the text vector is their normalized sum, so texts sharing
/// words lie close together. Token-free text hashes as a whole.
pub fn hash_embedding(text: &str, dimension: usize) -> EmbeddingVector {
    let mut acc = alloc::vec![0.0; dimension];
    for token in text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
        add_random(&mut acc, fnv1a(token.to_lowercase().bytes()));
    }
    let mut salt = 0u64;
    loop {
        if let Ok(v) = EmbeddingVector::normalized(acc.clone()) {
            return v;
        }
        add_random(&mut acc, fnv1a(text.bytes()) ^ salt);
        salt += 1;
    }
}

/// Full pairwise cosine distance matrix, row-major.
pub fn distance_matrix(vectors: &[EmbeddingVector]) -> Result<Vec<f64>, ClusterError> {
    let n = vectors.len();
    if let Some(first) = vectors.first() {
        for v in vectors {
            if v.dimension() != first.dimension() {
                return Err(ClusterError::DimensionMismatch { expected: first.dimension(), got: v.dimension() });
            }
        }
    }
    let mut m = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = cosine_distance(&vectors[i], &vectors[j])?;
            m[i * n + j] = d;
            m[j * n + i] = d;
        }
    }
    Ok(m)
}

/// Distance from each point to its `k`-th nearest other point.
pub fn core_distances<F>(n: usize, k: usize, dist: F) -> Result<Vec<f64>, ClusterError>
where
    F: Fn(usize, usize) -> f64,
{
    if k == 0 || n <= k {
        return Err(ClusterError::CorpusTooSmall { n, k });
    }
    let mut row = Vec::with_capacity(n - 1);
    Ok((0..n)
        .map(|i| {
            row.clear();
            row.extend((0..n).filter(|&j| j != i).map(|j| dist(i, j)));
            let (_, kth, _) = row.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
            *kth
        })
        .collect())
}

pub fn mutual_reachability(dist_ij: f64, core_i: f64, core_j: f64) -> f64 {
    dist_ij.max(core_i).max(core_j)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    /// Smaller endpoint.
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

fn edge_key(w: f64, i: usize, j: usize) -> (f64, usize, usize) {
    (w, i.min(j), i.max(j))
}

fn key_less(x: (f64, usize, usize), y: (f64, usize, usize)) -> bool {
    match x.0.total_cmp(&y.0) {
        core::cmp::Ordering::Less => true,
        core::cmp::Ordering::Greater => false,
        core::cmp::Ordering::Equal => (x.1, x.2) < (y.1, y.2),
    }
}

/// Dense Prim over a complete graph. Ties go to the smaller `(i, j)` pair.
pub fn minimum_spanning_tree<F>(n: usize, weight: F) -> Vec<MstEdge>
where
    F: Fn(usize, usize) -> f64,
{
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = alloc::vec![false; n];
    let mut best: Vec<Option<(f64, usize, usize)>> = alloc::vec![None; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let cand = edge_key(weight(current, v), current, v);
            if best[v].is_none_or(|b| key_less(cand, b)) {
                best[v] = Some(cand);
            }
        }
        let mut next: Option<(usize, (f64, usize, usize))> = None;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            if let Some(b) = best[v] {
                if next.is_none_or(|(_, nb)| key_less(b, nb)) {
                    next = Some((v, b));
                }
            }
        }
        let (v, (w, a, b)) = next.expect("complete graph always has a crossing edge");
        in_tree[v] = true;
        edges.push(MstEdge { a, b, weight: w });
        current = v;
    }
    edges
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DedupParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub representatives_per_cluster: usize,
    pub seed: u64,
}

impl Default for DedupParams {
    fn default() -> Self {
        DedupParams { min_cluster_size: 5, min_samples: 5, representatives_per_cluster: 3, seed: 42 }
    }
}

impl DedupParams {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.min_cluster_size < 2 {
            return Err(ClusterError::Params("min_cluster_size must be at least 2"));
        }
        if self.min_samples < 1 {
            return Err(ClusterError::Params("min_samples must be at least 1"));
        }
        if self.representatives_per_cluster < 1 {
            return Err(ClusterError::Params("representatives_per_cluster must be at least 1"));
        }
        Ok(())
    }
}

/// Cluster id per point, `None` for noise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<Option<usize>>,
}

impl ClusterAssignment {
    pub fn cluster_count(&self) -> usize {
        self.labels.iter().flatten().max().map_or(0, |m| m + 1)
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = alloc::vec![0; self.cluster_count()];
        for c in self.labels.iter().flatten() {
            sizes[*c] += 1;
        }
        sizes
    }
}

/// Density for a merge distance. Zero distance maps to a large finite value so
/// stability sums stay finite.
fn lambda(distance: f64, n: usize) -> f64 {
    let cap = f64::MAX / (4.0 * (n as f64 + 1.0));
    if distance <= 0.0 {
        cap
    } else {
        (1.0 / distance).min(cap)
    }
}

/// Node of the multi-way single-linkage hierarchy.
#[derive(Debug, Clone)]
enum Node {
    Leaf(usize),
    Merge { distance: f64, children: Vec<usize>, size: usize },
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Builds the hierarchy bottom-up; returns nodes and the root index.
fn build_hierarchy(n: usize, mst: &[MstEdge]) -> (Vec<Node>, usize) {
    let mut nodes: Vec<Node> = (0..n).map(Node::Leaf).collect();
    let mut sizes: Vec<usize> = alloc::vec![1; n];
    let mut uf = UnionFind::new(n);
    // node currently representing each union-find root
    let mut node_of: Vec<usize> = (0..n).collect();

    let mut order: Vec<&MstEdge> = mst.iter().collect();
    order.sort_by(|x, y| x.weight.total_cmp(&y.weight).then((x.a, x.b).cmp(&(y.a, y.b))));

    let mut i = 0;
    while i < order.len() {
        let w = order[i].weight;
        let mut j = i;
        while j < order.len() && order[j].weight.total_cmp(&w).is_eq() {
            j += 1;
        }
        let level = &order[i..j];
        // components touched at this level, before merging
        let mut touched: Vec<usize> = Vec::new();
        for e in level {
            for p in [e.a, e.b] {
                let r = uf.find(p);
                if !touched.contains(&r) {
                    touched.push(r);
                }
            }
        }
        let before: Vec<(usize, usize, usize)> = touched.iter().map(|&r| (r, node_of[r], sizes[r])).collect();
        for e in level {
            let (ra, rb) = (uf.find(e.a), uf.find(e.b));
            if ra != rb {
                uf.parent[rb] = ra;
            }
        }
        let mut merged: BTreeMap<usize, (Vec<usize>, usize)> = BTreeMap::new();
        for (old_root, node, size) in before {
            let new_root = uf.find(old_root);
            let slot = merged.entry(new_root).or_default();
            slot.0.push(node);
            slot.1 += size;
        }
        for (root, (children, size)) in merged {
            let idx = nodes.len();
            nodes.push(Node::Merge { distance: w, children, size });
            node_of[root] = idx;
            sizes[root] = size;
        }
        i = j;
    }
    let root = node_of[uf.find(0)];
    (nodes, root)
}

fn node_size(nodes: &[Node], idx: usize) -> usize {
    match &nodes[idx] {
        Node::Leaf(_) => 1,
        Node::Merge { size, .. } => *size,
    }
}

fn collect_points(nodes: &[Node], idx: usize, out: &mut Vec<usize>) {
    let mut stack = alloc::vec![idx];
    while let Some(i) = stack.pop() {
        match &nodes[i] {
            Node::Leaf(p) => out.push(*p),
            Node::Merge { children, .. } => stack.extend(children.iter().copied()),
        }
    }
}

/// One cluster of the condensed tree.
#[derive(Debug, Clone)]
struct Condensed {
    parent: Option<usize>,
    birth: f64,
    stability: f64,
    members: Vec<usize>,
    children: Vec<usize>,
}

fn condense(nodes: &[Node], root: usize, n: usize, min_cluster_size: usize) -> Vec<Condensed> {
    let mut clusters = Vec::new();
    let mut root_members = Vec::new();
    collect_points(nodes, root, &mut root_members);
    clusters.push(Condensed { parent: None, birth: 0.0, stability: 0.0, members: root_members, children: Vec::new() });

    // (hierarchy node, cluster it currently belongs to)
    let mut work = alloc::vec![(root, 0usize)];
    while let Some((idx, cid)) = work.pop() {
        let Node::Merge { distance, children, .. } = &nodes[idx] else {
            // a lone leaf still inside a cluster leaves at the cap density
            let birth = clusters[cid].birth;
            clusters[cid].stability += lambda(0.0, n) - birth;
            continue;
        };
        let lam = lambda(*distance, n);
        let birth = clusters[cid].birth;
        let big: Vec<usize> = children.iter().copied().filter(|&c| node_size(nodes, c) >= min_cluster_size).collect();
        for &c in children {
            let size = node_size(nodes, c);
            if size < min_cluster_size || big.len() >= 2 {
                clusters[cid].stability += size as f64 * (lam - birth);
            }
        }
        match big.len() {
            0 => {}
            1 => work.push((big[0], cid)),
            _ => {
                for c in big {
                    let mut members = Vec::new();
                    collect_points(nodes, c, &mut members);
                    let new_id = clusters.len();
                    clusters.push(Condensed {
                        parent: Some(cid),
                        birth: lam,
                        stability: 0.0,
                        members,
                        children: Vec::new(),
                    });
                    clusters[cid].children.push(new_id);
                    work.push((c, new_id));
                }
            }
        }
    }
    clusters
}

/// Excess-of-mass selection: a cluster is kept over its descendants when its
/// stability is at least the sum of theirs. The root is selected only when it
/// never splits.
fn select_clusters(clusters: &[Condensed]) -> Vec<usize> {
    let m = clusters.len();
    let mut best = alloc::vec![0.0f64; m];
    let mut selected = alloc::vec![false; m];
    // children always have larger ids than their parents
    for c in (0..m).rev() {
        let child_sum: f64 = clusters[c].children.iter().map(|&k| best[k]).sum();
        let is_root = clusters[c].parent.is_none();
        if clusters[c].children.is_empty() || (!is_root && clusters[c].stability >= child_sum) {
            best[c] = clusters[c].stability;
            selected[c] = true;
        } else {
            best[c] = child_sum;
        }
    }
    // keep only selected clusters without a selected ancestor
    let mut out = Vec::new();
    for c in 0..m {
        if !selected[c] {
            continue;
        }
        let mut p = clusters[c].parent;
        let mut shadowed = false;
        while let Some(pi) = p {
            if selected[pi] {
                shadowed = true;
                break;
            }
            p = clusters[pi].parent;
        }
        if !shadowed {
            out.push(c);
        }
    }
    out
}

/// Flat clusters from an MST over `n` points. Selected clusters are numbered
/// by their smallest member index.
pub fn extract_flat_clusters(n: usize, mst: &[MstEdge], min_cluster_size: usize) -> ClusterAssignment {
    let mut labels = alloc::vec![None; n];
    if n == 0 || n < min_cluster_size {
        return ClusterAssignment { labels };
    }
    let (nodes, root) = if n == 1 { (alloc::vec![Node::Leaf(0)], 0) } else { build_hierarchy(n, mst) };
    let clusters = condense(&nodes, root, n, min_cluster_size);
    let mut chosen: Vec<&Vec<usize>> = select_clusters(&clusters).into_iter().map(|c| &clusters[c].members).collect();
    chosen.sort_by_key(|m| m.iter().min().copied());
    for (id, members) in chosen.into_iter().enumerate() {
        for &p in members {
            labels[p] = Some(id);
        }
    }
    ClusterAssignment { labels }
}

/// Core distances, mutual reachability, MST and flat extraction over a
/// precomputed symmetric distance function.
pub fn cluster_points<F>(n: usize, dist: F, params: &DedupParams) -> Result<ClusterAssignment, ClusterError>
where
    F: Fn(usize, usize) -> f64,
{
    params.validate()?;
    if n < params.min_cluster_size || n <= params.min_samples {
        return Ok(ClusterAssignment { labels: alloc::vec![None; n] });
    }
    let core = core_distances(n, params.min_samples, &dist)?;
    let mst = minimum_spanning_tree(n, |i, j| mutual_reachability(dist(i, j), core[i], core[j]));
    Ok(extract_flat_clusters(n, &mst, params.min_cluster_size))
}

/// Keeps up to `representatives_per_cluster` seeded picks per cluster plus
/// every noise point. Output keeps input order.
pub fn sample_representatives(
    assignment: &ClusterAssignment,
    logs: &[MaintenanceLog],
    params: &DedupParams,
) -> Vec<MaintenanceLog> {
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, label) in assignment.labels.iter().enumerate() {
        if let Some(c) = label {
            members.entry(*c).or_default().push(i);
        }
    }
    let mut keep: Vec<bool> = assignment.labels.iter().map(Option::is_none).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for group in members.values() {
        let take = params.representatives_per_cluster.min(group.len());
        for pick in rand::seq::index::sample(&mut rng, group.len(), take).into_iter() {
            keep[group[pick]] = true;
        }
    }
    logs.iter().zip(keep).filter(|(_, k)| *k).map(|(l, _)| l.clone()).collect()
}

/// Counts for the cluster report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster_sizes: Vec<usize>,
    pub noise: usize,
    pub retained: usize,
}

impl ClusterSummary {
    pub fn new(assignment: &ClusterAssignment, retained: usize) -> Self {
        ClusterSummary { cluster_sizes: assignment.cluster_sizes(), noise: assignment.noise_count(), retained }
    }
}

/// Log ids grouped by cluster, for reports.
pub fn members_by_cluster(assignment: &ClusterAssignment, logs: &[MaintenanceLog]) -> Vec<Vec<String>> {
    let mut out = alloc::vec![Vec::new(); assignment.cluster_count()];
    for (label, log) in assignment.labels.iter().zip(logs) {
        if let Some(c) = label {
            out[*c].push(log.log_id.clone());
        }
    }
    out
}

//! Partitioning a graph into `k = round(n * r)` connected clusters and building
//! the coarsened graph `A' = PᵀAP`, `D' = PᵀDP`, `X' = P̃ᵀX`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Error, Result};
use crate::graph::{Graph, Labels, Split};
use crate::matrix::Matrix;
use crate::sparse::Csr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CoarsenMethod {
    /// Repeated heaviest-edge matching with contraction. Ties go to the
    /// smallest cluster id, so the result does not depend on the seed.
    HeavyEdge,
    /// Greedy BFS region growing from high-degree seeds towards `n / k` nodes
    /// per region. The seed orders equal-degree seeds.
    NeighborhoodGrowth,
}

impl CoarsenMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CoarsenMethod::HeavyEdge => "heavy_edge",
            CoarsenMethod::NeighborhoodGrowth => "neighborhood_growth",
        }
    }
}

impl fmt::Display for CoarsenMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CoarsenMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heavy_edge" => Ok(CoarsenMethod::HeavyEdge),
            "neighborhood_growth" => Ok(CoarsenMethod::NeighborhoodGrowth),
            other => bail!(InvalidArgument, "unknown coarsening method {:?}", other),
        }
    }
}

/// Node-to-cluster assignment realising the binary partition matrix `P`.
///
/// Cluster ids are ordered by their smallest member, so the identity
/// partition has `assign[i] == i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionMatrix {
    assign: Vec<usize>,
    cluster_sizes: Vec<usize>,
}

impl PartitionMatrix {
    /// Wraps an assignment whose cluster ids cover `0..k` without gaps.
    pub fn from_assignment(assign: Vec<usize>) -> Result<Self> {
        let k = assign.iter().max().map_or(0, |m| m + 1);
        let mut cluster_sizes = vec![0usize; k];
        for &c in &assign {
            cluster_sizes[c] += 1;
        }
        if let Some(j) = cluster_sizes.iter().position(|&s| s == 0) {
            bail!(Validation, "cluster {} is empty", j);
        }
        Ok(Self {
            assign,
            cluster_sizes,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            assign: (0..n).collect(),
            cluster_sizes: vec![1; n],
        }
    }

    /// Relabels arbitrary cluster ids in order of smallest member.
    pub fn canonical(assign: &[usize]) -> Result<Self> {
        let mut relabel = BTreeMap::new();
        let out = assign
            .iter()
            .map(|&c| {
                let next = relabel.len();
                *relabel.entry(c).or_insert(next)
            })
            .collect();
        Self::from_assignment(out)
    }

    pub fn n(&self) -> usize {
        self.assign.len()
    }

    pub fn k(&self) -> usize {
        self.cluster_sizes.len()
    }

    pub fn assign(&self) -> &[usize] {
        &self.assign
    }

    #[inline]
    pub fn cluster_of(&self, v: usize) -> usize {
        self.assign[v]
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.cluster_sizes
    }

    /// Members of every cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self
            .cluster_sizes
            .iter()
            .map(|&s| Vec::with_capacity(s))
            .collect();
        for (v, &c) in self.assign.iter().enumerate() {
            out[c].push(v);
        }
        out
    }

    /// Entry of `P̃ = P C^{-1/2}` in row `v`.
    pub fn normalized_weight(&self, v: usize) -> f64 {
        1.0 / libm::sqrt(self.cluster_sizes[self.assign[v]] as f64)
    }

    /// Dense `n x k` view of `P` or, when `normalized`, of `P̃`.
    pub fn to_dense(&self, normalized: bool) -> Matrix {
        let mut m = Matrix::zeros(self.n(), self.k());
        for v in 0..self.n() {
            m[(v, self.assign[v])] = if normalized {
                self.normalized_weight(v)
            } else {
                1.0
            };
        }
        m
    }

    pub(crate) fn check_graph(&self, g: &Graph) -> Result<()> {
        if self.n() != g.n() {
            bail!(
                InvalidArgument,
                "partition covers {} nodes but the graph has {}",
                self.n(),
                g.n()
            );
        }
        Ok(())
    }
}

/// `k = round(n * r)` clamped to `[1, n]`.
pub fn target_clusters(n: usize, r: f64) -> Result<usize> {
    if !(r > 0.0 && r <= 1.0) {
        bail!(InvalidArgument, "coarsening ratio {} outside (0, 1]", r);
    }
    Ok((libm::round(n as f64 * r) as usize).clamp(1, n.max(1)))
}

/// Partitions `g` into `round(n * r)` clusters, each inducing a connected subgraph.
pub fn coarsen_partition(g: &Graph, r: f64, method: CoarsenMethod, seed: u64) -> Result<PartitionMatrix> {
    let k = target_clusters(g.n(), r)?;
    if g.n() == 0 {
        return Ok(PartitionMatrix::identity(0));
    }
    let (components, _) = g.components();
    if k < components {
        return Err(Error::TooFewClusters { k, components });
    }
    let clusters = match method {
        CoarsenMethod::HeavyEdge => heavy_edge(g, k)?,
        CoarsenMethod::NeighborhoodGrowth => neighborhood_growth(g, k, seed)?,
    };
    PartitionMatrix::canonical(&clusters)
}

fn heavy_edge(g: &Graph, k: usize) -> Result<Vec<usize>> {
    let n = g.n();
    let mut cg = ClusterGraph::new(g, &(0..n).collect::<Vec<_>>(), n);
    while cg.count > k {
        let before = cg.count;
        let mut matched = vec![false; n];
        for c in 0..n {
            if cg.count == k {
                break;
            }
            if !cg.alive[c] || matched[c] {
                continue;
            }
            matched[c] = true;
            let mut best: Option<(usize, f64)> = None;
            for (&nb, &w) in &cg.adj[c] {
                if !matched[nb] && best.is_none_or(|(_, bw)| w > bw) {
                    best = Some((nb, w));
                }
            }
            if let Some((nb, _)) = best {
                matched[nb] = true;
                cg.merge(c, nb);
            }
        }
        if cg.count == before {
            cg.merge_smallest_adjacent(k)?;
        }
    }
    Ok(cg.resolve())
}

fn neighborhood_growth(g: &Graph, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = g.n();
    let target = (n / k).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tiebreak: Vec<u64> = (0..n).map(|_| rng.random()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        g.degrees()[b]
            .total_cmp(&g.degrees()[a])
            .then(tiebreak[a].cmp(&tiebreak[b]))
            .then(a.cmp(&b))
    });

    let mut assign = vec![usize::MAX; n];
    let mut regions = 0;
    let mut queue = alloc::collections::VecDeque::new();
    for &s in &order {
        if assign[s] != usize::MAX {
            continue;
        }
        let c = regions;
        regions += 1;
        assign[s] = c;
        let mut size = 1;
        queue.clear();
        queue.push_back(s);
        'grow: while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                if size >= target {
                    break 'grow;
                }
                if assign[v] == usize::MAX {
                    assign[v] = c;
                    size += 1;
                    queue.push_back(v);
                }
            }
        }
    }
    let mut cg = ClusterGraph::new(g, &assign, regions);
    cg.merge_smallest_adjacent(k)?;
    Ok(cg.resolve())
}

/// Mutable quotient graph used while merging clusters.
struct ClusterGraph {
    node_cluster: Vec<usize>,
    redirect: Vec<usize>,
    size: Vec<usize>,
    alive: Vec<bool>,
    adj: Vec<BTreeMap<usize, f64>>,
    count: usize,
}

impl ClusterGraph {
    fn new(g: &Graph, assign: &[usize], clusters: usize) -> Self {
        let mut size = vec![0; clusters];
        let mut adj = vec![BTreeMap::new(); clusters];
        for (u, &cu) in assign.iter().enumerate() {
            size[cu] += 1;
            for (v, w) in g.edges_of(u) {
                let cv = assign[v];
                if cu != cv {
                    *adj[cu].entry(cv).or_insert(0.0) += w;
                }
            }
        }
        Self {
            node_cluster: assign.to_vec(),
            redirect: (0..clusters).collect(),
            size,
            alive: vec![true; clusters],
            adj,
            count: clusters,
        }
    }

    fn merge(&mut self, keep: usize, gone: usize) {
        debug_assert!(keep != gone && self.alive[keep] && self.alive[gone]);
        let moved = core::mem::take(&mut self.adj[gone]);
        self.adj[keep].remove(&gone);
        for (nb, w) in moved {
            if nb == keep {
                continue;
            }
            let back = self.adj[nb].remove(&gone).unwrap_or(0.0);
            *self.adj[nb].entry(keep).or_insert(0.0) += back;
            *self.adj[keep].entry(nb).or_insert(0.0) += w;
        }
        self.size[keep] += self.size[gone];
        self.alive[gone] = false;
        self.redirect[gone] = keep;
        self.count -= 1;
    }

    /// Merges the smallest cluster that has a neighbour with its smallest
    /// neighbour until `k` clusters remain.
    fn merge_smallest_adjacent(&mut self, k: usize) -> Result<()> {
        let mut by_size: BTreeSet<(usize, usize)> = (0..self.alive.len())
            .filter(|&c| self.alive[c])
            .map(|c| (self.size[c], c))
            .collect();
        while self.count > k {
            let Some(&(s, c)) = by_size.iter().find(|&&(_, c)| !self.adj[c].is_empty()) else {
                return Err(Error::TooFewClusters {
                    k,
                    components: self.count,
                });
            };
            let nb = *self.adj[c]
                .keys()
                .min_by_key(|&&nb| (self.size[nb], nb))
                .expect("non-empty adjacency");
            by_size.remove(&(s, c));
            by_size.remove(&(self.size[nb], nb));
            let (keep, gone) = (c.min(nb), c.max(nb));
            self.merge(keep, gone);
            by_size.insert((self.size[keep], keep));
        }
        Ok(())
    }

    fn find(&mut self, mut c: usize) -> usize {
        let mut root = c;
        while self.redirect[root] != root {
            root = self.redirect[root];
        }
        while self.redirect[c] != root {
            let next = self.redirect[c];
            self.redirect[c] = root;
            c = next;
        }
        root
    }

    fn resolve(mut self) -> Vec<usize> {
        let nodes = core::mem::take(&mut self.node_cluster);
        nodes.into_iter().map(|c| self.find(c)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoarseTask {
    Classification,
    Regression,
    None,
}

/// Majority train labels of the coarse nodes; `None` where a cluster has no train node.
#[derive(Clone, Debug, PartialEq)]
pub struct CoarseLabels {
    pub ids: Vec<Option<usize>>,
    pub num_classes: usize,
}

/// The reduced graph `G'` on `k` cluster nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct CoarsenedGraph {
    adjacency: Csr,
    degrees: Vec<f64>,
    features: Matrix,
    labels: Option<CoarseLabels>,
}

impl CoarsenedGraph {
    pub fn k(&self) -> usize {
        self.adjacency.n()
    }

    /// `PᵀAP`; the diagonal holds twice the intra-cluster weight.
    pub fn adjacency(&self) -> &Csr {
        &self.adjacency
    }

    /// Diagonal of `PᵀDP`.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// `P̃ᵀX`.
    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> Option<&CoarseLabels> {
        self.labels.as_ref()
    }
}

/// Diagonal of `D' = PᵀDP`: summed original degrees per cluster.
pub fn coarse_degree(g: &Graph, p: &PartitionMatrix) -> Result<Vec<f64>> {
    p.check_graph(g)?;
    let mut out = vec![0.0; p.k()];
    for (v, &d) in g.degrees().iter().enumerate() {
        out[p.cluster_of(v)] += d;
    }
    Ok(out)
}

pub fn build_coarsened_graph(g: &Graph, p: &PartitionMatrix, task: CoarseTask) -> Result<CoarsenedGraph> {
    p.check_graph(g)?;
    let triplets: Vec<(usize, usize, f64)> = g
        .adjacency()
        .triplets()
        .map(|(u, v, w)| (p.cluster_of(u), p.cluster_of(v), w))
        .collect();
    let adjacency = Csr::from_triplets(p.k(), &triplets)?;
    let degrees = coarse_degree(g, p)?;

    let x = g.features();
    let mut features = Matrix::zeros(p.k(), x.cols());
    for v in 0..g.n() {
        let scale = p.normalized_weight(v);
        let dst = features.row_mut(p.cluster_of(v));
        for (o, &xv) in dst.iter_mut().zip(x.row(v)) {
            *o += scale * xv;
        }
    }

    let labels = match task {
        CoarseTask::Classification => {
            let Labels::Classes { ids, num_classes } = g.labels() else {
                bail!(InvalidArgument, "classification coarsening needs class labels");
            };
            let mut votes = vec![vec![0usize; *num_classes]; p.k()];
            for v in 0..g.n() {
                if g.splits()[v] == Split::Train {
                    votes[p.cluster_of(v)][ids[v]] += 1;
                }
            }
            let ids = votes
                .iter()
                .map(|counts| {
                    let mut best: Option<(usize, usize)> = None;
                    for (class, &c) in counts.iter().enumerate() {
                        if c > 0 && best.is_none_or(|(_, bc)| c > bc) {
                            best = Some((class, c));
                        }
                    }
                    best.map(|(class, _)| class)
                })
                .collect();
            Some(CoarseLabels {
                ids,
                num_classes: *num_classes,
            })
        }
        CoarseTask::Regression | CoarseTask::None => None,
    };

    Ok(CoarsenedGraph {
        adjacency,
        degrees,
        features,
        labels,
    })
}

//! Per-cluster subgraphs, Extra-Node and Cluster-Node augmentation, training
//! masks and the partition information-loss counts.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::coarsen::{CoarsenedGraph, PartitionMatrix};
use crate::error::{bail, Error, Result};
use crate::graph::{Graph, Labels, Split};
use crate::matrix::Matrix;
use crate::sparse::Csr;

/// Why a node is present in a subgraph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// Member of the cluster the subgraph realises.
    Core,
    /// 1-hop neighbour of a core node from another cluster.
    Extra,
    /// Representative of a neighbouring cluster.
    Cluster,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Core => "core",
            Provenance::Extra => "extra",
            Provenance::Cluster => "cluster",
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "core" => Ok(Provenance::Core),
            "extra" => Ok(Provenance::Extra),
            "cluster" => Ok(Provenance::Cluster),
            other => bail!(InvalidArgument, "unknown provenance {:?}", other),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Augmentation {
    None,
    Extra,
    Cluster,
}

impl Augmentation {
    pub fn as_str(self) -> &'static str {
        match self {
            Augmentation::None => "none",
            Augmentation::Extra => "extra",
            Augmentation::Cluster => "cluster",
        }
    }
}

impl fmt::Display for Augmentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Augmentation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Augmentation::None),
            "extra" => Ok(Augmentation::Extra),
            "cluster" => Ok(Augmentation::Cluster),
            other => bail!(InvalidArgument, "unknown augmentation {:?}", other),
        }
    }
}

/// One cluster's subgraph. Local nodes are ordered core, extra, cluster, each
/// group ascending by id.
#[derive(Clone, Debug, PartialEq)]
pub struct Subgraph {
    cluster: usize,
    /// Global node id for core and extra nodes, cluster id for cluster nodes.
    global_ids: Vec<usize>,
    provenance: Vec<Provenance>,
    adjacency: Csr,
    features: Matrix,
    /// Cluster nodes carry placeholder labels; they are never masked in.
    labels: Labels,
    orig_degree: Vec<f64>,
    train_mask: Vec<bool>,
    val_mask: Vec<bool>,
    test_mask: Vec<bool>,
    core_len: usize,
}

impl Subgraph {
    pub fn cluster(&self) -> usize {
        self.cluster
    }

    pub fn len(&self) -> usize {
        self.global_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global_ids.is_empty()
    }

    pub fn core_len(&self) -> usize {
        self.core_len
    }

    pub fn augmented_len(&self) -> usize {
        self.len() - self.core_len
    }

    pub fn global_ids(&self) -> &[usize] {
        &self.global_ids
    }

    pub fn core_ids(&self) -> &[usize] {
        &self.global_ids[..self.core_len]
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn adjacency(&self) -> &Csr {
        &self.adjacency
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn orig_degree(&self) -> &[f64] {
        &self.orig_degree
    }

    /// Core nodes in the training split.
    pub fn mask(&self) -> &[bool] {
        &self.train_mask
    }

    pub fn eval_mask(&self, split: Split) -> &[bool] {
        match split {
            Split::Val => &self.val_mask,
            Split::Test => &self.test_mask,
            _ => &self.train_mask,
        }
    }

    /// Local index of a core node given its global id.
    pub fn local_core_index(&self, global: usize) -> Option<usize> {
        self.core_ids().binary_search(&global).ok()
    }
}

/// The `k` disjoint subgraphs of a partition.
#[derive(Clone, Debug, PartialEq)]
pub struct SubgraphSet {
    subgraphs: Vec<Subgraph>,
    owner: Vec<usize>,
    augmentation: Augmentation,
}

impl SubgraphSet {
    pub fn subgraphs(&self) -> &[Subgraph] {
        &self.subgraphs
    }

    pub fn len(&self) -> usize {
        self.subgraphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subgraphs.is_empty()
    }

    pub fn owner(&self) -> &[usize] {
        &self.owner
    }

    pub fn augmentation(&self) -> Augmentation {
        self.augmentation
    }

    /// Total number of global nodes (each is core in exactly one subgraph).
    pub fn num_nodes(&self) -> usize {
        self.owner.len()
    }

    /// Largest number of appended nodes in any subgraph (`φ_max`).
    pub fn phi_max(&self) -> usize {
        self.subgraphs
            .iter()
            .map(Subgraph::augmented_len)
            .max()
            .unwrap_or(0)
    }

    fn check_unaugmented(&self, g: &Graph) -> Result<()> {
        if self.augmentation != Augmentation::None {
            return Err(Error::AlreadyAugmented);
        }
        if self.owner.len() != g.n() {
            bail!(
                InvalidArgument,
                "subgraph set covers {} nodes but the graph has {}",
                self.owner.len(),
                g.n()
            );
        }
        Ok(())
    }
}

struct ClusterNode<'a> {
    id: usize,
    features: &'a [f64],
    degree: f64,
}

/// Builds one subgraph. `extra_edges` are `(local, local, w)` pairs added on top
/// of the G-edges induced on core ∪ extra, listed once per direction.
fn assemble(
    g: &Graph,
    cluster: usize,
    core: &[usize],
    extra: &[usize],
    clusters: &[ClusterNode<'_>],
    extra_edges: &[(usize, usize, f64)],
    scratch: &mut [usize],
) -> Result<Subgraph> {
    let nodes: Vec<usize> = core.iter().chain(extra).copied().collect();
    for (l, &v) in nodes.iter().enumerate() {
        scratch[v] = l;
    }
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for (l, &v) in nodes.iter().enumerate() {
        for (u, w) in g.edges_of(v) {
            if scratch[u] != usize::MAX {
                triplets.push((l, scratch[u], w));
            }
        }
    }
    for &v in &nodes {
        scratch[v] = usize::MAX;
    }
    triplets.extend_from_slice(extra_edges);
    let len = nodes.len() + clusters.len();
    let adjacency = Csr::from_triplets(len, &triplets)?;

    let d = g.feature_dim();
    let mut features = Matrix::zeros(len, d);
    let mut orig_degree = Vec::with_capacity(len);
    for (l, &v) in nodes.iter().enumerate() {
        features.row_mut(l).copy_from_slice(g.features().row(v));
        orig_degree.push(g.degrees()[v]);
    }
    for (c, cn) in clusters.iter().enumerate() {
        features.row_mut(nodes.len() + c).copy_from_slice(cn.features);
        orig_degree.push(cn.degree);
    }
    let label_idx: Vec<Option<usize>> = nodes
        .iter()
        .map(|&v| Some(v))
        .chain(clusters.iter().map(|_| None))
        .collect();
    let mut provenance = vec![Provenance::Core; core.len()];
    provenance.extend(core::iter::repeat_n(Provenance::Extra, extra.len()));
    provenance.extend(core::iter::repeat_n(Provenance::Cluster, clusters.len()));
    let global_ids = nodes.iter().copied().chain(clusters.iter().map(|c| c.id)).collect();

    Ok(Subgraph {
        cluster,
        global_ids,
        provenance,
        adjacency,
        features,
        labels: g.labels().gather(&label_idx),
        orig_degree,
        train_mask: vec![false; len],
        val_mask: vec![false; len],
        test_mask: vec![false; len],
        core_len: core.len(),
    })
}

/// The induced subgraph of every cluster, without augmentation or masks.
pub fn induce_subgraphs(g: &Graph, p: &PartitionMatrix) -> Result<SubgraphSet> {
    p.check_graph(g)?;
    let mut scratch = vec![usize::MAX; g.n()];
    let subgraphs = p
        .members()
        .iter()
        .enumerate()
        .map(|(i, core)| assemble(g, i, core, &[], &[], &[], &mut scratch))
        .collect::<Result<Vec<_>>>()?;
    Ok(SubgraphSet {
        subgraphs,
        owner: p.assign().to_vec(),
        augmentation: Augmentation::None,
    })
}

/// Out-of-cluster 1-hop neighbours of the cores of cluster `cluster`, ascending.
fn outside_neighbors(g: &Graph, owner: &[usize], core: &[usize], cluster: usize) -> Vec<usize> {
    let set: BTreeSet<usize> = core
        .iter()
        .flat_map(|&v| g.neighbors(v).iter().copied())
        .filter(|&u| owner[u] != cluster)
        .collect();
    set.into_iter().collect()
}

/// `E_Gi`: the Extra Nodes of cluster `i`.
pub fn extra_nodes(g: &Graph, p: &PartitionMatrix, i: usize) -> Result<Vec<usize>> {
    p.check_graph(g)?;
    let members = p.members();
    let Some(core) = members.get(i) else {
        bail!(InvalidArgument, "cluster {} out of range", i);
    };
    Ok(outside_neighbors(g, p.assign(), core, i))
}

/// `C_Gi`: clusters owning at least one Extra Node of cluster `i`, ascending.
pub fn cluster_nodes(g: &Graph, p: &PartitionMatrix, i: usize) -> Result<Vec<usize>> {
    let set: BTreeSet<usize> = extra_nodes(g, p, i)?
        .into_iter()
        .map(|u| p.cluster_of(u))
        .collect();
    Ok(set.into_iter().collect())
}

/// Appends every out-of-cluster 1-hop neighbour with all of its G-edges to core
/// and extra nodes of the same subgraph.
pub fn augment_extra_nodes(g: &Graph, s: &SubgraphSet) -> Result<SubgraphSet> {
    s.check_unaugmented(g)?;
    let mut scratch = vec![usize::MAX; g.n()];
    let subgraphs = s
        .subgraphs
        .iter()
        .map(|sub| {
            let extra = outside_neighbors(g, &s.owner, sub.core_ids(), sub.cluster);
            let mut out = assemble(g, sub.cluster, sub.core_ids(), &extra, &[], &[], &mut scratch)?;
            copy_core_masks(sub, &mut out);
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SubgraphSet {
        subgraphs,
        owner: s.owner.clone(),
        augmentation: Augmentation::Extra,
    })
}

/// Appends one node per neighbouring cluster.
///
/// Cluster node `t` takes the coarse features `X'[t]` and coarse degree `D'[t]`.
/// It is linked to each boundary core node with the summed weight of that
/// node's edges into `C_t`, and to the other cluster nodes of the subgraph
/// with the coarse weight `A'[t1][t2]` where that is non-zero.
pub fn augment_cluster_nodes(
    g: &Graph,
    p: &PartitionMatrix,
    s: &SubgraphSet,
    gc: &CoarsenedGraph,
) -> Result<SubgraphSet> {
    s.check_unaugmented(g)?;
    p.check_graph(g)?;
    if p.assign() != &s.owner[..] {
        bail!(InvalidArgument, "partition does not match the subgraph set");
    }
    if gc.k() != p.k() {
        bail!(
            InvalidArgument,
            "coarse graph has {} nodes but the partition has {} clusters",
            gc.k(),
            p.k()
        );
    }
    let mut scratch = vec![usize::MAX; g.n()];
    let mut slot = vec![usize::MAX; p.k()];
    let mut subgraphs = Vec::with_capacity(s.len());
    for sub in &s.subgraphs {
        let i = sub.cluster;
        let core = sub.core_ids();
        let mut neighbors: BTreeSet<usize> = BTreeSet::new();
        for &v in core {
            neighbors.extend(g.neighbors(v).iter().map(|&u| p.cluster_of(u)).filter(|&t| t != i));
        }
        let ts: Vec<usize> = neighbors.into_iter().collect();
        for (c, &t) in ts.iter().enumerate() {
            slot[t] = core.len() + c;
        }

        let mut edges = Vec::new();
        let mut boundary = Vec::new();
        for (l, &v) in core.iter().enumerate() {
            boundary.clear();
            for (u, w) in g.edges_of(v) {
                let t = p.cluster_of(u);
                if t != i {
                    match boundary.iter_mut().find(|(bt, _)| *bt == t) {
                        Some((_, acc)) => *acc += w,
                        None => boundary.push((t, w)),
                    }
                }
            }
            for &(t, w) in &boundary {
                edges.push((l, slot[t], w));
                edges.push((slot[t], l, w));
            }
        }
        for &t1 in &ts {
            for (t2, w) in gc.adjacency().iter_row(t1) {
                if t2 != t1 && slot[t2] != usize::MAX && w != 0.0 {
                    edges.push((slot[t1], slot[t2], w));
                }
            }
        }
        for &t in &ts {
            slot[t] = usize::MAX;
        }

        let cluster_nodes: Vec<ClusterNode<'_>> = ts
            .iter()
            .map(|&t| ClusterNode {
                id: t,
                features: gc.features().row(t),
                degree: gc.degrees()[t],
            })
            .collect();
        let mut out = assemble(g, i, core, &[], &cluster_nodes, &edges, &mut scratch)?;
        copy_core_masks(sub, &mut out);
        subgraphs.push(out);
    }
    Ok(SubgraphSet {
        subgraphs,
        owner: s.owner.clone(),
        augmentation: Augmentation::Cluster,
    })
}

fn copy_core_masks(from: &Subgraph, to: &mut Subgraph) {
    let c = from.core_len;
    to.train_mask[..c].copy_from_slice(&from.train_mask[..c]);
    to.val_mask[..c].copy_from_slice(&from.val_mask[..c]);
    to.test_mask[..c].copy_from_slice(&from.test_mask[..c]);
}

/// Sets `mask[v] = core ∧ train` (and the val/test analogues) from the graph's splits.
pub fn build_masks(s: &SubgraphSet, g: &Graph) -> Result<SubgraphSet> {
    if s.owner.len() != g.n() {
        bail!(InvalidArgument, "subgraph set does not match the graph");
    }
    let mut out = s.clone();
    for sub in &mut out.subgraphs {
        for l in 0..sub.len() {
            let split = if sub.provenance[l] == Provenance::Core {
                g.splits()[sub.global_ids[l]]
            } else {
                Split::None
            };
            sub.train_mask[l] = split == Split::Train;
            sub.val_mask[l] = split == Split::Val;
            sub.test_mask[l] = split == Split::Test;
        }
    }
    Ok(out)
}

/// Index of the subgraph in which `node` is a core node.
pub fn locate_subgraph(s: &SubgraphSet, node: usize) -> Result<usize> {
    s.owner.get(node).copied().ok_or(Error::UnknownNode(node))
}

/// `I¹ᵢ`: nodes outside cluster `i` whose information a 1-layer model on the
/// bare subgraph never sees.
pub fn info_loss_l1(g: &Graph, p: &PartitionMatrix, i: usize) -> Result<usize> {
    Ok(extra_nodes(g, p, i)?.len())
}

/// `I²ᵢ`: as [`info_loss_l1`] for 2-hop neighbourhoods of the boundary core
/// nodes. With `augmented`, the Extra Nodes are treated as present.
pub fn info_loss_l2(g: &Graph, p: &PartitionMatrix, i: usize, augmented: bool) -> Result<usize> {
    p.check_graph(g)?;
    if i >= p.k() {
        bail!(InvalidArgument, "cluster {} out of range", i);
    }
    let inside = |u: usize| p.cluster_of(u) == i;
    let mut lost: BTreeSet<usize> = BTreeSet::new();
    let mut extra: BTreeSet<usize> = BTreeSet::new();
    for v in (0..g.n()).filter(|&v| inside(v)) {
        if g.neighbors(v).iter().all(|&u| inside(u)) {
            continue;
        }
        for &u in g.neighbors(v) {
            if !inside(u) {
                lost.insert(u);
                extra.insert(u);
            }
            lost.extend(g.neighbors(u).iter().copied().filter(|&w| !inside(w)));
        }
    }
    if augmented {
        Ok(lost.difference(&extra).count())
    } else {
        Ok(lost.len())
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::coarsen::{build_coarsened_graph, CoarseTask};
    use crate::graph::GraphBuilder;
    use crate::synth::{erdos_renyi, synth_sbm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn path6() -> Graph {
        let mut b = GraphBuilder::new(6);
        for i in 0..5 {
            b.edge(i, i + 1, 1.0);
        }
        b.features(Matrix::from_vec(6, 1, (0..6).map(|v| v as f64).collect()).unwrap());
        b.splits(vec![Split::Train; 6]);
        b.labels(Labels::classes(vec![0, 0, 1, 1, 0, 1]));
        b.build().unwrap()
    }

    fn pairs() -> PartitionMatrix {
        PartitionMatrix::from_assignment(vec![0, 0, 1, 1, 2, 2]).unwrap()
    }

    fn random_partition(n: usize, k: usize, rng: &mut ChaCha8Rng) -> PartitionMatrix {
        let assign: Vec<usize> = (0..n).map(|v| if v < k { v } else { rng.random_range(0..k) }).collect();
        PartitionMatrix::canonical(&assign).unwrap()
    }

    /// Brute-force `N₁(v)` by scanning every edge.
    fn brute_extra(g: &Graph, p: &PartitionMatrix, i: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for (u, v, _) in g.edges() {
            let (cu, cv) = (p.cluster_of(u), p.cluster_of(v));
            if cu == i && cv != i {
                out.insert(v);
            }
            if cv == i && cu != i {
                out.insert(u);
            }
        }
        out
    }

    #[test]
    fn identity_partition_gives_single_node_subgraphs() {
        let g = path6();
        let s = induce_subgraphs(&g, &PartitionMatrix::identity(6)).unwrap();
        assert_eq!(s.len(), 6);
        for (i, sub) in s.subgraphs().iter().enumerate() {
            assert_eq!(sub.global_ids(), &[i]);
            assert_eq!(sub.adjacency().nnz(), 0);
            assert_eq!(locate_subgraph(&s, i).unwrap(), i);
        }
    }

    #[test]
    fn path_pairs_induce_single_edges() {
        let s = induce_subgraphs(&path6(), &pairs()).unwrap();
        for sub in s.subgraphs() {
            assert_eq!(sub.len(), 2);
            assert_eq!(sub.adjacency().nnz(), 2);
        }
    }

    #[test]
    fn disjoint_cliques_have_no_cross_edges() {
        let g = synth_sbm(&[50, 50], 1.0, 0.0, 2, 0).unwrap();
        let p = PartitionMatrix::from_assignment((0..100).map(|v| v / 50).collect()).unwrap();
        let s = induce_subgraphs(&g, &p).unwrap();
        for sub in s.subgraphs() {
            assert_eq!(sub.adjacency().nnz(), 50 * 49);
        }
        let ex = augment_extra_nodes(&g, &s).unwrap();
        assert_eq!(ex, SubgraphSet { augmentation: Augmentation::Extra, ..s });
    }

    #[test]
    fn path_extra_nodes() {
        let g = path6();
        let s = induce_subgraphs(&g, &pairs()).unwrap();
        let ex = augment_extra_nodes(&g, &s).unwrap();
        let mid = &ex.subgraphs()[1];
        assert_eq!(mid.global_ids(), &[2, 3, 1, 4]);
        assert_eq!(mid.adjacency().nnz() / 2, 3);
        assert_eq!(
            mid.provenance(),
            &[Provenance::Core, Provenance::Core, Provenance::Extra, Provenance::Extra]
        );
        assert_eq!(mid.orig_degree(), &[2.0, 2.0, 2.0, 2.0]);
        assert_eq!(info_loss_l1(&g, &pairs(), 1).unwrap(), 2);
        assert_eq!(info_loss_l2(&g, &pairs(), 1, false).unwrap(), 4);
        assert_eq!(info_loss_l2(&g, &pairs(), 1, true).unwrap(), 2);
        assert_eq!(augment_extra_nodes(&g, &ex), Err(Error::AlreadyAugmented));
    }

    #[test]
    fn path_cluster_nodes() {
        let g = path6();
        let p = pairs();
        let gc = build_coarsened_graph(&g, &p, CoarseTask::None).unwrap();
        let s = induce_subgraphs(&g, &p).unwrap();
        let cs = augment_cluster_nodes(&g, &p, &s, &gc).unwrap();
        let mid = &cs.subgraphs()[1];
        assert_eq!(mid.global_ids(), &[2, 3, 0, 2]);
        assert_eq!(
            mid.provenance(),
            &[Provenance::Core, Provenance::Core, Provenance::Cluster, Provenance::Cluster]
        );
        let a = mid.adjacency();
        assert_eq!(a.get(0, 2), 1.0); // node 2 -> cluster {0,1}
        assert_eq!(a.get(1, 3), 1.0); // node 3 -> cluster {4,5}
        assert_eq!(a.get(0, 3), 0.0);
        assert_eq!(a.get(2, 3), 0.0); // {0,1} and {4,5} are not adjacent in G'
        assert_eq!(mid.orig_degree()[2..], [3.0, 3.0]);
        assert_eq!(mid.features().row(2), gc.features().row(0));
        assert_eq!(cluster_nodes(&g, &p, 1).unwrap(), vec![0, 2]);
        assert!(augment_cluster_nodes(&g, &p, &cs, &gc).is_err());
    }

    #[test]
    fn cross_cluster_edges_follow_the_coarse_graph() {
        // triangle of clusters {0,1}, {2,3}, {4,5} around centre cluster {6}
        let mut b = GraphBuilder::new(7);
        for (u, v) in [(0, 1), (2, 3), (4, 5), (1, 2), (3, 4), (5, 0), (6, 0), (6, 2), (6, 4), (6, 1)] {
            b.edge(u, v, 1.0);
        }
        b.features(Matrix::zeros(7, 1));
        let g = b.build().unwrap();
        let p = PartitionMatrix::from_assignment(vec![0, 0, 1, 1, 2, 2, 3]).unwrap();
        let gc = build_coarsened_graph(&g, &p, CoarseTask::None).unwrap();
        let s = induce_subgraphs(&g, &p).unwrap();
        let cs = augment_cluster_nodes(&g, &p, &s, &gc).unwrap();
        let centre = &cs.subgraphs()[3];
        assert_eq!(centre.global_ids(), &[6, 0, 1, 2]);
        let a = centre.adjacency();
        assert_eq!(a.get(0, 1), 2.0); // 6 has two edges into {0,1}
        assert_eq!(a.get(0, 2), 1.0);
        assert_eq!(a.get(1, 2), 1.0);
        assert_eq!(a.get(2, 3), 1.0);
        assert_eq!(a.get(1, 3), 1.0);
        assert_eq!(centre.orig_degree()[1], gc.degrees()[0]);
    }

    #[test]
    fn isolated_cluster_gets_nothing() {
        let g = synth_sbm(&[5, 5], 1.0, 0.0, 1, 0).unwrap();
        let p = PartitionMatrix::from_assignment((0..10).map(|v| v / 5).collect()).unwrap();
        let gc = build_coarsened_graph(&g, &p, CoarseTask::None).unwrap();
        let s = induce_subgraphs(&g, &p).unwrap();
        let cs = augment_cluster_nodes(&g, &p, &s, &gc).unwrap();
        assert!(cs.subgraphs().iter().all(|s| s.augmented_len() == 0));
        assert_eq!(info_loss_l1(&g, &p, 0).unwrap(), 0);
        assert_eq!(info_loss_l2(&g, &p, 0, false).unwrap(), 0);
    }

    #[test]
    fn clique_as_single_cluster_loses_nothing() {
        let g = synth_sbm(&[8], 1.0, 0.0, 1, 0).unwrap();
        let p = PartitionMatrix::from_assignment(vec![0; 8]).unwrap();
        assert_eq!(info_loss_l2(&g, &p, 0, false).unwrap(), 0);
    }

    #[test]
    fn masks_select_core_train_nodes() {
        let g = path6();
        let s = build_masks(&augment_extra_nodes(&g, &induce_subgraphs(&g, &pairs()).unwrap()).unwrap(), &g).unwrap();
        for sub in s.subgraphs() {
            for l in 0..sub.len() {
                assert_eq!(sub.mask()[l], sub.provenance()[l] == Provenance::Core);
            }
        }
        let plain = build_masks(&induce_subgraphs(&g, &pairs()).unwrap(), &g).unwrap();
        assert!(plain.subgraphs().iter().all(|s| s.mask().iter().all(|&m| m)));
    }

    #[test]
    fn random_graph_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..50u64 {
            let n = rng.random_range(5..60);
            let g = if trial % 2 == 0 {
                erdos_renyi(n, rng.random_range(0.02..0.4), 2, trial).unwrap()
            } else {
                synth_sbm(&[n / 2, n - n / 2], 0.4, 0.05, 2, trial).unwrap()
            };
            let k = rng.random_range(1..=n);
            let p = random_partition(n, k, &mut rng);
            let gc = build_coarsened_graph(&g, &p, CoarseTask::None).unwrap();
            let s = build_masks(&induce_subgraphs(&g, &p).unwrap(), &g).unwrap();
            let ex = augment_extra_nodes(&g, &s).unwrap();
            let cs = augment_cluster_nodes(&g, &p, &s, &gc).unwrap();

            let mut seen = vec![0usize; n];
            let (mut sum_e, mut sum_c) = (0, 0);
            for i in 0..k {
                let e = &ex.subgraphs()[i];
                let c = &cs.subgraphs()[i];
                for &v in e.core_ids() {
                    seen[v] += 1;
                    assert_eq!(locate_subgraph(&ex, v).unwrap(), i);
                }
                let brute = brute_extra(&g, &p, i);
                assert_eq!(e.augmented_len(), brute.len());
                assert_eq!(info_loss_l1(&g, &p, i).unwrap(), e.augmented_len());
                assert!(c.augmented_len() <= e.augmented_len());
                assert!(info_loss_l2(&g, &p, i, true).unwrap() <= info_loss_l2(&g, &p, i, false).unwrap());
                // Extra nodes restore the full degree of every core node.
                let local = e.adjacency().row_sums();
                for l in 0..e.core_len() {
                    assert!((local[l] - e.orig_degree()[l]).abs() < 1e-12);
                }
                for (l, &m) in e.mask().iter().enumerate() {
                    assert!(!m || e.provenance()[l] == Provenance::Core);
                }
                sum_e += e.augmented_len();
                sum_c += c.augmented_len();
            }
            assert!(seen.iter().all(|&c| c == 1));
            assert!(sum_e >= sum_c);
            let masked: usize = s.subgraphs().iter().map(|s| s.mask().iter().filter(|&&m| m).count()).sum();
            assert_eq!(masked, g.splits().iter().filter(|&&s| s == Split::Train).count());
            // linear scan agrees with the owner vector
            for v in 0..n {
                let scan = s.subgraphs().iter().position(|sub| sub.core_ids().contains(&v)).unwrap();
                assert_eq!(locate_subgraph(&s, v).unwrap(), scan);
            }
        }
    }

    #[test]
    fn unknown_node_is_an_error() {
        let s = induce_subgraphs(&path6(), &pairs()).unwrap();
        assert_eq!(locate_subgraph(&s, 6), Err(Error::UnknownNode(6)));
    }
}

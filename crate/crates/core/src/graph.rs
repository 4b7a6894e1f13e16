//! Immutable undirected graphs with features, labels, splits and cached degrees.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{bail, Error, Result};
use crate::matrix::Matrix;
use crate::sparse::Csr;

/// Which split a node (or a dataset graph) belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
    None,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::None => "none",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "none" => Ok(Split::None),
            other => bail!(InvalidArgument, "unknown split {:?}", other),
        }
    }
}

/// Per-node (or per-graph) supervision.
#[derive(Clone, Debug, PartialEq)]
pub enum Labels {
    None,
    Classes { ids: Vec<usize>, num_classes: usize },
    /// One row of real targets per item.
    Targets(Matrix),
}

impl Labels {
    /// Class labels with `num_classes = max id + 1`.
    pub fn classes(ids: Vec<usize>) -> Self {
        let num_classes = ids.iter().max().map_or(0, |m| m + 1);
        Labels::Classes { ids, num_classes }
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> Option<usize> {
        match self {
            Labels::None => None,
            Labels::Classes { ids, .. } => Some(ids.len()),
            Labels::Targets(t) => Some(t.rows()),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Labels::None)
    }

    /// Width of a model head predicting these labels.
    pub fn output_dim(&self) -> Option<usize> {
        match self {
            Labels::None => None,
            Labels::Classes { num_classes, .. } => Some(*num_classes),
            Labels::Targets(t) => Some(t.cols()),
        }
    }

    /// Labels of the given items; `None` entries become a placeholder (class 0 or a zero row).
    pub fn gather(&self, idx: &[Option<usize>]) -> Labels {
        match self {
            Labels::None => Labels::None,
            Labels::Classes { ids, num_classes } => Labels::Classes {
                ids: idx.iter().map(|i| i.map_or(0, |i| ids[i])).collect(),
                num_classes: *num_classes,
            },
            Labels::Targets(t) => {
                let mut out = Matrix::zeros(idx.len(), t.cols());
                for (r, i) in idx.iter().enumerate() {
                    if let Some(i) = i {
                        out.row_mut(r).copy_from_slice(t.row(*i));
                    }
                }
                Labels::Targets(out)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    Symmetry,
    SelfLoop,
    NegativeWeight,
    Degree,
    Shape,
    Labels,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    adjacency: Csr,
    features: Matrix,
    labels: Labels,
    degrees: Vec<f64>,
    splits: Vec<Split>,
}

impl Graph {
    /// Builds a graph, caching weighted degrees, and rejects anything `validate` flags.
    pub fn new(adjacency: Csr, features: Matrix, labels: Labels, splits: Vec<Split>) -> Result<Self> {
        let degrees = adjacency.row_sums();
        let g = Self {
            adjacency,
            features,
            labels,
            degrees,
            splits,
        };
        let violations = validate(&g);
        if let Some(v) = violations.first() {
            bail!(Validation, "{}", v.message);
        }
        Ok(g)
    }

    /// Assembles a graph without any checks. `validate` reports what is wrong with it.
    pub fn from_parts_unchecked(
        adjacency: Csr,
        features: Matrix,
        labels: Labels,
        degrees: Vec<f64>,
        splits: Vec<Split>,
    ) -> Self {
        Self {
            adjacency,
            features,
            labels,
            degrees,
            splits,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.adjacency.n()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.adjacency.triplets().filter(|&(i, j, _)| i < j).count()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn adjacency(&self) -> &Csr {
        &self.adjacency
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        self.adjacency.row(v).0
    }

    pub fn edges_of(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adjacency.iter_row(v)
    }

    /// Undirected edges `(u, v, w)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.triplets().filter(|&(i, j, _)| i < j)
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn mask(&self, split: Split) -> Vec<bool> {
        self.splits.iter().map(|&s| s == split).collect()
    }

    pub fn with_labels(self, labels: Labels) -> Result<Self> {
        Graph::new(self.adjacency, self.features, labels, self.splits)
    }

    pub fn with_splits(self, splits: Vec<Split>) -> Result<Self> {
        Graph::new(self.adjacency, self.features, self.labels, splits)
    }

    pub fn with_features(self, features: Matrix) -> Result<Self> {
        Graph::new(self.adjacency, features, self.labels, self.splits)
    }

    /// Connected component id per node (ids in order of first node).
    pub fn components(&self) -> (usize, Vec<usize>) {
        let n = self.n();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &v in self.neighbors(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = count;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        (count, comp)
    }
}

/// Lists every violated graph invariant; one entry per kind of violation.
pub fn validate(g: &Graph) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = g.adjacency.n();
    let mut push = |kind, message: String| out.push(Violation { kind, message });

    let mut asym = 0usize;
    let mut first_asym = None;
    let mut loops = 0usize;
    let mut negative = 0usize;
    for (i, j, w) in g.adjacency.triplets() {
        if i == j {
            loops += 1;
        }
        if !(w >= 0.0) {
            negative += 1;
        }
        let back = g.adjacency.get(j, i);
        let has_back = g.adjacency.row(j).0.binary_search(&i).is_ok();
        if !has_back || back != w {
            asym += 1;
            first_asym.get_or_insert((i, j));
        }
    }
    if let Some((i, j)) = first_asym {
        push(
            ViolationKind::Symmetry,
            format!("adjacency is not symmetric: {} entries, first ({}, {})", asym, i, j),
        );
    }
    if loops > 0 {
        push(ViolationKind::SelfLoop, format!("{} self-loops stored", loops));
    }
    if negative > 0 {
        push(
            ViolationKind::NegativeWeight,
            format!("{} negative or NaN edge weights", negative),
        );
    }

    if g.degrees.len() != n {
        push(
            ViolationKind::Degree,
            format!("degree cache has {} entries for {} nodes", g.degrees.len(), n),
        );
    } else {
        let sums = g.adjacency.row_sums();
        let bad: Vec<usize> = (0..n)
            .filter(|&i| {
                let tol = 1e-9 * sums[i].abs().max(1.0);
                !((g.degrees[i] - sums[i]).abs() <= tol)
            })
            .collect();
        if let Some(&i) = bad.first() {
            push(
                ViolationKind::Degree,
                format!(
                    "degree cache disagrees with row sums at {} nodes, first {} ({} vs {})",
                    bad.len(),
                    i,
                    g.degrees[i],
                    sums[i]
                ),
            );
        }
    }

    if g.features.rows() != n {
        push(
            ViolationKind::Shape,
            format!("{} feature rows for {} nodes", g.features.rows(), n),
        );
    } else if g.splits.len() != n {
        push(
            ViolationKind::Shape,
            format!("{} split entries for {} nodes", g.splits.len(), n),
        );
    }

    match &g.labels {
        Labels::None => {}
        Labels::Classes { ids, num_classes } => {
            if ids.len() != n {
                push(
                    ViolationKind::Labels,
                    format!("{} labels for {} nodes", ids.len(), n),
                );
            } else if let Some(&bad) = ids.iter().find(|&&c| c >= *num_classes) {
                push(
                    ViolationKind::Labels,
                    format!("class {} outside 0..{}", bad, num_classes),
                );
            }
        }
        Labels::Targets(t) => {
            if t.rows() != n {
                push(
                    ViolationKind::Labels,
                    format!("{} target rows for {} nodes", t.rows(), n),
                );
            }
        }
    }
    out
}

/// Collects edges and node data, then builds a valid [`Graph`].
///
/// Repeated `(u, v)` lines add their weights. The two orientations of a pair are
/// then symmetrised by taking the larger of the two, so `(0, 1)` plus `(1, 0)`
/// is one undirected edge and a directed input becomes its undirected closure.
/// Self-loops are dropped.
#[derive(Clone, Debug)]
pub struct GraphBuilder {
    n: usize,
    arcs: BTreeMap<(usize, usize), f64>,
    out_of_range: Option<(usize, usize)>,
    features: Option<Matrix>,
    labels: Labels,
    splits: Option<Vec<Split>>,
}

impl GraphBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            arcs: BTreeMap::new(),
            out_of_range: None,
            features: None,
            labels: Labels::None,
            splits: None,
        }
    }

    pub fn edge(&mut self, u: usize, v: usize, w: f64) -> &mut Self {
        if u >= self.n || v >= self.n {
            self.out_of_range.get_or_insert((u, v));
        } else if u != v {
            *self.arcs.entry((u, v)).or_insert(0.0) += w;
        }
        self
    }

    pub fn features(&mut self, x: Matrix) -> &mut Self {
        self.features = Some(x);
        self
    }

    pub fn labels(&mut self, labels: Labels) -> &mut Self {
        self.labels = labels;
        self
    }

    pub fn splits(&mut self, splits: Vec<Split>) -> &mut Self {
        self.splits = Some(splits);
        self
    }

    pub fn build(&self) -> Result<Graph> {
        if let Some((u, v)) = self.out_of_range {
            bail!(
                Validation,
                "edge ({}, {}) references a node outside 0..{}",
                u,
                v,
                self.n
            );
        }
        let mut undirected: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (&(u, v), &w) in &self.arcs {
            if !(w >= 0.0) || !w.is_finite() {
                bail!(Validation, "edge ({}, {}) has invalid weight {}", u, v, w);
            }
            let key = (u.min(v), u.max(v));
            let slot = undirected.entry(key).or_insert(0.0);
            *slot = slot.max(w);
        }
        let mut triplets = Vec::with_capacity(undirected.len() * 2);
        for (&(u, v), &w) in &undirected {
            triplets.push((u, v, w));
            triplets.push((v, u, w));
        }
        let adjacency = Csr::from_triplets(self.n, &triplets)?;
        let features = self
            .features
            .clone()
            .unwrap_or_else(|| Matrix::zeros(self.n, 0));
        let splits = self
            .splits
            .clone()
            .unwrap_or_else(|| vec![Split::None; self.n]);
        Graph::new(adjacency, features, self.labels.clone(), splits)
    }
}

/// An ordered collection of graphs with one target per graph.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphDataset {
    graphs: Vec<Graph>,
    targets: Labels,
    splits: Vec<Split>,
}

impl GraphDataset {
    pub fn new(graphs: Vec<Graph>, targets: Labels, splits: Vec<Split>) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if targets.len() != Some(graphs.len()) {
            bail!(
                Validation,
                "{:?} targets for {} graphs",
                targets.len(),
                graphs.len()
            );
        }
        if splits.len() != graphs.len() {
            bail!(
                Validation,
                "{} split entries for {} graphs",
                splits.len(),
                graphs.len()
            );
        }
        let d = graphs[0].feature_dim();
        if let Some(i) = graphs.iter().position(|g| g.feature_dim() != d) {
            bail!(Validation, "graph {} has a different feature dimension", i);
        }
        Ok(Self {
            graphs,
            targets,
            splits,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn targets(&self) -> &Labels {
        &self.targets
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    pub fn feature_dim(&self) -> usize {
        self.graphs[0].feature_dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        let mut b = GraphBuilder::new(3);
        b.edge(0, 1, 1.0).edge(1, 2, 1.0);
        b.features(Matrix::zeros(3, 2));
        b.build().unwrap()
    }

    #[test]
    fn path_graph_degrees() {
        let g = path3();
        assert_eq!(g.n(), 3);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.degrees(), &[1.0, 2.0, 1.0]);
        assert!(validate(&g).is_empty());
    }

    #[test]
    fn out_of_range_edge_is_a_validation_error() {
        let mut b = GraphBuilder::new(3);
        b.edge(0, 5, 1.0).features(Matrix::zeros(3, 1));
        assert!(matches!(b.build(), Err(Error::Validation(_))));
    }

    #[test]
    fn reverse_pair_is_one_edge() {
        let mut b = GraphBuilder::new(2);
        b.edge(0, 1, 1.0).edge(1, 0, 1.0);
        let g = b.build().unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.degrees()[0], 1.0);
    }

    /// Dense oracle: sum lines per orientation, then `max(D, Dᵀ)` off the diagonal.
    fn symmetrise_oracle(n: usize, lines: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; n]; n];
        for &(u, v, w) in lines {
            if u != v {
                d[u][v] += w;
            }
        }
        let mut a = vec![vec![0.0; n]; n];
        for u in 0..n {
            for v in 0..n {
                a[u][v] = d[u][v].max(d[v][u]);
            }
        }
        a
    }

    #[test]
    fn symmetrisation_matches_dense_oracle() {
        let inputs: [&[(usize, usize, f64)]; 4] = [
            &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 2.0), (2, 3, 1.0), (3, 2, 0.5)],
            &[(0, 1, 1.0), (0, 1, 1.0), (2, 1, 3.0), (3, 3, 1.0), (3, 0, 1.0)],
            &[(4, 0, 1.0), (0, 4, 2.5), (1, 3, 1.0), (3, 1, 1.0), (1, 3, 1.0)],
            &[(0, 1, 0.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 0, 1.0)],
        ];
        for lines in inputs {
            let mut b = GraphBuilder::new(5);
            for &(u, v, w) in lines {
                b.edge(u, v, w);
            }
            let g = b.build().unwrap();
            let oracle = symmetrise_oracle(5, lines);
            let dense = g.adjacency().to_dense();
            for u in 0..5 {
                for v in 0..5 {
                    assert_eq!(dense[(u, v)], oracle[u][v], "entry ({u},{v}) of {lines:?}");
                }
                assert_eq!(g.degrees()[u], oracle[u].iter().sum::<f64>());
            }
        }
    }

    #[test]
    fn asymmetry_is_one_violation() {
        let adj = Csr::from_triplets(3, &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0)]).unwrap();
        let degrees = adj.row_sums();
        let g = Graph::from_parts_unchecked(adj, Matrix::zeros(3, 1), Labels::None, degrees, vec![Split::None; 3]);
        let v = validate(&g);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Symmetry);
    }

    #[test]
    fn corrupted_degree_cache_is_one_violation() {
        let g = path3();
        let mut degrees = g.degrees().to_vec();
        degrees[1] = 7.0;
        degrees[2] = 0.0;
        let bad = Graph::from_parts_unchecked(
            g.adjacency().clone(),
            g.features().clone(),
            Labels::None,
            degrees,
            g.splits().to_vec(),
        );
        let v = validate(&bad);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Degree);
        // the oracle: recomputed row sums disagree exactly where the cache was edited
        let sums = g.adjacency().row_sums();
        assert_eq!(sums, vec![1.0, 2.0, 1.0]);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert_eq!(
            GraphDataset::new(Vec::new(), Labels::classes(Vec::new()), Vec::new()),
            Err(Error::EmptyDataset)
        );
    }

    #[test]
    fn split_parses_and_prints() {
        for s in [Split::Train, Split::Val, Split::Test, Split::None] {
            assert_eq!(s.as_str().parse::<Split>().unwrap(), s);
        }
        assert!("holdout".parse::<Split>().is_err());
    }
}

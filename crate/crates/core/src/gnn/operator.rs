use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::coarsen::CoarsenedGraph;
use crate::error::{bail, Error, Result};
use crate::graph::Graph;
use crate::matrix::{Matrix, OpTally};
use crate::sparse::Csr;
use crate::subgraph::Subgraph;

/// Where the degrees normalising a subgraph's operator come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum DegreeMode {
    /// Degrees of the full graph (coarse degrees for cluster nodes).
    #[default]
    Original,
    /// Row sums of the subgraph's own adjacency.
    Local,
}

impl DegreeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DegreeMode::Original => "original",
            DegreeMode::Local => "local",
        }
    }
}

impl fmt::Display for DegreeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DegreeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(DegreeMode::Original),
            "local" => Ok(DegreeMode::Local),
            other => bail!(InvalidArgument, "unknown degree mode {:?}", other),
        }
    }
}

/// `Â = D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃ = D + I`.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagationOperator {
    matrix: Csr,
}

/// Normalises `adjacency + I` by the supplied degrees (not by its own row sums).
///
/// Stored diagonal entries of `adjacency` are added to the identity.
pub fn make_operator(adjacency: &Csr, degrees: &[f64]) -> Result<PropagationOperator> {
    let n = adjacency.n();
    if degrees.len() != n {
        bail!(
            InvalidArgument,
            "{} degrees for a {}-node adjacency",
            degrees.len(),
            n
        );
    }
    if let Some(i) = degrees.iter().position(|&d| !(d >= 0.0) || !d.is_finite()) {
        bail!(InvalidArgument, "degree {} of node {} is negative or not finite", degrees[i], i);
    }
    let inv_sqrt: Vec<f64> = degrees.iter().map(|&d| 1.0 / libm::sqrt(d + 1.0)).collect();
    let mut triplets: Vec<(usize, usize, f64)> = adjacency
        .triplets()
        .map(|(i, j, w)| (i, j, w * inv_sqrt[i] * inv_sqrt[j]))
        .collect();
    triplets.extend((0..n).map(|i| (i, i, inv_sqrt[i] * inv_sqrt[i])));
    Ok(PropagationOperator {
        matrix: Csr::from_triplets(n, &triplets)?,
    })
}

impl PropagationOperator {
    pub fn for_graph(g: &Graph) -> Result<Self> {
        make_operator(g.adjacency(), g.degrees())
    }

    pub fn for_subgraph(sub: &Subgraph, mode: DegreeMode) -> Result<Self> {
        match mode {
            DegreeMode::Original => make_operator(sub.adjacency(), sub.orig_degree()),
            DegreeMode::Local => make_operator(sub.adjacency(), &sub.adjacency().row_sums()),
        }
    }

    pub fn for_coarse(gc: &CoarsenedGraph) -> Result<Self> {
        make_operator(gc.adjacency(), gc.degrees())
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn matrix(&self) -> &Csr {
        &self.matrix
    }

    pub fn bytes(&self) -> u64 {
        self.matrix.bytes()
    }

    pub fn apply(&self, x: &Matrix, tally: &mut OpTally) -> Result<Matrix> {
        self.matrix.spmm(x, tally)
    }
}

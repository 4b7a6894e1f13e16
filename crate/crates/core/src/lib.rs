//! Graph coarsening and subgraph-level GCN training and inference.
//!
//! A graph is partitioned into `k = round(n * r)` connected clusters. From the
//! partition we build either the coarsened graph `G'` (`A' = PᵀAP`) or the set
//! of per-cluster subgraphs, optionally augmented with 1-hop *extra* nodes or
//! one representative *cluster* node per neighbouring cluster. A small GCN is
//! trained on either view, and inference for a node only needs the subgraph
//! that owns it.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, timing and the
//! command line live in the `cgnn` companion crate.

#![no_std]
#![deny(rust_2018_idioms)]
// `!(x >= 0.0)` is how NaN gets rejected alongside negatives
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod coarsen;
pub mod error;
pub mod feasibility;
pub mod gnn;
pub mod graph;
pub mod matrix;
pub mod pipelines;
pub mod sparse;
pub mod subgraph;
pub mod synth;

pub use coarsen::{
    build_coarsened_graph, coarse_degree, coarsen_partition, CoarseLabels, CoarseTask,
    CoarsenMethod, CoarsenedGraph, PartitionMatrix,
};
pub use error::{Error, Result};
pub use gnn::{DegreeMode, GcnParams, Grads, PropagationOperator};
pub use graph::{validate, Graph, GraphBuilder, GraphDataset, Labels, Split, Violation};
pub use matrix::{Matrix, OpTally};
pub use sparse::Csr;
pub use subgraph::{Augmentation, Provenance, Subgraph, SubgraphSet};

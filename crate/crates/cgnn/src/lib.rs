//! File formats, experiment runner, inference benchmarks and the `cgnn`
//! command line on top of [`cgnn_core`].

pub mod bench;
pub mod experiment;
pub mod io;

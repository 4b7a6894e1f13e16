//! Inference latency, multiply-add counts and analytic peak memory per mode.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Result};
use cgnn_core::gnn::{
    inference_peak_bytes, node_model_forward_tallied, pooled_forward, pooled_forward_tallied, GraphInput, GraphSample,
};
use cgnn_core::pipelines::{GraphTaskInputs, GraphViews};
use cgnn_core::{DegreeMode, GcnParams, Graph, OpTally, PropagationOperator};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const MIN_REPETITIONS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMode {
    /// One forward pass over the whole graph.
    Full,
    /// Forward passes over every subgraph.
    Subgraphs,
    /// One forward pass over the subgraph owning a sampled node.
    SingleNode,
    /// One forward pass over the coarsened graph.
    Coarse,
}

impl BenchMode {
    pub const ALL: [BenchMode; 4] = [BenchMode::Full, BenchMode::Subgraphs, BenchMode::SingleNode, BenchMode::Coarse];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchMode::Full => "full",
            BenchMode::Subgraphs => "subgraphs",
            BenchMode::SingleNode => "single_node",
            BenchMode::Coarse => "coarse",
        }
    }
}

impl fmt::Display for BenchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchMode {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "full" => BenchMode::Full,
            "subgraphs" => BenchMode::Subgraphs,
            "single_node" => BenchMode::SingleNode,
            "coarse" => BenchMode::Coarse,
            _ => bail!("unknown bench mode {:?}", s),
        })
    }
}

/// One measured scenario. Latency and operation counts are per inference
/// call: per sampled node in `single_node` mode, per sampled graph for
/// graph tasks, and per whole pass otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scenario: String,
    pub mode: BenchMode,
    pub r: f64,
    pub augment: String,
    pub latency_mean_s: f64,
    pub latency_median_s: f64,
    pub opcount: u64,
    pub peak_bytes: u64,
    /// Resident-set growth over the measurement, where the platform reports it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rss_delta_bytes: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub repetitions: usize,
    pub samples: usize,
    pub rows: Vec<BenchRow>,
    /// `mode → full.latency / mode.latency` and the same for op counts.
    pub ratios: Vec<(String, f64, f64)>,
}

impl BenchReport {
    fn with_ratios(repetitions: usize, samples: usize, rows: Vec<BenchRow>) -> Self {
        let base = rows.iter().find(|r| r.mode == BenchMode::Full).cloned();
        let ratios = match base {
            Some(b) => rows
                .iter()
                .filter(|r| r.mode != BenchMode::Full)
                .map(|r| {
                    (
                        r.mode.to_string(),
                        b.latency_mean_s / r.latency_mean_s,
                        b.opcount as f64 / r.opcount.max(1) as f64,
                    )
                })
                .collect(),
            None => Vec::new(),
        };
        Self {
            repetitions,
            samples,
            rows,
            ratios,
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "scenario", "mode", "r", "augment", "latency_mean_s", "latency_median_s", "opcount", "peak_bytes",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.scenario.clone(),
                r.mode.to_string(),
                r.r.to_string(),
                r.augment.clone(),
                r.latency_mean_s.to_string(),
                r.latency_median_s.to_string(),
                r.opcount.to_string(),
                r.peak_bytes.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Indices to measure: `count` distinct ones, or with replacement when fewer exist.
pub fn sample_indices(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if n == 0 {
        return Vec::new();
    }
    if n < count {
        (0..count).map(|_| rng.random_range(0..n)).collect()
    } else {
        sample(&mut rng, n, count).into_vec()
    }
}

fn resident_bytes() -> Option<u64> {
    let statm = std::fs::read_to_string("/proc/self/statm").ok()?;
    let pages: u64 = statm.split_whitespace().nth(1)?.parse().ok()?;
    Some(pages * 4096)
}

fn summarize(mut times: Vec<f64>) -> (f64, f64) {
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    times.sort_by(f64::total_cmp);
    let m = times.len() / 2;
    let median = if times.len().is_multiple_of(2) { (times[m - 1] + times[m]) / 2.0 } else { times[m] };
    (mean, median)
}

/// Shared settings of one benchmark.
#[derive(Clone, Debug)]
pub struct BenchSpec {
    pub scenario: String,
    pub r: f64,
    pub augment: String,
    pub repetitions: usize,
    pub samples: usize,
    pub seed: u64,
    pub degree_mode: DegreeMode,
}

impl BenchSpec {
    fn check(&self) -> Result<()> {
        if self.repetitions < MIN_REPETITIONS {
            bail!("at least {} repetitions are required, got {}", MIN_REPETITIONS, self.repetitions);
        }
        if self.samples == 0 {
            bail!("sample count must be positive");
        }
        Ok(())
    }

    fn row(&self, mode: BenchMode, times: Vec<f64>, opcount: u64, peak_bytes: u64, rss: Option<u64>) -> BenchRow {
        let (latency_mean_s, latency_median_s) = summarize(times);
        BenchRow {
            scenario: self.scenario.clone(),
            mode,
            r: self.r,
            augment: self.augment.clone(),
            latency_mean_s,
            latency_median_s,
            opcount,
            peak_bytes,
            rss_delta_bytes: rss,
        }
    }
}

/// Measures node-level inference in each requested mode with the same parameters.
pub fn bench_inference(
    g: &Graph,
    views: &GraphViews,
    params: &GcnParams,
    modes: &[BenchMode],
    spec: &BenchSpec,
) -> Result<BenchReport> {
    spec.check()?;
    let mode = spec.degree_mode;
    let nodes = sample_indices(g.n(), spec.samples, spec.seed);
    let mut rows = Vec::new();
    for &m in modes {
        let rss0 = resident_bytes();
        let mut times = Vec::with_capacity(spec.repetitions);
        let mut ops = 0;
        let peak;
        match m {
            BenchMode::Full | BenchMode::Coarse => {
                let (op, x) = if m == BenchMode::Full {
                    (PropagationOperator::for_graph(g)?, g.features())
                } else {
                    (PropagationOperator::for_coarse(&views.coarse)?, views.coarse.features())
                };
                for _ in 0..spec.repetitions {
                    let mut t = OpTally::default();
                    let start = Instant::now();
                    std::hint::black_box(node_model_forward_tallied(&op, x, params, &mut t)?);
                    times.push(start.elapsed().as_secs_f64());
                    ops = t.madds;
                }
                peak = inference_peak_bytes(&op, params);
            }
            BenchMode::Subgraphs => {
                let mut p = 0;
                for _ in 0..spec.repetitions {
                    let mut t = OpTally::default();
                    let start = Instant::now();
                    for s in views.subgraphs.subgraphs() {
                        let op = PropagationOperator::for_subgraph(s, mode)?;
                        std::hint::black_box(node_model_forward_tallied(&op, s.features(), params, &mut t)?);
                    }
                    times.push(start.elapsed().as_secs_f64());
                    ops = t.madds;
                }
                for s in views.subgraphs.subgraphs() {
                    p = p.max(inference_peak_bytes(&PropagationOperator::for_subgraph(s, mode)?, params));
                }
                peak = p;
            }
            BenchMode::SingleNode => {
                let mut p = 0;
                let mut total_ops = 0;
                for _ in 0..spec.repetitions {
                    let mut t = OpTally::default();
                    let start = Instant::now();
                    for &v in &nodes {
                        std::hint::black_box(cgnn_core::pipelines::infer_single_node(
                            &views.subgraphs,
                            params,
                            mode,
                            v,
                            &mut t,
                        )?);
                    }
                    times.push(start.elapsed().as_secs_f64() / nodes.len() as f64);
                    total_ops = t.madds;
                }
                for &v in &nodes {
                    let s = &views.subgraphs.subgraphs()[views.subgraphs.owner()[v]];
                    p = p.max(inference_peak_bytes(&PropagationOperator::for_subgraph(s, mode)?, params));
                }
                ops = total_ops / nodes.len() as u64;
                peak = p;
            }
        }
        let rss = match (rss0, resident_bytes()) {
            (Some(a), Some(b)) => Some(b.saturating_sub(a)),
            _ => None,
        };
        rows.push(spec.row(m, times, ops, peak, rss));
    }
    Ok(BenchReport::with_ratios(spec.repetitions, nodes.len(), rows))
}

/// Per-graph latency over sampled dataset graphs. `Full` pools the original
/// graph, `Subgraphs` the subgraph pieces, `Coarse` the coarsened graph.
pub fn bench_graph_inference(
    graphs: &[Graph],
    inputs: &GraphTaskInputs,
    params: &GcnParams,
    modes: &[BenchMode],
    spec: &BenchSpec,
) -> Result<BenchReport> {
    spec.check()?;
    let picks = sample_indices(graphs.len(), spec.samples, spec.seed);
    let full: Vec<GraphSample> = graphs
        .iter()
        .map(|g| {
            Ok(GraphSample {
                pieces: vec![GraphInput::new(PropagationOperator::for_graph(g)?, g.features().clone())?],
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for &m in modes {
        let samples = match m {
            BenchMode::Full => &full,
            BenchMode::Subgraphs => &inputs.subgraphs,
            BenchMode::Coarse => &inputs.coarse,
            BenchMode::SingleNode => bail!("single-node inference does not apply to graph-level tasks"),
        };
        let rss0 = resident_bytes();
        let mut times = Vec::with_capacity(spec.repetitions);
        for _ in 0..spec.repetitions {
            let start = Instant::now();
            for &i in &picks {
                std::hint::black_box(pooled_forward(&samples[i].pieces, params)?);
            }
            times.push(start.elapsed().as_secs_f64() / picks.len() as f64);
        }
        // counted separately so the timed loop carries no bookkeeping
        let mut ops = 0u64;
        let mut peak = 0u64;
        for &i in &picks {
            let mut t = OpTally::default();
            pooled_forward_tallied(&samples[i].pieces, params, &mut t)?;
            ops += t.madds;
            for p in &samples[i].pieces {
                peak = peak.max(inference_peak_bytes(&p.op, params));
            }
        }
        let rss = match (rss0, resident_bytes()) {
            (Some(a), Some(b)) => Some(b.saturating_sub(a)),
            _ => None,
        };
        rows.push(spec.row(m, times, ops / picks.len().max(1) as u64, peak, rss));
    }
    Ok(BenchReport::with_ratios(spec.repetitions, picks.len(), rows))
}

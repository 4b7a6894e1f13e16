//! Seeded synthetic graphs: stochastic block models, Erdős–Rényi graphs and a
//! small triangle-counting graph classification dataset.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{bail, Result};
use crate::graph::{Graph, GraphBuilder, GraphDataset, Labels, Split};
use crate::matrix::Matrix;

/// Full parameter set of the block-model generator.
#[derive(Clone, Debug, PartialEq)]
pub struct SbmConfig {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Expected distance between two block feature means, in noise standard deviations.
    pub feature_signal: f64,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl SbmConfig {
    pub fn new(block_sizes: Vec<usize>, p_in: f64, p_out: f64, feature_dim: usize, seed: u64) -> Self {
        Self {
            block_sizes,
            p_in,
            p_out,
            feature_dim,
            feature_signal: 2.0,
            train_fraction: 0.6,
            val_fraction: 0.2,
            seed,
        }
    }
}

/// Stochastic block model with the block id as class label and Gaussian
/// features around a per-block mean. Splits are a seeded 60/20/20 shuffle.
pub fn synth_sbm(block_sizes: &[usize], p_in: f64, p_out: f64, d: usize, seed: u64) -> Result<Graph> {
    synth_sbm_with(&SbmConfig::new(block_sizes.to_vec(), p_in, p_out, d, seed))
}

pub fn synth_sbm_with(cfg: &SbmConfig) -> Result<Graph> {
    for p in [cfg.p_in, cfg.p_out] {
        if !(0.0..=1.0).contains(&p) {
            bail!(InvalidArgument, "probability {} outside [0, 1]", p);
        }
    }
    if cfg.block_sizes.is_empty() || cfg.block_sizes.contains(&0) {
        bail!(InvalidArgument, "block sizes must be positive");
    }
    let frac_ok = cfg.train_fraction >= 0.0
        && cfg.val_fraction >= 0.0
        && cfg.train_fraction + cfg.val_fraction <= 1.0;
    if !frac_ok {
        bail!(InvalidArgument, "split fractions must be nonnegative and sum to at most 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n: usize = cfg.block_sizes.iter().sum();
    let mut starts = Vec::with_capacity(cfg.block_sizes.len());
    let mut block = Vec::with_capacity(n);
    for (b, &size) in cfg.block_sizes.iter().enumerate() {
        starts.push(block.len());
        block.extend(core::iter::repeat_n(b, size));
    }

    let mut builder = GraphBuilder::new(n);
    for (a, &sa) in cfg.block_sizes.iter().enumerate() {
        for (b, &sb) in cfg.block_sizes.iter().enumerate().skip(a) {
            let (oa, ob) = (starts[a], starts[b]);
            if a == b {
                let pairs = sa * (sa - 1) / 2;
                sample_pairs(&mut rng, pairs, cfg.p_in, |idx| {
                    let (i, j) = triangle_pair(idx);
                    builder.edge(oa + i, oa + j, 1.0);
                });
            } else {
                sample_pairs(&mut rng, sa * sb, cfg.p_out, |idx| {
                    builder.edge(oa + idx / sb, ob + idx % sb, 1.0);
                });
            }
        }
    }

    let d = cfg.feature_dim;
    let scale = if d == 0 {
        0.0
    } else {
        cfg.feature_signal / libm::sqrt(2.0 * d as f64)
    };
    let means: Vec<Vec<f64>> = (0..cfg.block_sizes.len())
        .map(|_| (0..d).map(|_| scale * normal(&mut rng)).collect())
        .collect();
    let mut x = Matrix::zeros(n, d);
    for v in 0..n {
        for c in 0..d {
            x[(v, c)] = means[block[v]][c] + normal(&mut rng);
        }
    }

    builder.features(x);
    builder.labels(Labels::Classes {
        ids: block,
        num_classes: cfg.block_sizes.len(),
    });
    builder.splits(random_splits(n, cfg.train_fraction, cfg.val_fraction, &mut rng));
    builder.build()
}

/// Erdős–Rényi `G(n, p)` with standard-normal features and a single class.
pub fn erdos_renyi(n: usize, p: f64, d: usize, seed: u64) -> Result<Graph> {
    let mut cfg = SbmConfig::new(vec![n], p, 0.0, d, seed);
    cfg.feature_signal = 0.0;
    synth_sbm_with(&cfg)
}

/// Seeded train/val/test assignment of `n` items.
pub fn random_splits<R: Rng>(n: usize, train: f64, val: f64, rng: &mut R) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let n_train = libm::round(train * n as f64) as usize;
    let n_val = (libm::round(val * n as f64) as usize).min(n - n_train.min(n));
    let mut splits = vec![Split::Test; n];
    for (rank, &v) in order.iter().enumerate() {
        splits[v] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    splits
}

/// `num_graphs` random graphs on `nodes` nodes, labelled 1 when their triangle
/// count exceeds the median count of the collection.
///
/// Node features are `[1, degree / nodes]`. Edge probabilities are drawn per
/// graph from `[0.15, 0.6]` so the classes are not trivially separable.
pub fn triangle_dataset(num_graphs: usize, nodes: usize, seed: u64) -> Result<GraphDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graphs = Vec::with_capacity(num_graphs);
    let mut counts = Vec::with_capacity(num_graphs);
    for _ in 0..num_graphs {
        let p = rng.random_range(0.15..0.6);
        let mut b = GraphBuilder::new(nodes);
        for u in 0..nodes {
            for v in u + 1..nodes {
                if rng.random::<f64>() < p {
                    b.edge(u, v, 1.0);
                }
            }
        }
        let g = b.build()?;
        counts.push(count_triangles(&g));
        let mut x = Matrix::zeros(nodes, 2);
        for v in 0..nodes {
            x[(v, 0)] = 1.0;
            x[(v, 1)] = g.degrees()[v] / nodes as f64;
        }
        graphs.push(g.with_features(x)?);
    }
    let mut sorted = counts.clone();
    sorted.sort_unstable();
    let threshold = sorted.get(sorted.len() / 2).copied().unwrap_or(0);
    let ids = counts.iter().map(|&c| usize::from(c > threshold)).collect();
    let splits = random_splits(num_graphs, 0.6, 0.2, &mut rng);
    GraphDataset::new(graphs, Labels::Classes { ids, num_classes: 2 }, splits)
}

pub fn count_triangles(g: &Graph) -> usize {
    let mut count = 0;
    for u in 0..g.n() {
        for &v in g.neighbors(u).iter().filter(|&&v| v > u) {
            for &w in g.neighbors(v).iter().filter(|&&w| w > v) {
                if g.neighbors(u).binary_search(&w).is_ok() {
                    count += 1;
                }
            }
        }
    }
    count
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Calls `emit` for each index in `0..total` kept with probability `p`, using
/// geometric skips so sparse blocks cost O(kept) rather than O(total).
fn sample_pairs<R: Rng>(rng: &mut R, total: usize, p: f64, mut emit: impl FnMut(usize)) {
    if p <= 0.0 || total == 0 {
        return;
    }
    if p >= 1.0 {
        (0..total).for_each(emit);
        return;
    }
    let log_q = libm::log1p(-p);
    let mut idx: usize = 0;
    loop {
        let u: f64 = rng.random();
        let skip = libm::floor(libm::log1p(-u) / log_q);
        if skip >= (total - idx) as f64 {
            return;
        }
        idx += skip as usize;
        emit(idx);
        idx += 1;
        if idx >= total {
            return;
        }
    }
}

/// Maps a linear index to the pair `(i, j)`, `i < j`, in row-major order of the
/// strict upper triangle restricted to columns: `(0,1), (0,2), (1,2), (0,3), …`.
fn triangle_pair(idx: usize) -> (usize, usize) {
    // column j holds j pairs starting at j(j-1)/2
    let mut j = libm::floor((1.0 + libm::sqrt(1.0 + 8.0 * idx as f64)) / 2.0) as usize;
    while j * (j - 1) / 2 > idx {
        j -= 1;
    }
    while (j + 1) * j / 2 <= idx {
        j += 1;
    }
    (idx - j * (j - 1) / 2, j)
}

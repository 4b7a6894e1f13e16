use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::gnn::loss::{scaled_loss, term_count, LossKind, Target};
use crate::gnn::operator::{DegreeMode, PropagationOperator};
use crate::gnn::params::{GcnParams, Grads};
use crate::matrix::{Matrix, OpTally};
use crate::subgraph::SubgraphSet;

/// A propagation operator together with the node features it acts on.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphInput {
    pub op: PropagationOperator,
    pub features: Matrix,
}

impl GraphInput {
    pub fn new(op: PropagationOperator, features: Matrix) -> Result<Self> {
        if op.n() != features.rows() {
            bail!(Shape, "{}-node operator with {} feature rows", op.n(), features.rows());
        }
        Ok(Self { op, features })
    }

    pub fn n(&self) -> usize {
        self.op.n()
    }
}

/// Cached intermediates of one forward pass through the GCN layers.
struct Trace {
    /// `Â X⁽ˡ⁾` per layer.
    propagated: Vec<Matrix>,
    /// Pre-activations `Â X⁽ˡ⁾ W⁽ˡ⁾` per layer.
    pre: Vec<Matrix>,
    /// `X⁽ᴸ⁾`
    last: Matrix,
}

fn check_input(x: &Matrix, op: &PropagationOperator, params: &GcnParams) -> Result<()> {
    if x.rows() != op.n() {
        bail!(Shape, "{} feature rows for a {}-node operator", x.rows(), op.n());
    }
    if x.cols() != params.in_dim() {
        bail!(Shape, "{} feature columns for a model expecting {}", x.cols(), params.in_dim());
    }
    Ok(())
}

fn trace(op: &PropagationOperator, x: &Matrix, params: &GcnParams, tally: &mut OpTally) -> Result<Trace> {
    check_input(x, op, params)?;
    let mut propagated = Vec::with_capacity(params.num_layers());
    let mut pre = Vec::with_capacity(params.num_layers());
    let mut h = x.clone();
    for w in params.layers() {
        let s = op.apply(&h, tally)?;
        let p = s.matmul(w, tally)?;
        h = p.relu();
        propagated.push(s);
        pre.push(p);
    }
    Ok(Trace {
        propagated,
        pre,
        last: h,
    })
}

/// `X⁽ᴸ⁾` without keeping intermediates.
fn embed(op: &PropagationOperator, x: &Matrix, params: &GcnParams, tally: &mut OpTally) -> Result<Matrix> {
    check_input(x, op, params)?;
    let mut h = x.clone();
    for w in params.layers() {
        h = op.apply(&h, tally)?.matmul(w, tally)?.relu();
    }
    Ok(h)
}

/// Accumulates layer gradients given `∂/∂X⁽ᴸ⁾`. `Â` is symmetric, so its
/// transpose is itself.
fn backward_layers(op: &PropagationOperator, t: &Trace, params: &GcnParams, mut d_h: Matrix, grads: &mut Grads) -> Result<()> {
    let mut scratch = OpTally::default();
    for l in (0..params.num_layers()).rev() {
        let pre = t.pre[l].as_slice();
        for (g, &p) in d_h.as_mut_slice().iter_mut().zip(pre) {
            if p <= 0.0 {
                *g = 0.0;
            }
        }
        grads.layers[l].add_scaled(&t.propagated[l].t_matmul(&d_h)?, 1.0);
        if l > 0 {
            let d_s = d_h.matmul_t(&params.layers()[l])?;
            d_h = op.apply(&d_s, &mut scratch)?;
        }
    }
    Ok(())
}

/// `Z = ReLU(Â … ReLU(Â X W⁽⁰⁾) …) W⁽ᴸ⁾`
pub fn node_model_forward(op: &PropagationOperator, x: &Matrix, params: &GcnParams) -> Result<Matrix> {
    node_model_forward_tallied(op, x, params, &mut OpTally::default())
}

/// [`node_model_forward`], adding the multiply-adds performed to `tally`.
pub fn node_model_forward_tallied(
    op: &PropagationOperator,
    x: &Matrix,
    params: &GcnParams,
    tally: &mut OpTally,
) -> Result<Matrix> {
    embed(op, x, params, tally)?.matmul(params.head(), tally)
}

/// Coordinatewise max over the stacked `X⁽ᴸ⁾` of every piece, then the head.
pub fn pooled_forward(pieces: &[GraphInput], params: &GcnParams) -> Result<Matrix> {
    pooled_forward_tallied(pieces, params, &mut OpTally::default())
}

pub fn pooled_forward_tallied(pieces: &[GraphInput], params: &GcnParams, tally: &mut OpTally) -> Result<Matrix> {
    let width = params.head().rows();
    let mut pooled = vec![f64::NEG_INFINITY; width];
    let mut rows = 0;
    for piece in pieces {
        let h = embed(&piece.op, &piece.features, params, tally)?;
        for i in 0..h.rows() {
            for (m, &v) in pooled.iter_mut().zip(h.row(i)) {
                if v > *m {
                    *m = v;
                }
            }
        }
        rows += h.rows();
    }
    if rows == 0 {
        bail!(InvalidArgument, "cannot pool an empty graph");
    }
    Matrix::from_vec(1, width, pooled)?.matmul(params.head(), tally)
}

/// Graph-level output of a single (possibly coarsened) graph.
pub fn graph_model_gc_forward(op: &PropagationOperator, x: &Matrix, params: &GcnParams) -> Result<Matrix> {
    let input = GraphInput::new(op.clone(), x.clone())?;
    pooled_forward(core::slice::from_ref(&input), params)
}

/// Graph-level output from a subgraph set: every subgraph is propagated with
/// its own operator, all node embeddings are pooled together.
pub fn graph_model_gs_forward(set: &SubgraphSet, params: &GcnParams, mode: DegreeMode) -> Result<Matrix> {
    let pieces = set
        .subgraphs()
        .iter()
        .map(|s| GraphInput::new(PropagationOperator::for_subgraph(s, mode)?, s.features().clone()))
        .collect::<Result<Vec<_>>>()?;
    pooled_forward(&pieces, params)
}

/// One subgraph (or whole graph) contributing node-level loss terms.
#[derive(Clone, Copy, Debug)]
pub struct NodeBatch<'a> {
    pub input: &'a GraphInput,
    pub mask: &'a [bool],
    pub target: Target<'a>,
}

fn diagnose(t: &Trace, z: &Matrix) -> String {
    for (l, p) in t.pre.iter().enumerate() {
        if !t.propagated[l].is_finite() {
            return format!("propagated input of layer {} is not finite", l);
        }
        if !p.is_finite() {
            return format!("pre-activation of layer {} is not finite", l);
        }
    }
    if !z.is_finite() {
        return String::from("head output is not finite");
    }
    String::from("loss is not finite")
}

/// Mean loss over every masked node of every batch (one shared denominator)
/// and its gradient. Weight decay is not included.
pub fn node_objective(batches: &[NodeBatch<'_>], params: &GcnParams, kind: LossKind) -> Result<(f64, Grads)> {
    let out = params.out_dim();
    let terms: usize = batches.iter().map(|b| term_count(kind, out, b.mask)).sum();
    if terms == 0 {
        return Err(Error::NoSupervisedNodes);
    }
    let scale = 1.0 / terms as f64;
    let mut grads = params.zero_grads();
    let mut loss = 0.0;
    let mut tally = OpTally::default();
    for b in batches {
        if !b.mask.iter().any(|&m| m) {
            continue;
        }
        let t = trace(&b.input.op, &b.input.features, params, &mut tally)?;
        let z = t.last.matmul(params.head(), &mut tally)?;
        let mut d_z = Matrix::zeros(z.rows(), z.cols());
        let part = scaled_loss(kind, &z, b.target, b.mask, scale, Some(&mut d_z))?;
        if !part.is_finite() {
            return Err(Error::NonFinite(diagnose(&t, &z)));
        }
        loss += part;
        grads.head.add_scaled(&t.last.t_matmul(&d_z)?, 1.0);
        let d_h = d_z.matmul_t(params.head())?;
        backward_layers(&b.input.op, &t, params, d_h, &mut grads)?;
    }
    if !grads.is_finite() {
        bail!(NonFinite, "gradient is not finite");
    }
    Ok((loss, grads))
}

/// A graph-level example: the pieces whose node embeddings are pooled together.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSample {
    pub pieces: Vec<GraphInput>,
}

/// Mean graph-level loss over the masked samples and its gradient.
/// `target` has one row per sample.
pub fn graph_objective(
    samples: &[GraphSample],
    target: Target<'_>,
    mask: &[bool],
    params: &GcnParams,
    kind: LossKind,
) -> Result<(f64, Grads)> {
    if samples.len() != mask.len() || target.rows() != samples.len() {
        bail!(Shape, "{} samples, {} targets, {} mask entries", samples.len(), target.rows(), mask.len());
    }
    let out = params.out_dim();
    let terms = term_count(kind, out, mask);
    if terms == 0 {
        return Err(Error::NoSupervisedNodes);
    }
    let scale = 1.0 / terms as f64;
    let width = params.head().rows();
    let mut tally = OpTally::default();

    // forward every masked sample, remembering which row won each column
    let mut traces: Vec<Vec<Trace>> = Vec::with_capacity(samples.len());
    let mut winners: Vec<Vec<(usize, usize)>> = Vec::with_capacity(samples.len());
    let mut pooled = Matrix::zeros(samples.len(), width);
    for (s, sample) in samples.iter().enumerate() {
        if !mask[s] {
            traces.push(Vec::new());
            winners.push(Vec::new());
            continue;
        }
        let ts = sample
            .pieces
            .iter()
            .map(|p| trace(&p.op, &p.features, params, &mut tally))
            .collect::<Result<Vec<_>>>()?;
        let mut best = vec![(usize::MAX, 0usize); width];
        let mut value = vec![f64::NEG_INFINITY; width];
        for (pi, t) in ts.iter().enumerate() {
            for i in 0..t.last.rows() {
                for (c, &v) in t.last.row(i).iter().enumerate() {
                    if v > value[c] || best[c].0 == usize::MAX {
                        value[c] = v;
                        best[c] = (pi, i);
                    }
                }
            }
        }
        if best.first().is_some_and(|b| b.0 == usize::MAX) {
            bail!(InvalidArgument, "sample {} has no nodes to pool", s);
        }
        pooled.row_mut(s).copy_from_slice(&value);
        traces.push(ts);
        winners.push(best);
    }
    let z = pooled.matmul(params.head(), &mut tally)?;
    let mut d_z = Matrix::zeros(z.rows(), z.cols());
    let loss = scaled_loss(kind, &z, target, mask, scale, Some(&mut d_z))?;
    if !loss.is_finite() {
        bail!(NonFinite, "graph-level loss is not finite (pooled embeddings finite: {})", pooled.is_finite());
    }

    let mut grads = params.zero_grads();
    grads.head.add_scaled(&pooled.t_matmul(&d_z)?, 1.0);
    let d_pooled = d_z.matmul_t(params.head())?;
    for (s, sample) in samples.iter().enumerate() {
        if !mask[s] {
            continue;
        }
        for (pi, (piece, t)) in sample.pieces.iter().zip(&traces[s]).enumerate() {
            let mut d_h = Matrix::zeros(t.last.rows(), width);
            let mut any = false;
            for (c, &(wp, wr)) in winners[s].iter().enumerate() {
                if wp == pi {
                    d_h[(wr, c)] += d_pooled[(s, c)];
                    any = true;
                }
            }
            if any {
                backward_layers(&piece.op, t, params, d_h, &mut grads)?;
            }
        }
    }
    if !grads.is_finite() {
        bail!(NonFinite, "gradient is not finite");
    }
    Ok((loss, grads))
}

/// Analytic peak of live bytes while running the model over one operator:
/// the operator, the weights, and the largest set of simultaneously live
/// activations (`X⁽ˡ⁾`, `Â X⁽ˡ⁾` and the layer output; then `X⁽ᴸ⁾` and `Z`).
pub fn inference_peak_bytes(op: &PropagationOperator, params: &GcnParams) -> u64 {
    let n = op.n() as u64;
    let dims = params.dims();
    let mut peak = 0u64;
    for l in 0..params.num_layers() {
        peak = peak.max(n * (2 * dims[l] + dims[l + 1]) as u64 * 8);
    }
    let last = dims[dims.len() - 2] as u64;
    let out = dims[dims.len() - 1] as u64;
    peak = peak.max(n * (last + out) * 8);
    op.bytes() + params.bytes() + peak
}

//! Training loops and inference paths for node- and graph-level tasks, and
//! the four train/infer setups built from them.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::coarsen::{
    build_coarsened_graph, coarsen_partition, target_clusters, CoarseTask, CoarsenMethod, CoarsenedGraph,
    PartitionMatrix,
};
use crate::error::{bail, Error, Result};
use crate::gnn::{
    accuracy, adam_step, column_std, graph_objective, node_model_forward, node_model_forward_tallied,
    node_objective, normalized_mae, pooled_forward, AdamState, DegreeMode, GcnParams, GraphInput, GraphSample,
    LossKind, NodeBatch, PropagationOperator, Target,
};
use crate::graph::{Graph, GraphDataset, Labels, Split};
use crate::matrix::{Matrix, OpTally};
use crate::subgraph::{
    augment_cluster_nodes, augment_extra_nodes, build_masks, induce_subgraphs, locate_subgraph, Augmentation,
    SubgraphSet,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Task {
    NodeClass,
    NodeReg,
    GraphClass,
    GraphReg,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::NodeClass => "node_class",
            Task::NodeReg => "node_reg",
            Task::GraphClass => "graph_class",
            Task::GraphReg => "graph_reg",
        }
    }

    pub fn is_graph_level(self) -> bool {
        matches!(self, Task::GraphClass | Task::GraphReg)
    }

    pub fn is_classification(self) -> bool {
        matches!(self, Task::NodeClass | Task::GraphClass)
    }

    pub fn default_loss(self) -> LossKind {
        if self.is_classification() {
            LossKind::CrossEntropy
        } else {
            LossKind::Mae
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "node_class" => Task::NodeClass,
            "node_reg" => Task::NodeReg,
            "graph_class" => Task::GraphClass,
            "graph_reg" => Task::GraphReg,
            other => bail!(InvalidArgument, "unknown task {:?}", other),
        })
    }
}

/// Where the model is trained and where it is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Setup {
    /// Train on `G'`, continue training on the subgraphs, infer on the subgraphs.
    GcToGsTrain,
    /// Train on `G'`, infer on the subgraphs.
    GcToGsInfer,
    /// Train and infer on the subgraphs.
    GsToGsInfer,
    /// Train and infer on `G'` (graph tasks only).
    GcToGcInfer,
}

impl Setup {
    pub fn as_str(self) -> &'static str {
        match self {
            Setup::GcToGsTrain => "gc_to_gs_train",
            Setup::GcToGsInfer => "gc_to_gs_infer",
            Setup::GsToGsInfer => "gs_to_gs_infer",
            Setup::GcToGcInfer => "gc_to_gc_infer",
        }
    }

    fn trains_on_gc(self) -> bool {
        !matches!(self, Setup::GsToGsInfer)
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setup {
    type Err = Error;
    /// Accepts `gc_to_gs_train` as well as `gc->gs_train` / `gc→gs_train`.
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace("->", "_to_").replace('→', "_to_").replace('-', "_");
        Ok(match norm.as_str() {
            "gc_to_gs_train" => Setup::GcToGsTrain,
            "gc_to_gs_infer" => Setup::GcToGsInfer,
            "gs_to_gs_infer" => Setup::GsToGsInfer,
            "gc_to_gc_infer" => Setup::GcToGcInfer,
            _ => bail!(InvalidArgument, "unknown setup {:?}", s),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub num_layers: usize,
    pub hidden: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// `None` picks cross-entropy or MAE from the task.
    pub loss: Option<LossKind>,
    pub seed: u64,
    pub degree_mode: DegreeMode,
    /// AdamW-style decay instead of an L2 term in the gradient.
    pub decoupled_decay: bool,
    /// One optimiser step per subgraph instead of one per epoch.
    pub per_subgraph_steps: bool,
    /// Share of epochs spent on `G'` before subgraph training in `GcToGsTrain`.
    pub gc_epoch_fraction: f64,
}

impl TrainConfig {
    pub fn for_task(task: Task) -> Self {
        Self {
            epochs: 300,
            num_layers: 2,
            hidden: 512,
            lr: if task.is_graph_level() { 1e-4 } else { 0.01 },
            weight_decay: 5e-4,
            loss: None,
            seed: 0,
            degree_mode: DegreeMode::Original,
            decoupled_decay: false,
            per_subgraph_steps: false,
            gc_epoch_fraction: 0.5,
        }
    }

    pub fn loss_for(&self, task: Task) -> LossKind {
        self.loss.unwrap_or(task.default_loss())
    }

    pub fn validate(&self, task: Task) -> Result<()> {
        if self.epochs == 0 || self.num_layers == 0 || self.hidden == 0 {
            bail!(InvalidArgument, "epochs, layers and hidden width must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            bail!(InvalidArgument, "learning rate {} must be positive", self.lr);
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            bail!(InvalidArgument, "weight decay {} must be non-negative", self.weight_decay);
        }
        if !(0.0..=1.0).contains(&self.gc_epoch_fraction) {
            bail!(InvalidArgument, "gc epoch fraction {} outside [0, 1]", self.gc_epoch_fraction);
        }
        if self.loss_for(task) != task.default_loss() {
            bail!(InvalidArgument, "{} loss does not fit a {} task", self.loss_for(task), task);
        }
        Ok(())
    }

    fn optimizer(&self, params: &GcnParams) -> AdamState {
        let mut s = AdamState::new(params);
        s.decoupled = self.decoupled_decay;
        s
    }

    fn step(&self, params: &mut GcnParams, grads: &crate::gnn::Grads, state: &mut AdamState) {
        adam_step(params, grads, state, self.lr, self.weight_decay);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub task: Task,
    pub setup: Setup,
    pub ratio: f64,
    pub augmentation: Augmentation,
    pub method: CoarsenMethod,
    pub train: TrainConfig,
    pub trials: usize,
    /// Trials kept (best by validation metric) for the aggregate.
    pub keep: usize,
}

impl ExperimentSpec {
    pub fn new(
        task: Task,
        setup: Setup,
        ratio: f64,
        augmentation: Augmentation,
        method: CoarsenMethod,
        train: TrainConfig,
        trials: usize,
    ) -> Result<Self> {
        let spec = Self {
            task,
            setup,
            ratio,
            augmentation,
            method,
            train,
            trials,
            keep: 10,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.task == Task::NodeReg && self.setup != Setup::GsToGsInfer {
            bail!(InvalidArgument, "node regression only supports {}", Setup::GsToGsInfer);
        }
        if self.setup == Setup::GcToGcInfer && !self.task.is_graph_level() {
            bail!(InvalidArgument, "{} is only defined for graph-level tasks", Setup::GcToGcInfer);
        }
        target_clusters(1, self.ratio)?;
        if self.trials == 0 || self.keep == 0 {
            bail!(InvalidArgument, "trial and keep counts must be positive");
        }
        self.train.validate(self.task)
    }
}

/// Partition at ratio `r`, raising `k` to the number of connected components
/// when `round(n·r)` would be too small to keep every cluster connected.
pub fn partition_at_least_components(g: &Graph, r: f64, method: CoarsenMethod, seed: u64) -> Result<PartitionMatrix> {
    let k = target_clusters(g.n(), r)?;
    let (components, _) = g.components();
    if g.n() > 0 && k < components {
        return coarsen_partition(g, components as f64 / g.n() as f64, method, seed);
    }
    coarsen_partition(g, r, method, seed)
}

/// The partition of one graph and the two views built from it.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphViews {
    pub partition: PartitionMatrix,
    pub coarse: CoarsenedGraph,
    /// Augmented as requested, with masks.
    pub subgraphs: SubgraphSet,
}

pub fn prepare_views(
    g: &Graph,
    ratio: f64,
    method: CoarsenMethod,
    augmentation: Augmentation,
    seed: u64,
) -> Result<GraphViews> {
    build_views(g, partition_at_least_components(g, ratio, method, seed)?, augmentation)
}

/// Views of `g` for a given partition.
pub fn build_views(g: &Graph, partition: PartitionMatrix, augmentation: Augmentation) -> Result<GraphViews> {
    let task = match g.labels() {
        Labels::Classes { .. } => CoarseTask::Classification,
        Labels::Targets(_) => CoarseTask::Regression,
        Labels::None => CoarseTask::None,
    };
    let coarse = build_coarsened_graph(g, &partition, task)?;
    let bare = build_masks(&induce_subgraphs(g, &partition)?, g)?;
    let subgraphs = match augmentation {
        Augmentation::None => bare,
        Augmentation::Extra => augment_extra_nodes(g, &bare)?,
        Augmentation::Cluster => augment_cluster_nodes(g, &partition, &bare, &coarse)?,
    };
    Ok(GraphViews {
        partition,
        coarse,
        subgraphs,
    })
}

/// Inputs carrying node-level supervision.
struct NodeItem {
    input: GraphInput,
    mask: Vec<bool>,
    labels: Labels,
}

fn output_dim(labels: &Labels) -> Result<usize> {
    labels
        .output_dim()
        .ok_or_else(|| Error::InvalidArgument("training needs labels".into()))
}

fn loss_for_labels(labels: &Labels) -> Result<LossKind> {
    match labels {
        Labels::Classes { .. } => Ok(LossKind::CrossEntropy),
        Labels::Targets(_) => Ok(LossKind::Mae),
        Labels::None => bail!(InvalidArgument, "training needs labels"),
    }
}

/// Full-batch node training; returns the parameters and the loss per epoch.
fn fit_nodes(
    items: &[NodeItem],
    cfg: &TrainConfig,
    epochs: usize,
    init: Option<GcnParams>,
    in_dim: usize,
    out_dim: usize,
    kind: LossKind,
) -> Result<(GcnParams, Vec<f64>)> {
    let mut params = match init {
        Some(p) => {
            if p.in_dim() != in_dim || p.out_dim() != out_dim {
                bail!(Shape, "initial parameters map {} → {}, task needs {} → {}", p.in_dim(), p.out_dim(), in_dim, out_dim);
            }
            p
        }
        None => GcnParams::init(in_dim, cfg.hidden, cfg.num_layers, out_dim, cfg.seed)?,
    };
    let mut state = cfg.optimizer(&params);
    let mut losses = Vec::with_capacity(epochs);
    let batches: Vec<NodeBatch<'_>> = items
        .iter()
        .map(|it| {
            Ok(NodeBatch {
                input: &it.input,
                mask: &it.mask,
                target: Target::from_labels(&it.labels)
                    .ok_or_else(|| Error::InvalidArgument("training needs labels".into()))?,
            })
        })
        .collect::<Result<_>>()?;
    if !batches.iter().any(|b| b.mask.iter().any(|&m| m)) {
        return Err(Error::NoSupervisedNodes);
    }
    for _ in 0..epochs {
        if cfg.per_subgraph_steps {
            let mut total = 0.0;
            for b in batches.iter().filter(|b| b.mask.iter().any(|&m| m)) {
                let (loss, grads) = node_objective(core::slice::from_ref(b), &params, kind)?;
                cfg.step(&mut params, &grads, &mut state);
                total += loss;
            }
            losses.push(total);
        } else {
            let (loss, grads) = node_objective(&batches, &params, kind)?;
            cfg.step(&mut params, &grads, &mut state);
            losses.push(loss);
        }
    }
    Ok((params, losses))
}

/// Training parameters and per-epoch losses.
#[derive(Clone, Debug, PartialEq)]
pub struct Trained {
    pub params: GcnParams,
    pub losses: Vec<f64>,
}

fn coarse_item(gc: &CoarsenedGraph) -> Result<NodeItem> {
    let Some(labels) = gc.labels() else {
        bail!(Unsupported, "training on the coarsened graph needs class labels");
    };
    Ok(NodeItem {
        input: GraphInput::new(PropagationOperator::for_coarse(gc)?, gc.features().clone())?,
        mask: labels.ids.iter().map(Option::is_some).collect(),
        labels: Labels::Classes {
            ids: labels.ids.iter().map(|c| c.unwrap_or(0)).collect(),
            num_classes: labels.num_classes,
        },
    })
}

/// Full-batch cross-entropy training on `(A', D', X', Y')`.
pub fn train_on_gc(gc: &CoarsenedGraph, cfg: &TrainConfig, init: Option<GcnParams>) -> Result<Trained> {
    train_on_gc_for(gc, cfg, cfg.epochs, init)
}

fn train_on_gc_for(gc: &CoarsenedGraph, cfg: &TrainConfig, epochs: usize, init: Option<GcnParams>) -> Result<Trained> {
    let item = coarse_item(gc)?;
    let out = output_dim(&item.labels)?;
    let (params, losses) = fit_nodes(
        core::slice::from_ref(&item),
        cfg,
        epochs,
        init,
        gc.features().cols(),
        out,
        LossKind::CrossEntropy,
    )?;
    Ok(Trained { params, losses })
}

/// One loss over the masked core nodes of every subgraph per epoch.
/// `init` warm-starts from earlier parameters.
pub fn train_on_gs(s: &SubgraphSet, cfg: &TrainConfig, init: Option<GcnParams>) -> Result<Trained> {
    train_on_gs_for(s, cfg, cfg.epochs, init)
}

fn train_on_gs_for(s: &SubgraphSet, cfg: &TrainConfig, epochs: usize, init: Option<GcnParams>) -> Result<Trained> {
    let Some(first) = s.subgraphs().first() else {
        return Err(Error::NoSupervisedNodes);
    };
    let out = output_dim(first.labels())?;
    let kind = loss_for_labels(first.labels())?;
    let in_dim = first.features().cols();
    // subgraphs without training nodes contribute nothing and are skipped
    let items = s
        .subgraphs()
        .iter()
        .filter(|sub| sub.mask().iter().any(|&m| m))
        .map(|sub| {
            Ok(NodeItem {
                input: GraphInput::new(PropagationOperator::for_subgraph(sub, cfg.degree_mode)?, sub.features().clone())?,
                mask: sub.mask().to_vec(),
                labels: sub.labels().clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (params, losses) = fit_nodes(&items, cfg, epochs, init, in_dim, out, kind)?;
    Ok(Trained { params, losses })
}

/// Classical full-graph training on the train split.
pub fn train_full(g: &Graph, cfg: &TrainConfig) -> Result<Trained> {
    let item = NodeItem {
        input: GraphInput::new(PropagationOperator::for_graph(g)?, g.features().clone())?,
        mask: g.mask(Split::Train),
        labels: g.labels().clone(),
    };
    let out = output_dim(g.labels())?;
    let kind = loss_for_labels(g.labels())?;
    let (params, losses) = fit_nodes(core::slice::from_ref(&item), cfg, cfg.epochs, None, g.feature_dim(), out, kind)?;
    Ok(Trained { params, losses })
}

pub fn infer_full(g: &Graph, params: &GcnParams) -> Result<Matrix> {
    node_model_forward(&PropagationOperator::for_graph(g)?, g.features(), params)
}

pub fn infer_full_tallied(g: &Graph, params: &GcnParams, tally: &mut OpTally) -> Result<Matrix> {
    node_model_forward_tallied(&PropagationOperator::for_graph(g)?, g.features(), params, tally)
}

/// One prediction row per global node, each from the subgraph in which the
/// node is core. Operators are built one subgraph at a time.
pub fn infer_subgraphs(s: &SubgraphSet, params: &GcnParams, mode: DegreeMode) -> Result<Matrix> {
    let mut out = Matrix::zeros(s.num_nodes(), params.out_dim());
    for sub in s.subgraphs() {
        let op = PropagationOperator::for_subgraph(sub, mode)?;
        let z = node_model_forward(&op, sub.features(), params)?;
        for (l, &v) in sub.core_ids().iter().enumerate() {
            out.row_mut(v).copy_from_slice(z.row(l));
        }
    }
    Ok(out)
}

/// Prediction for one node, running the model on its own subgraph only.
pub fn infer_single_node(
    s: &SubgraphSet,
    params: &GcnParams,
    mode: DegreeMode,
    node: usize,
    tally: &mut OpTally,
) -> Result<Vec<f64>> {
    let sub = &s.subgraphs()[locate_subgraph(s, node)?];
    let op = PropagationOperator::for_subgraph(sub, mode)?;
    let z = node_model_forward_tallied(&op, sub.features(), params, tally)?;
    let l = sub.local_core_index(node).ok_or(Error::UnknownNode(node))?;
    Ok(z.row(l).to_vec())
}

/// Predictions for the `k` coarse nodes.
pub fn infer_coarse(gc: &CoarsenedGraph, params: &GcnParams) -> Result<Matrix> {
    node_model_forward(&PropagationOperator::for_coarse(gc)?, gc.features(), params)
}

/// Accuracy for class labels, normalised MAE (with `sigma`) for targets.
pub fn evaluate(pred: &Matrix, labels: &Labels, mask: &[bool], sigma: Option<&[f64]>) -> Result<f64> {
    match labels {
        Labels::Classes { ids, .. } => accuracy(pred, ids, mask),
        Labels::Targets(t) => {
            let owned;
            let sigma = match sigma {
                Some(s) => s,
                None => {
                    owned = vec![1.0; t.cols()];
                    &owned
                }
            };
            normalized_mae(pred, t, mask, sigma)
        }
        Labels::None => bail!(InvalidArgument, "evaluation needs labels"),
    }
}

/// Per-column standard deviation of the training targets, or `None` for classes.
pub fn train_sigma(labels: &Labels, train_mask: &[bool]) -> Result<Option<Vec<f64>>> {
    match labels {
        Labels::Targets(t) => {
            let mut s = column_std(t, train_mask)?;
            // constant columns would divide by zero; leave them unscaled
            for v in &mut s {
                if *v == 0.0 {
                    *v = 1.0;
                }
            }
            Ok(Some(s))
        }
        _ => Ok(None),
    }
}

/// Outcome of one seeded run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub seed: u64,
    pub val_metric: f64,
    pub test_metric: f64,
    pub final_loss: f64,
}

/// Epochs for the `G'` phase and the subgraph phase.
fn phase_epochs(spec: &ExperimentSpec) -> (usize, usize) {
    match spec.setup {
        Setup::GcToGsTrain => {
            let gc = libm::round(spec.train.epochs as f64 * spec.train.gc_epoch_fraction) as usize;
            (gc, spec.train.epochs - gc)
        }
        Setup::GsToGsInfer => (0, spec.train.epochs),
        Setup::GcToGsInfer | Setup::GcToGcInfer => (spec.train.epochs, 0),
    }
}

/// Trains according to the setup; returns parameters and all epoch losses.
pub fn train_node_task(g: &Graph, views: &GraphViews, spec: &ExperimentSpec) -> Result<Trained> {
    spec.validate()?;
    if spec.task.is_graph_level() {
        bail!(InvalidArgument, "{} is not a node-level task", spec.task);
    }
    let (gc_epochs, gs_epochs) = phase_epochs(spec);
    let mut losses = Vec::new();
    let mut params = None;
    if spec.setup.trains_on_gc() && gc_epochs > 0 {
        let t = train_on_gc_for(&views.coarse, &spec.train, gc_epochs, None)?;
        losses.extend(t.losses);
        params = Some(t.params);
    }
    if spec.setup == Setup::GcToGsInfer || gs_epochs == 0 {
        return match params {
            Some(params) => Ok(Trained { params, losses }),
            None => {
                let out = output_dim(g.labels())?;
                let p = GcnParams::init(g.feature_dim(), spec.train.hidden, spec.train.num_layers, out, spec.train.seed)?;
                Ok(Trained { params: p, losses })
            }
        };
    }
    let t = train_on_gs_for(&views.subgraphs, &spec.train, gs_epochs, params)?;
    losses.extend(t.losses);
    Ok(Trained { params: t.params, losses })
}

/// Partition, train and evaluate on the subgraphs for one seed.
pub fn run_node_trial(g: &Graph, spec: &ExperimentSpec, seed: u64) -> Result<TrialResult> {
    let mut spec = spec.clone();
    spec.train.seed = seed;
    let views = prepare_views(g, spec.ratio, spec.method, spec.augmentation, seed)?;
    let trained = train_node_task(g, &views, &spec)?;
    let pred = infer_subgraphs(&views.subgraphs, &trained.params, spec.train.degree_mode)?;
    let sigma = train_sigma(g.labels(), &g.mask(Split::Train))?;
    Ok(TrialResult {
        seed,
        val_metric: evaluate(&pred, g.labels(), &g.mask(Split::Val), sigma.as_deref())?,
        test_metric: evaluate(&pred, g.labels(), &g.mask(Split::Test), sigma.as_deref())?,
        final_loss: trained.losses.last().copied().unwrap_or(f64::NAN),
    })
}

/// Per-graph inputs for both views of a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphTaskInputs {
    /// One piece per graph: its coarsened graph.
    pub coarse: Vec<GraphSample>,
    /// One piece per subgraph of each graph.
    pub subgraphs: Vec<GraphSample>,
}

/// Coarsens and partitions every dataset graph independently at the spec's ratio.
pub fn prepare_graph_task(ds: &GraphDataset, spec: &ExperimentSpec, seed: u64) -> Result<GraphTaskInputs> {
    let mut coarse = Vec::with_capacity(ds.len());
    let mut subgraphs = Vec::with_capacity(ds.len());
    for g in ds.graphs() {
        let views = prepare_views(g, spec.ratio, spec.method, spec.augmentation, seed)?;
        let op = PropagationOperator::for_coarse(&views.coarse)?;
        coarse.push(GraphSample {
            pieces: vec![GraphInput::new(op, views.coarse.features().clone())?],
        });
        let pieces = views
            .subgraphs
            .subgraphs()
            .iter()
            .map(|s| GraphInput::new(PropagationOperator::for_subgraph(s, spec.train.degree_mode)?, s.features().clone()))
            .collect::<Result<Vec<_>>>()?;
        subgraphs.push(GraphSample { pieces });
    }
    Ok(GraphTaskInputs { coarse, subgraphs })
}

#[allow(clippy::too_many_arguments)]
fn fit_graphs(
    samples: &[GraphSample],
    target: Target<'_>,
    mask: &[bool],
    cfg: &TrainConfig,
    epochs: usize,
    params: &mut GcnParams,
    kind: LossKind,
    losses: &mut Vec<f64>,
) -> Result<()> {
    let mut state = cfg.optimizer(params);
    for _ in 0..epochs {
        let (loss, grads) = graph_objective(samples, target, mask, params, kind)?;
        cfg.step(params, &grads, &mut state);
        losses.push(loss);
    }
    Ok(())
}

/// Trains a graph-level model on the training graphs according to the setup.
pub fn train_graph_task(ds: &GraphDataset, inputs: &GraphTaskInputs, spec: &ExperimentSpec) -> Result<Trained> {
    spec.validate()?;
    if !spec.task.is_graph_level() {
        bail!(InvalidArgument, "{} is not a graph-level task", spec.task);
    }
    let target = Target::from_labels(ds.targets()).ok_or_else(|| Error::InvalidArgument("dataset has no targets".into()))?;
    let kind = loss_for_labels(ds.targets())?;
    let out = output_dim(ds.targets())?;
    let mask: Vec<bool> = ds.splits().iter().map(|&s| s == Split::Train).collect();
    let cfg = &spec.train;
    let mut params = GcnParams::init(ds.feature_dim(), cfg.hidden, cfg.num_layers, out, cfg.seed)?;
    let mut losses = Vec::new();
    let (gc_epochs, gs_epochs) = phase_epochs(spec);
    if spec.setup.trains_on_gc() {
        fit_graphs(&inputs.coarse, target, &mask, cfg, gc_epochs, &mut params, kind, &mut losses)?;
    }
    if matches!(spec.setup, Setup::GcToGsTrain | Setup::GsToGsInfer) {
        fit_graphs(&inputs.subgraphs, target, &mask, cfg, gs_epochs, &mut params, kind, &mut losses)?;
    }
    Ok(Trained { params, losses })
}

/// One output row per dataset graph, on the view the setup infers with.
pub fn infer_graph_task(inputs: &GraphTaskInputs, spec: &ExperimentSpec, params: &GcnParams) -> Result<Matrix> {
    let samples = match spec.setup {
        Setup::GcToGcInfer => &inputs.coarse,
        _ => &inputs.subgraphs,
    };
    let mut out = Matrix::zeros(samples.len(), params.out_dim());
    for (i, s) in samples.iter().enumerate() {
        out.row_mut(i).copy_from_slice(pooled_forward(&s.pieces, params)?.row(0));
    }
    Ok(out)
}

pub fn run_graph_trial(ds: &GraphDataset, spec: &ExperimentSpec, seed: u64) -> Result<TrialResult> {
    let mut spec = spec.clone();
    spec.train.seed = seed;
    let inputs = prepare_graph_task(ds, &spec, seed)?;
    let trained = train_graph_task(ds, &inputs, &spec)?;
    let pred = infer_graph_task(&inputs, &spec, &trained.params)?;
    let mask = |split: Split| -> Vec<bool> { ds.splits().iter().map(|&s| s == split).collect() };
    let sigma = train_sigma(ds.targets(), &mask(Split::Train))?;
    Ok(TrialResult {
        seed,
        val_metric: evaluate(&pred, ds.targets(), &mask(Split::Val), sigma.as_deref())?,
        test_metric: evaluate(&pred, ds.targets(), &mask(Split::Test), sigma.as_deref())?,
        final_loss: trained.losses.last().copied().unwrap_or(f64::NAN),
    })
}

/// Either a single graph (node tasks) or a dataset (graph tasks).
#[derive(Clone, Copy, Debug)]
pub enum TaskData<'a> {
    Nodes(&'a Graph),
    Graphs(&'a GraphDataset),
}

/// Seed of trial `t`.
pub fn trial_seed(spec: &ExperimentSpec, t: usize) -> u64 {
    spec.train.seed.wrapping_add(t as u64)
}

pub fn run_trial(data: TaskData<'_>, spec: &ExperimentSpec, t: usize) -> Result<TrialResult> {
    let seed = trial_seed(spec, t);
    match (data, spec.task.is_graph_level()) {
        (TaskData::Nodes(g), false) => run_node_trial(g, spec, seed),
        (TaskData::Graphs(ds), true) => run_graph_trial(ds, spec, seed),
        _ => bail!(InvalidArgument, "data does not match a {} task", spec.task),
    }
}

/// Mean and standard deviation of the test metric over the kept trials.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    /// Indices into the trial list, best first.
    pub kept: Vec<usize>,
    pub mean: f64,
    pub std: f64,
}

/// Keeps the `keep` best trials by validation metric (higher is better for
/// classification, lower for regression; earlier trials win ties) and
/// summarises their test metric. `std` is the population deviation.
pub fn aggregate(trials: &[TrialResult], keep: usize, task: Task) -> Result<Aggregate> {
    if trials.is_empty() {
        bail!(InvalidArgument, "no trials to aggregate");
    }
    let mut order: Vec<usize> = (0..trials.len()).collect();
    let higher = task.is_classification();
    order.sort_by(|&a, &b| {
        let (va, vb) = (trials[a].val_metric, trials[b].val_metric);
        let c = if higher { vb.total_cmp(&va) } else { va.total_cmp(&vb) };
        c.then(a.cmp(&b))
    });
    order.truncate(keep.min(trials.len()));
    let n = order.len() as f64;
    let mean = order.iter().map(|&i| trials[i].test_metric).sum::<f64>() / n;
    let var = order
        .iter()
        .map(|&i| (trials[i].test_metric - mean) * (trials[i].test_metric - mean))
        .sum::<f64>()
        / n;
    Ok(Aggregate {
        kept: order,
        mean,
        std: libm::sqrt(var),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;
    use crate::synth::{erdos_renyi, synth_sbm, triangle_dataset};

    fn small_cfg(task: Task, epochs: usize) -> TrainConfig {
        let mut c = TrainConfig::for_task(task);
        c.epochs = epochs;
        c.hidden = 16;
        c
    }

    fn spec(task: Task, setup: Setup, ratio: f64, aug: Augmentation, cfg: TrainConfig) -> ExperimentSpec {
        ExperimentSpec::new(task, setup, ratio, aug, CoarsenMethod::HeavyEdge, cfg, 1).unwrap()
    }

    fn single_cluster(g: &Graph) -> GraphViews {
        let partition = PartitionMatrix::from_assignment(vec![0; g.n()]).unwrap();
        GraphViews {
            coarse: build_coarsened_graph(g, &partition, CoarseTask::Classification).unwrap(),
            subgraphs: build_masks(&induce_subgraphs(g, &partition).unwrap(), g).unwrap(),
            partition,
        }
    }

    #[test]
    fn setup_gating() {
        let cfg = TrainConfig::for_task(Task::NodeReg);
        let mk = |task, setup| {
            ExperimentSpec::new(task, setup, 0.5, Augmentation::None, CoarsenMethod::HeavyEdge, cfg.clone(), 1)
        };
        assert!(mk(Task::NodeReg, Setup::GsToGsInfer).is_ok());
        assert!(mk(Task::NodeReg, Setup::GcToGsTrain).is_err());
        assert!(mk(Task::NodeClass, Setup::GcToGcInfer).is_err());
        assert!(mk(Task::GraphReg, Setup::GcToGcInfer).is_ok());
        assert!(mk(Task::NodeReg, Setup::GsToGsInfer).is_ok());
        let mut bad = TrainConfig::for_task(Task::NodeClass);
        bad.loss = Some(LossKind::Mae);
        assert!(bad.validate(Task::NodeClass).is_err());
        assert_eq!("gc->gs_train".parse::<Setup>().unwrap(), Setup::GcToGsTrain);
        assert_eq!("gc→gc_infer".parse::<Setup>().unwrap(), Setup::GcToGcInfer);
    }

    #[test]
    fn epoch_split_is_half_and_half() {
        let mut cfg = small_cfg(Task::NodeClass, 301);
        cfg.gc_epoch_fraction = 0.5;
        let s = spec(Task::NodeClass, Setup::GcToGsTrain, 0.5, Augmentation::None, cfg);
        assert_eq!(phase_epochs(&s), (151, 150));
    }

    #[test]
    fn coarse_training_separates_two_cliques() {
        let g = synth_sbm(&[10, 10], 1.0, 0.0, 4, 3).unwrap();
        let p = coarsen_partition(&g, 0.5, CoarsenMethod::HeavyEdge, 0).unwrap();
        let gc = build_coarsened_graph(&g, &p, CoarseTask::Classification).unwrap();
        let t = train_on_gc(&gc, &small_cfg(Task::NodeClass, 300), None).unwrap();
        assert!(*t.losses.last().unwrap() < 0.1, "{:?}", t.losses.last());
    }

    #[test]
    fn unit_ratio_coarse_training_is_full_training() {
        let g = synth_sbm(&[15, 15], 0.3, 0.05, 4, 1).unwrap();
        let cfg = small_cfg(Task::NodeClass, 30);
        let p = coarsen_partition(&g, 1.0, CoarsenMethod::HeavyEdge, 0).unwrap();
        let gc = build_coarsened_graph(&g, &p, CoarseTask::Classification).unwrap();
        assert_eq!(train_on_gc(&gc, &cfg, None).unwrap(), train_full(&g, &cfg).unwrap());
    }

    #[test]
    fn regression_labels_cannot_train_on_gc() {
        let g = erdos_renyi(10, 0.4, 2, 0).unwrap();
        let g = g.with_labels(Labels::Targets(Matrix::zeros(10, 1))).unwrap();
        let p = coarsen_partition(&g, 1.0, CoarsenMethod::HeavyEdge, 0).unwrap();
        let gc = build_coarsened_graph(&g, &p, CoarseTask::Regression).unwrap();
        assert!(matches!(train_on_gc(&gc, &small_cfg(Task::NodeClass, 1), None), Err(Error::Unsupported(_))));
    }

    #[test]
    fn single_subgraph_training_is_full_training() {
        let g = synth_sbm(&[12, 12], 0.3, 0.05, 3, 2).unwrap();
        let cfg = small_cfg(Task::NodeClass, 25);
        let views = single_cluster(&g);
        let a = train_on_gs(&views.subgraphs, &cfg, None).unwrap();
        assert_eq!(a, train_full(&g, &cfg).unwrap());
        let full = infer_full(&g, &a.params).unwrap();
        let sub = infer_subgraphs(&views.subgraphs, &a.params, DegreeMode::Original).unwrap();
        assert_eq!(full, sub);
    }

    #[test]
    fn trained_gs_model_classifies_planted_partition() {
        let g = synth_sbm(&[100, 100], 0.1, 0.01, 8, 5).unwrap();
        let s = spec(Task::NodeClass, Setup::GsToGsInfer, 0.1, Augmentation::Cluster, small_cfg(Task::NodeClass, 100));
        let r = run_node_trial(&g, &s, 5).unwrap();
        assert!(r.test_metric >= 0.9, "{r:?}");
    }

    #[test]
    fn extra_nodes_reproduce_full_inference() {
        for seed in 0..10 {
            let g = erdos_renyi(40, 0.1, 3, seed).unwrap();
            let views = prepare_views(&g, 0.3, CoarsenMethod::NeighborhoodGrowth, Augmentation::Extra, seed).unwrap();
            let p = GcnParams::init(3, 8, 1, 2, seed).unwrap();
            let full = infer_full(&g, &p).unwrap();
            let sub = infer_subgraphs(&views.subgraphs, &p, DegreeMode::Original).unwrap();
            assert!(full.max_abs_diff(&sub) < 1e-10);
        }
    }

    #[test]
    fn single_node_agrees_with_subgraph_inference() {
        for seed in 0..20 {
            let g = erdos_renyi(25, 0.15, 3, seed).unwrap();
            let aug = [Augmentation::None, Augmentation::Extra, Augmentation::Cluster][seed as usize % 3];
            let views = prepare_views(&g, 0.3, CoarsenMethod::HeavyEdge, aug, seed).unwrap();
            let p = GcnParams::init(3, 6, 2, 2, seed).unwrap();
            let all = infer_subgraphs(&views.subgraphs, &p, DegreeMode::Original).unwrap();
            for v in 0..g.n() {
                let row = infer_single_node(&views.subgraphs, &p, DegreeMode::Original, v, &mut OpTally::default()).unwrap();
                assert_eq!(row.as_slice(), all.row(v));
            }
        }
        let g = erdos_renyi(5, 0.5, 3, 0).unwrap();
        let views = prepare_views(&g, 1.0, CoarsenMethod::HeavyEdge, Augmentation::None, 0).unwrap();
        let p = GcnParams::init(3, 6, 2, 2, 0).unwrap();
        assert_eq!(
            infer_single_node(&views.subgraphs, &p, DegreeMode::Original, 5, &mut OpTally::default()),
            Err(Error::UnknownNode(5))
        );
    }

    #[test]
    fn identity_partition_cost_is_independent_of_n() {
        let p = GcnParams::init(3, 6, 2, 2, 0).unwrap();
        let mut costs = Vec::new();
        for n in [10, 200] {
            let g = erdos_renyi(n, 0.05, 3, 1).unwrap();
            let views = prepare_views(&g, 1.0, CoarsenMethod::HeavyEdge, Augmentation::None, 0).unwrap();
            let mut t = OpTally::default();
            infer_single_node(&views.subgraphs, &p, DegreeMode::Original, 3, &mut t).unwrap();
            costs.push(t.madds);
        }
        assert_eq!(costs[0], costs[1]);
    }

    #[test]
    fn every_node_predicted_exactly_once() {
        let g = erdos_renyi(30, 0.1, 2, 4).unwrap();
        let views = prepare_views(&g, 0.2, CoarsenMethod::HeavyEdge, Augmentation::Cluster, 4).unwrap();
        let mut seen = vec![0; g.n()];
        for s in views.subgraphs.subgraphs() {
            for &v in s.core_ids() {
                seen[v] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn disconnected_graph_partitions_per_component() {
        let mut b = GraphBuilder::new(6);
        b.edge(0, 1, 1.0).edge(2, 3, 1.0).edge(4, 5, 1.0);
        let g = b.build().unwrap();
        let p = partition_at_least_components(&g, 0.1, CoarsenMethod::HeavyEdge, 0).unwrap();
        assert_eq!(p.k(), 3);
    }

    #[test]
    fn two_single_node_graphs_separate() {
        let graphs = [1.0, -1.0]
            .iter()
            .map(|&x| {
                let mut b = GraphBuilder::new(1);
                b.features(Matrix::from_rows(&[[x, 1.0]]).unwrap());
                b.build().unwrap()
            })
            .collect();
        let ds = GraphDataset::new(graphs, Labels::classes(vec![0, 1]), vec![Split::Train; 2]).unwrap();
        let mut cfg = small_cfg(Task::GraphClass, 300);
        cfg.lr = 0.05;
        cfg.weight_decay = 0.0;
        let s = spec(Task::GraphClass, Setup::GcToGcInfer, 0.5, Augmentation::None, cfg);
        let inputs = prepare_graph_task(&ds, &s, 0).unwrap();
        let t = train_graph_task(&ds, &inputs, &s).unwrap();
        assert!(*t.losses.last().unwrap() < 0.01, "{:?}", t.losses.last());
    }

    #[test]
    fn triangle_counts_beat_majority() {
        let ds = triangle_dataset(200, 12, 3).unwrap();
        let mut cfg = small_cfg(Task::GraphClass, 200);
        cfg.lr = 0.01;
        let s = spec(Task::GraphClass, Setup::GsToGsInfer, 0.5, Augmentation::Extra, cfg);
        let r = run_graph_trial(&ds, &s, 1).unwrap();
        let Labels::Classes { ids, .. } = ds.targets() else { unreachable!() };
        let test: Vec<usize> = ds.indices(Split::Test);
        let ones = test.iter().filter(|&&i| ids[i] == 1).count() as f64 / test.len() as f64;
        let majority = ones.max(1.0 - ones);
        assert!(r.test_metric > majority, "{} vs {}", r.test_metric, majority);
    }

    #[test]
    fn graph_setups_run_and_repeat() {
        let ds = triangle_dataset(30, 8, 1).unwrap();
        for setup in [Setup::GcToGsTrain, Setup::GcToGsInfer, Setup::GsToGsInfer, Setup::GcToGcInfer] {
            let s = spec(Task::GraphClass, setup, 0.5, Augmentation::Cluster, small_cfg(Task::GraphClass, 6));
            let a = run_graph_trial(&ds, &s, 2).unwrap();
            assert_eq!(a, run_graph_trial(&ds, &s, 2).unwrap());
            assert!(a.final_loss.is_finite());
        }
    }

    #[test]
    fn node_setups_run_and_repeat() {
        let g = synth_sbm(&[20, 20], 0.3, 0.02, 4, 9).unwrap();
        for setup in [Setup::GcToGsTrain, Setup::GcToGsInfer, Setup::GsToGsInfer] {
            let mut cfg = small_cfg(Task::NodeClass, 10);
            cfg.per_subgraph_steps = setup == Setup::GcToGsTrain;
            let s = spec(Task::NodeClass, setup, 0.3, Augmentation::Extra, cfg);
            let a = run_trial(TaskData::Nodes(&g), &s, 0).unwrap();
            assert_eq!(a, run_trial(TaskData::Nodes(&g), &s, 0).unwrap());
            assert!((0.0..=1.0).contains(&a.test_metric));
        }
    }

    #[test]
    fn node_regression_reports_normalised_mae() {
        let g = synth_sbm(&[20, 20], 0.3, 0.02, 4, 9).unwrap();
        let t = Matrix::from_vec(40, 1, (0..40).map(|i| (i / 20) as f64 * 3.0).collect()).unwrap();
        let g = g.with_labels(Labels::Targets(t)).unwrap();
        let s = spec(Task::NodeReg, Setup::GsToGsInfer, 0.3, Augmentation::None, small_cfg(Task::NodeReg, 50));
        let r = run_node_trial(&g, &s, 0).unwrap();
        assert!(r.test_metric.is_finite() && r.test_metric >= 0.0);
    }

    #[test]
    fn aggregate_keeps_best_by_validation() {
        let t = |val, test| TrialResult {
            seed: 0,
            val_metric: val,
            test_metric: test,
            final_loss: 0.0,
        };
        let trials = [t(0.5, 0.1), t(0.9, 0.8), t(0.7, 0.6), t(0.9, 1.0)];
        let a = aggregate(&trials, 2, Task::NodeClass).unwrap();
        assert_eq!(a.kept, vec![1, 3]);
        assert!((a.mean - 0.9).abs() < 1e-15 && (a.std - 0.1).abs() < 1e-12);
        let a = aggregate(&trials, 1, Task::NodeReg).unwrap();
        assert_eq!(a.kept, vec![0]);
        assert_eq!(a.std, 0.0);
        assert_eq!(aggregate(&trials, 10, Task::NodeClass).unwrap().kept.len(), 4);
    }
}

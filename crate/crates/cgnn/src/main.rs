use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cgnn::bench::{bench_graph_inference, bench_inference, BenchMode, BenchSpec};
use cgnn::experiment::{load_config, run_experiment};
use cgnn::io;
use cgnn_core::feasibility::{feasibility_region, lemma2_check, phi_max_bound, phi_second_bound, ratio_bound, time_diff_t};
use cgnn_core::pipelines::{
    build_views, evaluate, infer_coarse, infer_full, infer_graph_task, infer_single_node, infer_subgraphs,
    partition_at_least_components, prepare_graph_task, train_graph_task, train_node_task, train_sigma,
    ExperimentSpec, GraphViews, Setup, Task, TaskData, TrainConfig,
};
use cgnn_core::synth::{erdos_renyi, synth_sbm_with, triangle_dataset, SbmConfig};
use cgnn_core::{build_coarsened_graph, Augmentation, CoarseTask, CoarsenMethod, DegreeMode, Graph, GraphDataset, Labels, OpTally, Split};
use cgnn_core::gnn::LossKind;

#[derive(Parser)]
#[command(name = "cgnn", version, about = "Coarsened and subgraph-level GCN training, inference and benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic graph or graph dataset.
    Synth(SynthArgs),
    /// Partition a graph and write the partition file.
    Partition(PartitionArgs),
    /// Partition a graph and write the partition and the coarsened graph.
    Coarsen(PartitionArgs),
    /// Build (augmented) subgraphs and dump them.
    Augment(AugmentArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Run a checkpoint and write predictions.
    Infer(InferArgs),
    /// Measure inference latency, operation counts and peak memory.
    Bench(BenchArgs),
    /// Evaluate the feasibility bounds for subgraph-level inference.
    Feasibility(FeasibilityArgs),
    /// Run a multi-trial experiment and write JSON and CSV reports.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct Input {
    /// Graph JSON file.
    #[arg(long, conflicts_with_all = ["edges", "dataset"])]
    graph: Option<PathBuf>,
    /// Edge list (`u v [w]` per line).
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Node count for an edge list (defaults to feature rows or max id + 1).
    #[arg(long, requires = "edges")]
    nodes: Option<usize>,
    #[arg(long, requires = "edges")]
    features: Option<PathBuf>,
    #[arg(long, requires = "edges")]
    labels: Option<PathBuf>,
    #[arg(long, requires = "edges")]
    splits: Option<PathBuf>,
    /// Graph dataset JSON file (graph-level tasks).
    #[arg(long)]
    dataset: Option<PathBuf>,
}

enum Loaded {
    Graph(Graph),
    Dataset(GraphDataset),
}

impl Input {
    fn load(&self) -> Result<Loaded> {
        if let Some(p) = &self.graph {
            return Ok(Loaded::Graph(io::load_graph_json(p)?));
        }
        if let Some(p) = &self.edges {
            let g = io::load_edge_list_graph(
                self.nodes,
                p,
                self.features.as_deref(),
                self.labels.as_deref(),
                self.splits.as_deref(),
            )?;
            return Ok(Loaded::Graph(g));
        }
        if let Some(p) = &self.dataset {
            return Ok(Loaded::Dataset(io::load_dataset_json(p)?));
        }
        bail!("one of --graph, --edges or --dataset is required")
    }

    fn graph(&self) -> Result<Graph> {
        match self.load()? {
            Loaded::Graph(g) => Ok(g),
            Loaded::Dataset(_) => bail!("this command needs a single graph (--graph or --edges)"),
        }
    }
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Coarsening ratio r = k/n in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    #[arg(long, default_value = "heavy_edge")]
    method: CoarsenMethod,
    /// none, extra or cluster.
    #[arg(long, default_value = "none")]
    augment: Augmentation,
    /// gc_to_gs_train, gc_to_gs_infer, gs_to_gs_infer or gc_to_gc_infer.
    #[arg(long, default_value = "gs_to_gs_infer")]
    setup: Setup,
    /// node_class, node_reg, graph_class or graph_reg.
    #[arg(long, default_value = "node_class")]
    task: Task,
}

#[derive(Args, Clone)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    loss: Option<LossKind>,
    /// original or local.
    #[arg(long)]
    degree_mode: Option<DegreeMode>,
    #[arg(long)]
    decoupled_decay: bool,
    #[arg(long)]
    per_subgraph_steps: bool,
    #[arg(long)]
    gc_epoch_fraction: Option<f64>,
    /// Trials for `report`; the best `keep` (10) by validation metric are aggregated.
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Flat TOML experiment config; replaces the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl TrainFlags {
    fn spec(&self, c: &Common) -> Result<ExperimentSpec> {
        if let Some(p) = &self.config {
            return load_config(p);
        }
        let mut t = TrainConfig::for_task(c.task);
        t.seed = c.seed;
        t.epochs = self.epochs.unwrap_or(t.epochs);
        t.num_layers = self.layers.unwrap_or(t.num_layers);
        t.hidden = self.hidden.unwrap_or(t.hidden);
        t.lr = self.lr.unwrap_or(t.lr);
        t.weight_decay = self.weight_decay.unwrap_or(t.weight_decay);
        t.loss = self.loss;
        t.degree_mode = self.degree_mode.unwrap_or_default();
        t.decoupled_decay = self.decoupled_decay;
        t.per_subgraph_steps = self.per_subgraph_steps;
        t.gc_epoch_fraction = self.gc_epoch_fraction.unwrap_or(t.gc_epoch_fraction);
        Ok(ExperimentSpec::new(c.task, c.setup, c.ratio, c.augment, c.method, t, self.trials)?)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// sbm, er or triangles.
    #[arg(long, default_value = "sbm")]
    kind: String,
    /// Comma-separated block sizes.
    #[arg(long, value_delimiter = ',', default_value = "100,100")]
    blocks: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    p_out: f64,
    /// Node count for `er`, nodes per graph for `triangles`.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Edge probability for `er`.
    #[arg(long, default_value_t = 0.05)]
    p: f64,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    /// Number of graphs for `triangles`.
    #[arg(long, default_value_t = 200)]
    graphs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PartitionArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct AugmentArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    common: Common,
    /// Partition file; computed from --ratio/--method/--seed when absent.
    #[arg(long)]
    partition: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long)]
    partition: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    partition: Option<PathBuf>,
    /// full, subgraphs, single_node or coarse (node tasks); graph tasks follow --setup.
    #[arg(long, default_value = "subgraphs")]
    mode: BenchMode,
    /// Node to predict in single_node mode.
    #[arg(long)]
    node: Option<usize>,
    #[arg(long)]
    degree_mode: Option<DegreeMode>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    partition: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, value_delimiter = ',', default_value = "full,subgraphs,single_node,coarse")]
    modes: Vec<BenchMode>,
    #[arg(long)]
    degree_mode: Option<DegreeMode>,
    #[arg(long, default_value = "bench")]
    scenario: String,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct FeasibilityArgs {
    /// Feature dimension.
    #[arg(long)]
    d: u64,
    /// Coarsening ratio; prints the upper bound on φ_max.
    #[arg(long)]
    r: Option<f64>,
    /// Prints the ratio bound (d − 2)/(d + φ) for this φ_max.
    #[arg(long)]
    phi: Option<u64>,
    /// Node count for the second bound, the inference-cost check and T(n).
    #[arg(long)]
    n: Option<u64>,
    /// Comma-separated cluster sizes summing to n.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<u64>,
    /// Largest cluster has n/α nodes; prints T(n).
    #[arg(long)]
    alpha: Option<f64>,
    /// Writes an (n, r, feasible) grid for --grid-n × --grid-r with --phi.
    #[arg(long)]
    grid_out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    grid_n: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    grid_r: Vec<f64>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long)]
    out_dir: PathBuf,
}

fn views_for(g: &Graph, c: &Common, partition: Option<&Path>) -> Result<GraphViews> {
    let p = match partition {
        Some(path) => {
            let f = io::load_partition(path)?;
            if f.partition.n() != g.n() {
                bail!("partition covers {} nodes but the graph has {}", f.partition.n(), g.n());
            }
            f.partition
        }
        None => partition_at_least_components(g, c.ratio, c.method, c.seed)?,
    };
    Ok(build_views(g, p, c.augment)?)
}

fn synth(a: SynthArgs) -> Result<()> {
    match a.kind.as_str() {
        "sbm" => {
            let g = synth_sbm_with(&SbmConfig::new(a.blocks, a.p_in, a.p_out, a.dim, a.seed))?;
            io::save_graph_json(&a.out, &g)?;
            println!("wrote {} nodes, {} edges to {}", g.n(), g.num_edges(), a.out.display());
        }
        "er" => {
            let g = erdos_renyi(a.n, a.p, a.dim, a.seed)?;
            io::save_graph_json(&a.out, &g)?;
            println!("wrote {} nodes, {} edges to {}", g.n(), g.num_edges(), a.out.display());
        }
        "triangles" => {
            let ds = triangle_dataset(a.graphs, a.n, a.seed)?;
            io::save_dataset_json(&a.out, &ds)?;
            println!("wrote {} graphs to {}", ds.len(), a.out.display());
        }
        other => bail!("unknown synth kind {:?} (sbm, er, triangles)", other),
    }
    Ok(())
}

fn partition(a: PartitionArgs, coarse: bool) -> Result<()> {
    let g = a.input.graph()?;
    let c = &a.common;
    let p = partition_at_least_components(&g, c.ratio, c.method, c.seed)?;
    let file = io::PartitionFile {
        partition: p.clone(),
        method: c.method,
        seed: c.seed,
    };
    io::save_partition(&a.out_dir.join("partition.txt"), &file)?;
    if coarse {
        let task = match g.labels() {
            Labels::Classes { .. } => CoarseTask::Classification,
            Labels::Targets(_) => CoarseTask::Regression,
            Labels::None => CoarseTask::None,
        };
        let gc = build_coarsened_graph(&g, &p, task)?;
        io::save_coarse_json(&a.out_dir.join("coarse.json"), &gc)?;
    }
    println!("k={} n={} method={} seed={}", p.k(), p.n(), c.method, c.seed);
    Ok(())
}

fn augment(a: AugmentArgs) -> Result<()> {
    let g = a.input.graph()?;
    let views = views_for(&g, &a.common, a.partition.as_deref())?;
    io::save_subgraph_dump(&a.out_dir.join("subgraphs.json"), &views.subgraphs)?;
    println!(
        "k={} augment={} phi_max={}",
        views.subgraphs.len(),
        views.subgraphs.augmentation().as_str(),
        views.subgraphs.phi_max()
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let spec = a.train.spec(&a.common)?;
    let trained = match a.input.load()? {
        Loaded::Graph(g) => {
            let views = views_for(&g, &a.common, a.partition.as_deref())?;
            train_node_task(&g, &views, &spec)?
        }
        Loaded::Dataset(ds) => {
            let inputs = prepare_graph_task(&ds, &spec, spec.train.seed)?;
            train_graph_task(&ds, &inputs, &spec)?
        }
    };
    io::save_checkpoint(&a.out_dir.join("checkpoint.json"), &trained.params)?;
    io::write_text(&a.out_dir.join("losses.json"), &serde_json::to_string(&trained.losses)?)?;
    println!(
        "trained {} epochs, final loss {:.6}",
        trained.losses.len(),
        trained.losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn report_metric(pred: &cgnn_core::Matrix, labels: &Labels, splits: &[Split]) -> Result<()> {
    if labels.is_none() {
        return Ok(());
    }
    let mask = |s: Split| -> Vec<bool> { splits.iter().map(|&x| x == s).collect() };
    if !mask(Split::Train).contains(&true) {
        return Ok(());
    }
    let sigma = train_sigma(labels, &mask(Split::Train))?;
    for split in [Split::Val, Split::Test] {
        if mask(split).contains(&true) {
            println!("{} metric: {:.6}", split, evaluate(pred, labels, &mask(split), sigma.as_deref())?);
        }
    }
    Ok(())
}

fn infer(a: InferArgs) -> Result<()> {
    let params = io::load_checkpoint(&a.checkpoint).context("a trained checkpoint is required")?;
    let mode = a.degree_mode.unwrap_or_default();
    match a.input.load()? {
        Loaded::Graph(g) => {
            let pred = match a.mode {
                BenchMode::Full => infer_full(&g, &params)?,
                BenchMode::Subgraphs => infer_subgraphs(&views_for(&g, &a.common, a.partition.as_deref())?.subgraphs, &params, mode)?,
                BenchMode::Coarse => infer_coarse(&views_for(&g, &a.common, a.partition.as_deref())?.coarse, &params)?,
                BenchMode::SingleNode => {
                    let node = a.node.context("--node is required in single_node mode")?;
                    let views = views_for(&g, &a.common, a.partition.as_deref())?;
                    let row = infer_single_node(&views.subgraphs, &params, mode, node, &mut OpTally::default())?;
                    cgnn_core::Matrix::from_vec(1, row.len(), row)?
                }
            };
            io::save_predictions_csv(&a.out, &pred)?;
            if matches!(a.mode, BenchMode::Full | BenchMode::Subgraphs) {
                report_metric(&pred, g.labels(), g.splits())?;
            }
            println!("wrote {} prediction rows to {}", pred.rows(), a.out.display());
        }
        Loaded::Dataset(ds) => {
            let mut t = TrainConfig::for_task(a.common.task);
            t.seed = a.common.seed;
            t.degree_mode = mode;
            let c = &a.common;
            let spec = ExperimentSpec::new(c.task, c.setup, c.ratio, c.augment, c.method, t, 1)?;
            let inputs = prepare_graph_task(&ds, &spec, c.seed)?;
            let pred = infer_graph_task(&inputs, &spec, &params)?;
            io::save_predictions_csv(&a.out, &pred)?;
            report_metric(&pred, ds.targets(), ds.splits())?;
            println!("wrote {} prediction rows to {}", pred.rows(), a.out.display());
        }
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let params = io::load_checkpoint(&a.checkpoint).context("a trained checkpoint is required")?;
    let spec = BenchSpec {
        scenario: a.scenario.clone(),
        r: a.common.ratio,
        augment: a.common.augment.as_str().to_string(),
        repetitions: a.repetitions,
        samples: a.samples,
        seed: a.common.seed,
        degree_mode: a.degree_mode.unwrap_or_default(),
    };
    let report = match a.input.load()? {
        Loaded::Graph(g) => {
            let views = views_for(&g, &a.common, a.partition.as_deref())?;
            bench_inference(&g, &views, &params, &a.modes, &spec)?
        }
        Loaded::Dataset(ds) => {
            let mut t = TrainConfig::for_task(a.common.task);
            t.degree_mode = spec.degree_mode;
            let c = &a.common;
            let es = ExperimentSpec::new(c.task, c.setup, c.ratio, c.augment, c.method, t, 1)?;
            let inputs = prepare_graph_task(&ds, &es, c.seed)?;
            let modes: Vec<BenchMode> = a.modes.iter().copied().filter(|&m| m != BenchMode::SingleNode).collect();
            bench_graph_inference(ds.graphs(), &inputs, &params, &modes, &spec)?
        }
    };
    io::write_text(&a.out_dir.join("bench.csv"), &report.to_csv()?)?;
    io::write_text(&a.out_dir.join("bench.json"), &report.to_json()?)?;
    for r in &report.rows {
        println!(
            "{:<12} latency_mean={:.3e}s median={:.3e}s ops={} peak_bytes={}",
            r.mode.as_str(),
            r.latency_mean_s,
            r.latency_median_s,
            r.opcount,
            r.peak_bytes
        );
    }
    Ok(())
}

fn feasibility(a: FeasibilityArgs) -> Result<()> {
    let d = a.d as f64;
    let mut printed = false;
    if let Some(r) = a.r {
        println!("{:.3}", phi_max_bound(d, r)?);
        printed = true;
    }
    if let Some(phi) = a.phi.filter(|_| a.grid_out.is_none()) {
        println!("ratio_bound {:.6}", ratio_bound(d, phi as f64)?);
        printed = true;
    }
    if let Some(n) = a.n {
        if !a.sizes.is_empty() {
            println!("phi_second_bound {:.6}", phi_second_bound(n, a.d, &a.sizes)?);
            let c = lemma2_check(n, a.d, &a.sizes, a.phi.unwrap_or(0))?;
            println!("lemma2 lhs={} rhs={} holds={}", c.lhs, c.rhs, c.holds);
            printed = true;
        }
        if let Some(alpha) = a.alpha {
            println!("T {:.6}", time_diff_t(n as f64, d, alpha, a.phi.unwrap_or(0) as f64)?);
            printed = true;
        }
    }
    if let Some(out) = &a.grid_out {
        if a.grid_n.is_empty() || a.grid_r.is_empty() {
            bail!("--grid-out needs --grid-n and --grid-r");
        }
        let pts = feasibility_region(&a.grid_n, &a.grid_r, a.d, a.phi.unwrap_or(0))?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n", "r", "feasible"])?;
        for p in &pts {
            w.write_record([p.n.to_string(), p.r.to_string(), p.feasible.to_string()])?;
        }
        io::write_text(out, &String::from_utf8(w.into_inner()?)?)?;
        println!("wrote {} grid points to {}", pts.len(), out.display());
        printed = true;
    }
    if !printed {
        bail!("nothing to compute: pass --r, --phi, --n with --sizes or --alpha, or --grid-out");
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let spec = a.train.spec(&a.common)?;
    let loaded = a.input.load()?;
    let data = match &loaded {
        Loaded::Graph(g) => TaskData::Nodes(g),
        Loaded::Dataset(ds) => TaskData::Graphs(ds),
    };
    let r = run_experiment(data, &spec)?;
    io::write_text(&a.out_dir.join("report.json"), &r.to_json()?)?;
    io::write_text(&a.out_dir.join("report.csv"), &r.to_csv()?)?;
    println!(
        "{} over {} kept of {} trials: {:.4} ± {:.4}",
        r.metric,
        r.kept.len(),
        r.trials.len(),
        r.mean,
        r.std
    );
    Ok(())
}

fn main() -> std::process::ExitCode {
    match run(Cli::parse().cmd) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            std::process::ExitCode::FAILURE
        }
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Synth(a) => synth(a),
        Cmd::Partition(a) => partition(a, false),
        Cmd::Coarsen(a) => partition(a, true),
        Cmd::Augment(a) => augment(a),
        Cmd::Train(a) => train(a),
        Cmd::Infer(a) => infer(a),
        Cmd::Bench(a) => bench(a),
        Cmd::Feasibility(a) => feasibility(a),
        Cmd::Report(a) => report(a),
    }
}

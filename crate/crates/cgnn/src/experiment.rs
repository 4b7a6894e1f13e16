//! Seeded multi-trial experiments with timing, driven by flat TOML configs.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use cgnn_core::gnn::{inference_peak_bytes, LossKind};
use cgnn_core::pipelines::{
    aggregate, evaluate, infer_graph_task, infer_subgraphs, prepare_graph_task, prepare_views, train_graph_task,
    train_node_task, train_sigma, trial_seed, ExperimentSpec, Setup, Task, TaskData, TrainConfig, TrialResult,
};
use cgnn_core::{Augmentation, CoarsenMethod, DegreeMode, Labels, PropagationOperator, Split};
use serde::{Deserialize, Serialize};

/// Flat key-value form of an [`ExperimentSpec`]; omitted keys take defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: String,
    pub setup: String,
    pub ratio: f64,
    pub augment: Option<String>,
    pub method: Option<String>,
    pub epochs: Option<usize>,
    pub layers: Option<usize>,
    pub hidden: Option<usize>,
    pub lr: Option<f64>,
    pub weight_decay: Option<f64>,
    pub loss: Option<String>,
    pub seed: Option<u64>,
    pub degree_mode: Option<String>,
    pub decoupled_decay: Option<bool>,
    pub per_subgraph_steps: Option<bool>,
    pub gc_epoch_fraction: Option<f64>,
    pub trials: Option<usize>,
    pub keep: Option<usize>,
}

impl ExperimentConfig {
    pub fn to_spec(&self) -> Result<ExperimentSpec> {
        let task: Task = self.task.parse()?;
        let mut t = TrainConfig::for_task(task);
        t.epochs = self.epochs.unwrap_or(t.epochs);
        t.num_layers = self.layers.unwrap_or(t.num_layers);
        t.hidden = self.hidden.unwrap_or(t.hidden);
        t.lr = self.lr.unwrap_or(t.lr);
        t.weight_decay = self.weight_decay.unwrap_or(t.weight_decay);
        t.loss = self.loss.as_deref().map(str::parse::<LossKind>).transpose()?;
        t.seed = self.seed.unwrap_or(t.seed);
        if let Some(m) = &self.degree_mode {
            t.degree_mode = m.parse::<DegreeMode>()?;
        }
        t.decoupled_decay = self.decoupled_decay.unwrap_or(t.decoupled_decay);
        t.per_subgraph_steps = self.per_subgraph_steps.unwrap_or(t.per_subgraph_steps);
        t.gc_epoch_fraction = self.gc_epoch_fraction.unwrap_or(t.gc_epoch_fraction);
        let mut spec = ExperimentSpec::new(
            task,
            self.setup.parse::<Setup>()?,
            self.ratio,
            self.augment.as_deref().unwrap_or("none").parse::<Augmentation>()?,
            self.method.as_deref().unwrap_or("heavy_edge").parse::<CoarsenMethod>()?,
            t,
            self.trials.unwrap_or(20),
        )?;
        if let Some(k) = self.keep {
            spec.keep = k;
            spec.validate()?;
        }
        Ok(spec)
    }

    pub fn from_spec(s: &ExperimentSpec) -> Self {
        Self {
            task: s.task.to_string(),
            setup: s.setup.to_string(),
            ratio: s.ratio,
            augment: Some(s.augmentation.as_str().to_string()),
            method: Some(s.method.to_string()),
            epochs: Some(s.train.epochs),
            layers: Some(s.train.num_layers),
            hidden: Some(s.train.hidden),
            lr: Some(s.train.lr),
            weight_decay: Some(s.train.weight_decay),
            loss: Some(s.train.loss_for(s.task).to_string()),
            seed: Some(s.train.seed),
            degree_mode: Some(s.train.degree_mode.to_string()),
            decoupled_decay: Some(s.train.decoupled_decay),
            per_subgraph_steps: Some(s.train.per_subgraph_steps),
            gc_epoch_fraction: Some(s.train.gc_epoch_fraction),
            trials: Some(s.trials),
            keep: Some(s.keep),
        }
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let c: ExperimentConfig = toml::from_str(text)?;
    c.to_spec()
}

pub fn load_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub val_metric: f64,
    pub test_metric: f64,
    pub final_loss: f64,
    pub train_seconds: f64,
    pub infer_seconds: f64,
    /// Analytic peak live bytes of the inference view.
    pub peak_bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    /// `accuracy` or `normalized_mae`.
    pub metric: String,
    pub trials: Vec<TrialRow>,
    /// Trial indices kept for the aggregate, best first.
    pub kept: Vec<usize>,
    pub mean: f64,
    pub std: f64,
    pub train_seconds_total: f64,
    pub infer_seconds_mean: f64,
    pub peak_bytes_max: u64,
}

impl RunReport {
    /// Metrics only, without wall-clock fields; equal across reruns.
    pub fn metrics(&self) -> Vec<TrialResult> {
        self.trials
            .iter()
            .map(|t| TrialResult {
                seed: t.seed,
                val_metric: t.val_metric,
                test_metric: t.test_metric,
                final_loss: t.final_loss,
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per trial, then an `aggregate` row.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "row", "seed", "task", "setup", "ratio", "augment", "metric", "val_metric", "test_metric", "std",
            "final_loss", "train_seconds", "infer_seconds", "peak_bytes",
        ])?;
        let c = &self.config;
        let common = |w: &mut csv::Writer<Vec<u8>>, row: &str, seed: String, vals: [String; 7]| -> Result<()> {
            let mut rec = vec![
                row.to_string(),
                seed,
                c.task.clone(),
                c.setup.clone(),
                c.ratio.to_string(),
                c.augment.clone().unwrap_or_default(),
                self.metric.clone(),
            ];
            rec.extend(vals);
            w.write_record(&rec)?;
            Ok(())
        };
        for t in &self.trials {
            common(
                &mut w,
                &t.trial.to_string(),
                t.seed.to_string(),
                [
                    t.val_metric.to_string(),
                    t.test_metric.to_string(),
                    String::new(),
                    t.final_loss.to_string(),
                    t.train_seconds.to_string(),
                    t.infer_seconds.to_string(),
                    t.peak_bytes.to_string(),
                ],
            )?;
        }
        common(
            &mut w,
            "aggregate",
            String::new(),
            [
                String::new(),
                self.mean.to_string(),
                self.std.to_string(),
                String::new(),
                self.train_seconds_total.to_string(),
                self.infer_seconds_mean.to_string(),
                self.peak_bytes_max.to_string(),
            ],
        )?;
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

fn mask_of(splits: &[Split], which: Split) -> Vec<bool> {
    splits.iter().map(|&s| s == which).collect()
}

/// Runs one trial, timing training and inference separately.
pub fn timed_trial(data: TaskData<'_>, spec: &ExperimentSpec, t: usize) -> Result<TrialRow> {
    let seed = trial_seed(spec, t);
    let mut spec = spec.clone();
    spec.train.seed = seed;
    let (trained, train_seconds, pred, infer_seconds, peak_bytes, labels, splits) = match data {
        TaskData::Nodes(g) => {
            if spec.task.is_graph_level() {
                bail!("a single graph was given for a {} task", spec.task);
            }
            let views = prepare_views(g, spec.ratio, spec.method, spec.augmentation, seed)?;
            let start = Instant::now();
            let trained = train_node_task(g, &views, &spec)?;
            let train_seconds = start.elapsed().as_secs_f64();
            let start = Instant::now();
            let pred = infer_subgraphs(&views.subgraphs, &trained.params, spec.train.degree_mode)?;
            let infer_seconds = start.elapsed().as_secs_f64();
            let mut peak = 0;
            for s in views.subgraphs.subgraphs() {
                let op = PropagationOperator::for_subgraph(s, spec.train.degree_mode)?;
                peak = peak.max(inference_peak_bytes(&op, &trained.params));
            }
            (trained, train_seconds, pred, infer_seconds, peak, g.labels().clone(), g.splits().to_vec())
        }
        TaskData::Graphs(ds) => {
            if !spec.task.is_graph_level() {
                bail!("a graph dataset was given for a {} task", spec.task);
            }
            let inputs = prepare_graph_task(ds, &spec, seed)?;
            let start = Instant::now();
            let trained = train_graph_task(ds, &inputs, &spec)?;
            let train_seconds = start.elapsed().as_secs_f64();
            let start = Instant::now();
            let pred = infer_graph_task(&inputs, &spec, &trained.params)?;
            let infer_seconds = start.elapsed().as_secs_f64();
            let samples = if spec.setup == Setup::GcToGcInfer { &inputs.coarse } else { &inputs.subgraphs };
            let peak = samples
                .iter()
                .flat_map(|s| s.pieces.iter())
                .map(|p| inference_peak_bytes(&p.op, &trained.params))
                .max()
                .unwrap_or(0);
            (trained, train_seconds, pred, infer_seconds, peak, ds.targets().clone(), ds.splits().to_vec())
        }
    };
    let sigma = train_sigma(&labels, &mask_of(&splits, Split::Train))?;
    Ok(TrialRow {
        trial: t,
        seed,
        val_metric: evaluate(&pred, &labels, &mask_of(&splits, Split::Val), sigma.as_deref())?,
        test_metric: evaluate(&pred, &labels, &mask_of(&splits, Split::Test), sigma.as_deref())?,
        final_loss: trained.losses.last().copied().unwrap_or(f64::NAN),
        train_seconds,
        infer_seconds,
        peak_bytes,
    })
}

/// Runs `spec.trials` seeded trials on one thread and keeps the best
/// `spec.keep` by validation metric.
pub fn run_experiment(data: TaskData<'_>, spec: &ExperimentSpec) -> Result<RunReport> {
    spec.validate()?;
    let trials = (0..spec.trials).map(|t| timed_trial(data, spec, t)).collect::<Result<Vec<_>>>()?;
    let results: Vec<TrialResult> = trials
        .iter()
        .map(|t| TrialResult {
            seed: t.seed,
            val_metric: t.val_metric,
            test_metric: t.test_metric,
            final_loss: t.final_loss,
        })
        .collect();
    let agg = aggregate(&results, spec.keep, spec.task)?;
    if !agg.mean.is_finite() || !agg.std.is_finite() {
        bail!("aggregate metric is not finite");
    }
    let metric = match data {
        TaskData::Nodes(g) => g.labels(),
        TaskData::Graphs(ds) => ds.targets(),
    };
    Ok(RunReport {
        config: ExperimentConfig::from_spec(spec),
        metric: if matches!(metric, Labels::Classes { .. }) { "accuracy" } else { "normalized_mae" }.to_string(),
        train_seconds_total: trials.iter().map(|t| t.train_seconds).sum(),
        infer_seconds_mean: trials.iter().map(|t| t.infer_seconds).sum::<f64>() / trials.len() as f64,
        peak_bytes_max: trials.iter().map(|t| t.peak_bytes).max().unwrap_or(0),
        trials,
        kept: agg.kept,
        mean: agg.mean,
        std: agg.std,
    })
}

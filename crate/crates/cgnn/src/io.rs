//! On-disk formats: edge lists with CSV side files, JSON graphs and datasets,
//! partition files, subgraph dumps and parameter checkpoints.
//!
//! Node ids are 0-based everywhere; nothing is remapped.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use cgnn_core::graph::{Graph, GraphBuilder, GraphDataset, Labels, Split};
use cgnn_core::{CoarsenMethod, CoarsenedGraph, GcnParams, Matrix, PartitionMatrix, SubgraphSet};
use serde::{Deserialize, Serialize};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// `u v [w]` per line, whitespace or comma separated; `#` starts a comment.
pub fn parse_edge_list(text: &str) -> Result<Vec<(usize, usize, f64)>> {
    content_lines(text)
        .map(|(no, line)| {
            let f: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
            if !(2..=3).contains(&f.len()) {
                bail!("line {}: expected `u v [w]`, got {:?}", no, line);
            }
            let u = f[0].parse().with_context(|| format!("line {}: bad node id", no))?;
            let v = f[1].parse().with_context(|| format!("line {}: bad node id", no))?;
            let w = match f.get(2) {
                Some(w) => w.parse().with_context(|| format!("line {}: bad weight", no))?,
                None => 1.0,
            };
            Ok((u, v, w))
        })
        .collect()
}

/// Rows of comma-separated floats.
pub fn parse_matrix_csv(text: &str) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("row {}: not a number", i + 1))?;
        rows.push(row);
    }
    Ok(Matrix::from_rows(&rows)?)
}

/// One integer class per line gives class labels; anything else is read as
/// a regression target matrix.
pub fn parse_labels(text: &str) -> Result<Labels> {
    let ints: Option<Vec<usize>> = content_lines(text).map(|(_, l)| l.parse().ok()).collect();
    match ints {
        Some(ids) => Ok(Labels::classes(ids)),
        None => Ok(Labels::Targets(parse_matrix_csv(text)?)),
    }
}

pub fn parse_splits(text: &str) -> Result<Vec<Split>> {
    content_lines(text)
        .map(|(no, l)| l.parse::<Split>().map_err(|e| anyhow!("line {}: {}", no, e)))
        .collect()
}

/// Edge list plus optional feature, label and split files.
pub fn load_edge_list_graph(
    n: Option<usize>,
    edges: &Path,
    features: Option<&Path>,
    labels: Option<&Path>,
    splits: Option<&Path>,
) -> Result<Graph> {
    let edges = parse_edge_list(&read(edges)?)?;
    let x = features.map(|p| read(p).and_then(|t| parse_matrix_csv(&t))).transpose()?;
    let n = match (n, &x) {
        (Some(n), _) => n,
        (None, Some(x)) => x.rows(),
        (None, None) => edges.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0),
    };
    let mut b = GraphBuilder::new(n);
    for &(u, v, w) in &edges {
        b.edge(u, v, w);
    }
    if let Some(x) = x {
        b.features(x);
    }
    if let Some(p) = labels {
        b.labels(parse_labels(&read(p)?)?);
    }
    if let Some(p) = splits {
        b.splits(parse_splits(&read(p)?)?);
    }
    Ok(b.build()?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelsJson {
    Classes(Vec<usize>),
    Targets(Vec<Vec<f64>>),
}

impl LabelsJson {
    fn to_labels(&self) -> Result<Labels> {
        Ok(match self {
            LabelsJson::Classes(ids) => Labels::classes(ids.clone()),
            LabelsJson::Targets(rows) => Labels::Targets(Matrix::from_rows(rows)?),
        })
    }

    fn from_labels(l: &Labels) -> Option<Self> {
        match l {
            Labels::None => None,
            Labels::Classes { ids, .. } => Some(LabelsJson::Classes(ids.clone())),
            Labels::Targets(m) => Some(LabelsJson::Targets(rows_of(m))),
        }
    }
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// `{"n", "edges": [[u, v, w?]…], "x", "y", "split"}`; each undirected edge
/// once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<LabelsJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Vec<String>>,
}

impl GraphJson {
    pub fn from_graph(g: &Graph) -> Self {
        let split = g.splits().iter().any(|&s| s != Split::None).then(|| g.splits().iter().map(|s| s.to_string()).collect());
        Self {
            n: g.n(),
            edges: g.edges().map(|(u, v, w)| vec![u as f64, v as f64, w]).collect(),
            x: (g.feature_dim() > 0).then(|| rows_of(g.features())),
            y: LabelsJson::from_labels(g.labels()),
            split,
        }
    }

    pub fn to_graph(&self) -> Result<Graph> {
        let mut b = GraphBuilder::new(self.n);
        for (i, e) in self.edges.iter().enumerate() {
            if !(2..=3).contains(&e.len()) {
                bail!("edge {}: expected [u, v] or [u, v, w]", i);
            }
            let id = |f: f64| -> Result<usize> {
                if f < 0.0 || f.fract() != 0.0 {
                    bail!("edge {}: node id {} is not a non-negative integer", i, f);
                }
                Ok(f as usize)
            };
            b.edge(id(e[0])?, id(e[1])?, e.get(2).copied().unwrap_or(1.0));
        }
        if let Some(x) = &self.x {
            b.features(Matrix::from_rows(x)?);
        }
        if let Some(y) = &self.y {
            b.labels(y.to_labels()?);
        }
        if let Some(s) = &self.split {
            b.splits(s.iter().map(|s| s.parse::<Split>()).collect::<std::result::Result<_, _>>()?);
        }
        Ok(b.build()?)
    }
}

pub fn load_graph_json(path: &Path) -> Result<Graph> {
    let j: GraphJson = serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    j.to_graph().with_context(|| format!("building graph from {}", path.display()))
}

pub fn save_graph_json(path: &Path, g: &Graph) -> Result<()> {
    write(path, &serde_json::to_string(&GraphJson::from_graph(g))?)
}

/// `{"graphs": [GraphJson…], "y", "split"}` with one label and split per graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetJson {
    pub graphs: Vec<GraphJson>,
    pub y: LabelsJson,
    pub split: Vec<String>,
}

pub fn load_dataset_json(path: &Path) -> Result<GraphDataset> {
    let j: DatasetJson = serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let graphs = j.graphs.iter().map(GraphJson::to_graph).collect::<Result<Vec<_>>>()?;
    let splits = j.split.iter().map(|s| s.parse::<Split>()).collect::<std::result::Result<_, _>>()?;
    Ok(GraphDataset::new(graphs, j.y.to_labels()?, splits)?)
}

pub fn save_dataset_json(path: &Path, ds: &GraphDataset) -> Result<()> {
    let j = DatasetJson {
        graphs: ds.graphs().iter().map(GraphJson::from_graph).collect(),
        y: LabelsJson::from_labels(ds.targets()).ok_or_else(|| anyhow!("dataset has no targets"))?,
        split: ds.splits().iter().map(|s| s.to_string()).collect(),
    };
    write(path, &serde_json::to_string(&j)?)
}

/// A partition and how it was produced.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionFile {
    pub partition: PartitionMatrix,
    pub method: CoarsenMethod,
    pub seed: u64,
}

/// Header line `k n method seed`, then one cluster id per node per line.
pub fn format_partition(p: &PartitionFile) -> String {
    let mut s = format!("{} {} {} {}\n", p.partition.k(), p.partition.n(), p.method, p.seed);
    for &c in p.partition.assign() {
        s.push_str(&c.to_string());
        s.push('\n');
    }
    s
}

pub fn parse_partition(text: &str) -> Result<PartitionFile> {
    let mut lines = content_lines(text);
    let (_, header) = lines.next().ok_or_else(|| anyhow!("empty partition file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    let [k, n, method, seed] = h[..] else {
        bail!("partition header must be `k n method seed`, got {:?}", header);
    };
    let (k, n): (usize, usize) = (k.parse()?, n.parse()?);
    let assign = lines
        .map(|(no, l)| l.parse::<usize>().with_context(|| format!("line {}: bad cluster id", no)))
        .collect::<Result<Vec<_>>>()?;
    if assign.len() != n {
        bail!("header declares {} nodes but {} ids follow", n, assign.len());
    }
    let partition = PartitionMatrix::from_assignment(assign)?;
    if partition.k() != k {
        bail!("header declares {} clusters but ids use {}", k, partition.k());
    }
    Ok(PartitionFile {
        partition,
        method: method.parse()?,
        seed: seed.parse()?,
    })
}

pub fn load_partition(path: &Path) -> Result<PartitionFile> {
    parse_partition(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

pub fn save_partition(path: &Path, p: &PartitionFile) -> Result<()> {
    write(path, &format_partition(p))
}

/// The coarsened graph with its degrees; `y` is `null` for clusters without
/// training nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoarseJson {
    pub k: usize,
    pub edges: Vec<Vec<f64>>,
    pub degrees: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<Option<usize>>>,
}

pub fn save_coarse_json(path: &Path, gc: &CoarsenedGraph) -> Result<()> {
    let j = CoarseJson {
        k: gc.k(),
        edges: gc
            .adjacency()
            .triplets()
            .filter(|&(u, v, _)| u <= v)
            .map(|(u, v, w)| vec![u as f64, v as f64, w])
            .collect(),
        degrees: gc.degrees().to_vec(),
        x: rows_of(gc.features()),
        y: gc.labels().map(|l| l.ids.clone()),
    };
    write(path, &serde_json::to_string(&j)?)
}

/// One subgraph of a dump: `global_ids` are node ids, or cluster ids for
/// cluster nodes; `edges` use local indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgraphJson {
    pub cluster: usize,
    pub global_ids: Vec<usize>,
    pub provenance: Vec<String>,
    pub edges: Vec<Vec<f64>>,
    pub mask: Vec<bool>,
}

pub fn subgraph_dump(s: &SubgraphSet) -> Vec<SubgraphJson> {
    s.subgraphs()
        .iter()
        .map(|sub| SubgraphJson {
            cluster: sub.cluster(),
            global_ids: sub.global_ids().to_vec(),
            provenance: sub.provenance().iter().map(|p| p.as_str().to_string()).collect(),
            edges: sub
                .adjacency()
                .triplets()
                .filter(|&(u, v, _)| u < v)
                .map(|(u, v, w)| vec![u as f64, v as f64, w])
                .collect(),
            mask: sub.mask().to_vec(),
        })
        .collect()
}

pub fn save_subgraph_dump(path: &Path, s: &SubgraphSet) -> Result<()> {
    write(path, &serde_json::to_string(&subgraph_dump(s))?)
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// `{version, layers, dims, seed, weights}`; `weights` holds each layer matrix
/// and then the head, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub layers: usize,
    pub dims: Vec<usize>,
    pub seed: u64,
    pub weights: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn from_params(p: &GcnParams) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            layers: p.num_layers(),
            dims: p.dims(),
            seed: p.seed(),
            weights: p.matrices().map(|m| m.as_slice().to_vec()).collect(),
        }
    }

    pub fn to_params(&self) -> Result<GcnParams> {
        if self.version != CHECKPOINT_VERSION {
            bail!("unsupported checkpoint version {}", self.version);
        }
        if self.dims.len() != self.layers + 2 || self.weights.len() != self.layers + 1 {
            bail!("checkpoint declares {} layers but has {} dims and {} weight blocks", self.layers, self.dims.len(), self.weights.len());
        }
        // dims = [in, h1 … hL, out]
        let mut mats = Vec::with_capacity(self.weights.len());
        for (i, w) in self.weights.iter().enumerate() {
            mats.push(Matrix::from_vec(self.dims[i], self.dims[i + 1], w.clone())?);
        }
        let head = mats.pop().expect("at least one block");
        Ok(GcnParams::from_parts(mats, head, self.seed)?)
    }
}

pub fn save_checkpoint(path: &Path, p: &GcnParams) -> Result<()> {
    write(path, &serde_json::to_string(&Checkpoint::from_params(p))?)
}

pub fn load_checkpoint(path: &Path) -> Result<GcnParams> {
    let c: Checkpoint = serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    c.to_params()
}

/// Prediction rows as CSV, one line per node or graph.
pub fn save_predictions_csv(path: &Path, z: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for i in 0..z.rows() {
        w.write_record(z.row(i).iter().map(|v| v.to_string()))?;
    }
    write(path, std::str::from_utf8(&w.into_inner()?)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write(path, text)
}

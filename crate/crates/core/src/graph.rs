//! Cosine-similarity flow graphs and their one-/two-hop operators.

use std::io::{Read, Write};

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Edge count convention used by [`FlowGraph::edge_count`] and [`GraphStats`].
pub const EDGE_CONVENTION: &str = "undirected edges counted once; self-loops excluded";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphOptions {
    /// Minimum cosine similarity for an edge.
    pub threshold: f64,
    /// Put ones on the diagonal of `A`.
    pub self_loops: bool,
    /// Zero the diagonal of `A²` (closed two-walks `i → j → i`).
    pub mask_two_hop_diagonal: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            threshold: 0.9,
            self_loops: false,
            mask_two_hop_diagonal: false,
        }
    }
}

impl GraphOptions {
    pub fn with_threshold(threshold: f64) -> Self {
        Self {
            threshold,
            ..Self::default()
        }
    }
}

/// `x·y / (‖x‖‖y‖)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "cosine similarity",
            expected: x.len(),
            got: y.len(),
        });
    }
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::Degenerate("cosine similarity of a zero-norm vector".into()));
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok((dot / (nx * ny)).clamp(-1.0, 1.0))
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Node features, binary labels (1 = attack) and a symmetric adjacency
/// matrix for one data split.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowGraph {
    features: DMatrix<f64>,
    labels: Vec<u8>,
    adjacency: DMatrix<u32>,
    node_ids: Vec<String>,
}

impl FlowGraph {
    /// Assembles a graph from parts, checking shapes, symmetry, binary labels
    /// and finite features.
    pub fn from_parts(
        features: DMatrix<f64>,
        labels: Vec<u8>,
        node_ids: Vec<String>,
        adjacency: DMatrix<u32>,
    ) -> Result<Self> {
        let n = features.nrows();
        check_node_arrays(&features, &labels, &node_ids)?;
        if adjacency.nrows() != n || adjacency.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "adjacency vs node count",
                expected: n,
                got: adjacency.nrows().max(adjacency.ncols()),
            });
        }
        if adjacency != adjacency.transpose() {
            return Err(Error::InvalidArgument("adjacency matrix is not symmetric".into()));
        }
        Ok(Self {
            features,
            labels,
            adjacency,
            node_ids,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn adjacency(&self) -> &DMatrix<u32> {
        &self.adjacency
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn feature_row(&self, i: usize) -> Vec<f64> {
        self.features.row(i).iter().copied().collect()
    }

    /// Number of undirected edges, self-loops excluded.
    pub fn edge_count(&self) -> usize {
        let n = self.n_nodes();
        (0..n)
            .map(|i| (i + 1..n).filter(|&j| self.adjacency[(i, j)] != 0).count())
            .sum()
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            nodes: self.n_nodes(),
            edges: self.edge_count(),
            edge_convention: EDGE_CONVENTION.to_string(),
        }
    }

    /// Same nodes with every edge removed.
    pub fn edgeless(&self) -> FlowGraph {
        FlowGraph {
            adjacency: DMatrix::zeros(self.n_nodes(), self.n_nodes()),
            ..self.clone()
        }
    }

    /// Relabels nodes so that new node `i` is old node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<FlowGraph> {
        let n = self.n_nodes();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument("not a permutation of the node set".into()));
        }
        Ok(FlowGraph {
            features: DMatrix::from_fn(n, self.n_features(), |i, k| self.features[(perm[i], k)]),
            labels: perm.iter().map(|&p| self.labels[p]).collect(),
            adjacency: DMatrix::from_fn(n, n, |i, j| self.adjacency[(perm[i], perm[j])]),
            node_ids: perm.iter().map(|&p| self.node_ids[p].clone()).collect(),
        })
    }
}

fn check_node_arrays(features: &DMatrix<f64>, labels: &[u8], node_ids: &[String]) -> Result<()> {
    let n = features.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("graph needs at least one node".into()));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            context: "labels vs node count",
            expected: n,
            got: labels.len(),
        });
    }
    if node_ids.len() != n {
        return Err(Error::DimensionMismatch {
            context: "node ids vs node count",
            expected: n,
            got: node_ids.len(),
        });
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidArgument(format!("label {bad} is not binary")));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("node features must be finite".into()));
    }
    Ok(())
}

/// Links every pair of distinct nodes whose cosine similarity is at least
/// `options.threshold`. Zero-norm rows get no edges (with a warning).
pub fn build_graph(
    features: DMatrix<f64>,
    labels: Vec<u8>,
    node_ids: Vec<String>,
    options: &GraphOptions,
) -> Result<FlowGraph> {
    check_node_arrays(&features, &labels, &node_ids)?;
    let t = options.threshold;
    if !(t > -1.0 && t <= 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {t} outside (-1, 1]")));
    }
    let n = features.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| features.row(i).iter().copied().collect()).collect();
    let degenerate: Vec<bool> = rows.iter().map(|r| norm(r) == 0.0).collect();
    for (i, _) in degenerate.iter().enumerate().filter(|(_, &d)| d) {
        warn!("node {} has an all-zero feature vector and receives no edges", node_ids[i]);
    }

    let upper: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if degenerate[i] {
                return Vec::new();
            }
            (i + 1..n)
                .filter(|&j| {
                    !degenerate[j]
                        && cosine_similarity(&rows[i], &rows[j]).is_ok_and(|s| s >= t)
                })
                .collect()
        })
        .collect();

    let mut adjacency = DMatrix::<u32>::zeros(n, n);
    for (i, neighbours) in upper.iter().enumerate() {
        for &j in neighbours {
            adjacency[(i, j)] = 1;
            adjacency[(j, i)] = 1;
        }
    }
    if options.self_loops {
        adjacency.fill_diagonal(1);
    }
    Ok(FlowGraph {
        features,
        labels,
        adjacency,
        node_ids,
    })
}

/// `A` and `A²` as exact integer matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct HopOperators {
    pub a1: DMatrix<u32>,
    pub a2: DMatrix<u32>,
}

impl HopOperators {
    pub fn a1_f64(&self) -> DMatrix<f64> {
        self.a1.map(f64::from)
    }

    pub fn a2_f64(&self) -> DMatrix<f64> {
        self.a2.map(f64::from)
    }
}

/// `a1 = A`, `a2 = A·A` with the diagonal (node degrees) kept.
pub fn hop_operators(graph: &FlowGraph) -> HopOperators {
    hop_operators_with(graph, &GraphOptions::default())
}

pub fn hop_operators_with(graph: &FlowGraph, options: &GraphOptions) -> HopOperators {
    let a1 = graph.adjacency.clone();
    let mut a2 = &a1 * &a1;
    if options.mask_two_hop_diagonal {
        a2.fill_diagonal(0);
    }
    HopOperators { a1, a2 }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub edge_convention: String,
}

/// Writes `node_id,f0,..,f{F-1},label` rows with a header.
pub fn write_nodes_csv<W: Write>(graph: &FlowGraph, writer: W) -> Result<()> {
    write_node_table(graph.node_ids(), graph.features(), graph.labels(), writer)
}

pub fn write_node_table<W: Write>(
    node_ids: &[String],
    features: &DMatrix<f64>,
    labels: &[u8],
    writer: W,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["node_id".to_string()];
    header.extend((0..features.ncols()).map(|k| format!("f{k}")));
    header.push("label".into());
    out.write_record(&header)?;
    for (i, id) in node_ids.iter().enumerate() {
        let mut record = vec![id.clone()];
        record.extend(features.row(i).iter().map(|v| v.to_string()));
        record.push(labels[i].to_string());
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}

/// Parsed `node_id,features…,label` table.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTable {
    pub node_ids: Vec<String>,
    pub features: DMatrix<f64>,
    pub labels: Vec<u8>,
}

pub fn read_node_table<R: Read>(reader: R) -> Result<NodeTable> {
    let mut input = csv::Reader::from_reader(reader);
    let width = input.headers()?.len();
    if width < 3 {
        return Err(Error::InvalidArgument(
            "node table needs node_id, at least one feature and label columns".into(),
        ));
    }
    let n_features = width - 2;
    let (mut node_ids, mut values, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    for (line, record) in input.records().enumerate() {
        let record = record?;
        node_ids.push(record[0].to_string());
        for k in 0..n_features {
            let v: f64 = record[k + 1].trim().parse().map_err(|_| {
                Error::InvalidArgument(format!("row {}: bad feature value {:?}", line + 1, &record[k + 1]))
            })?;
            values.push(v);
        }
        let label: u8 = record[width - 1].trim().parse().map_err(|_| {
            Error::InvalidArgument(format!("row {}: bad label {:?}", line + 1, &record[width - 1]))
        })?;
        labels.push(label);
    }
    Ok(NodeTable {
        features: DMatrix::from_row_slice(node_ids.len(), n_features, &values),
        node_ids,
        labels,
    })
}

/// Writes `source,target` rows, each undirected edge once with `source < target`
/// in node order.
pub fn write_edge_list<W: Write>(graph: &FlowGraph, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["source", "target"])?;
    let n = graph.n_nodes();
    for i in 0..n {
        for j in i + 1..n {
            if graph.adjacency[(i, j)] != 0 {
                out.write_record([&graph.node_ids[i], &graph.node_ids[j]])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Rebuilds a graph from a node table and an edge list written by
/// [`write_edge_list`].
pub fn read_graph<R1: Read, R2: Read>(nodes: R1, edges: R2) -> Result<FlowGraph> {
    let table = read_node_table(nodes)?;
    let index: std::collections::HashMap<&str, usize> = table
        .node_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let n = table.node_ids.len();
    let mut adjacency = DMatrix::<u32>::zeros(n, n);
    let mut input = csv::Reader::from_reader(edges);
    for record in input.records() {
        let record = record?;
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::InvalidArgument(format!("edge references unknown node {id:?}")))
        };
        let (i, j) = (lookup(&record[0])?, lookup(&record[1])?);
        adjacency[(i, j)] = 1;
        adjacency[(j, i)] = 1;
    }
    FlowGraph::from_parts(table.features, table.labels, table.node_ids, adjacency)
}

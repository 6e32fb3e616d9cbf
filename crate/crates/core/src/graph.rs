//! Static grid topology and the structures derived from it for the graph
//! layers: self-looped neighborhoods, encoded edge attributes, and the
//! symmetric normalized adjacency.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, Table};
use crate::tensor::Tensor;

pub const NODE_COLUMNS: [&str; 6] = [
    "name",
    "pv_potential",
    "onshore_wind_potential",
    "offshore_wind_potential",
    "longitude",
    "latitude",
];

pub const EDGE_COLUMNS: [&str; 6] = [
    "source",
    "target",
    "capacity_mw",
    "efficiency",
    "length_km",
    "carrier",
];

/// Number of continuous edge attributes preceding the carrier one-hot block.
pub const CONTINUOUS_EDGE_ATTRS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub name: String,
    pub pv_potential: f64,
    pub onshore_wind_potential: f64,
    pub offshore_wind_potential: f64,
    pub longitude: f64,
    pub latitude: f64,
}

impl NodeRecord {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.name.is_empty() {
            return Err("empty node name".into());
        }
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(format!("latitude {} outside [-90, 90]", self.latitude));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(format!("longitude {} outside [-180, 180]", self.longitude));
        }
        let potentials = [
            self.pv_potential,
            self.onshore_wind_potential,
            self.offshore_wind_potential,
        ];
        if potentials.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err("potentials must be finite and non-negative".into());
        }
        Ok(())
    }

    fn static_features(&self) -> [f64; 5] {
        [
            self.pv_potential,
            self.onshore_wind_potential,
            self.offshore_wind_potential,
            self.longitude,
            self.latitude,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub source: String,
    pub target: String,
    pub capacity_mw: f64,
    pub efficiency: f64,
    pub length_km: f64,
    pub carrier: String,
}

impl EdgeRecord {
    fn validate(&self) -> std::result::Result<(), String> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(format!("efficiency {} outside (0, 1]", self.efficiency));
        }
        if !(self.capacity_mw >= 0.0) || !self.capacity_mw.is_finite() {
            return Err(format!("capacity {} must be >= 0", self.capacity_mw));
        }
        if !(self.length_km >= 0.0) || !self.length_km.is_finite() {
            return Err(format!("length {} must be >= 0", self.length_km));
        }
        if self.source == self.target {
            return Err(format!("line from {} to itself", self.source));
        }
        Ok(())
    }
}

/// A validated grid. Each edge record is one physical (undirected) line.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerGraph {
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
    node_index: HashMap<String, usize>,
}

impl PowerGraph {
    pub fn new(nodes: Vec<NodeRecord>, edges: Vec<EdgeRecord>) -> Result<Self> {
        let load_err = |file: &str, row: usize, reason: String| Error::GraphLoad {
            file: file.into(),
            row,
            reason,
        };
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (row, node) in nodes.iter().enumerate() {
            node.validate().map_err(|r| load_err("nodes", row + 1, r))?;
            if node_index.insert(node.name.clone(), row).is_some() {
                return Err(load_err(
                    "nodes",
                    row + 1,
                    format!("duplicate node name {}", node.name),
                ));
            }
        }
        let mut seen = HashSet::new();
        for (row, edge) in edges.iter().enumerate() {
            edge.validate().map_err(|r| load_err("edges", row + 1, r))?;
            let s = *node_index.get(&edge.source).ok_or_else(|| {
                load_err("edges", row + 1, format!("unknown endpoint {}", edge.source))
            })?;
            let t = *node_index.get(&edge.target).ok_or_else(|| {
                load_err("edges", row + 1, format!("unknown endpoint {}", edge.target))
            })?;
            if !seen.insert((s.min(t), s.max(t))) {
                return Err(load_err(
                    "edges",
                    row + 1,
                    format!("duplicate line {}-{}", edge.source, edge.target),
                ));
            }
        }
        Ok(Self {
            nodes,
            edges,
            node_index,
        })
    }

    /// Loads `nodes.csv` and `edges.csv` style tables.
    pub fn read_csv(nodes_path: &Path, edges_path: &Path) -> Result<Self> {
        let nodes = read_nodes(nodes_path)?;
        let edges = read_edges(edges_path)?;
        Self::new(nodes, edges).map_err(|e| match e {
            Error::GraphLoad { file, row, reason } => Error::GraphLoad {
                file: if file == "nodes" {
                    nodes_path.display().to_string()
                } else {
                    edges_path.display().to_string()
                },
                row,
                reason,
            },
            other => other,
        })
    }

    pub fn write_csv(&self, nodes_path: &Path, edges_path: &Path) -> Result<()> {
        let mut w = io::create_writer(nodes_path)?;
        w.write_record(NODE_COLUMNS)
            .map_err(|e| Error::csv(nodes_path, e))?;
        for n in &self.nodes {
            let f = n.static_features();
            let mut rec = vec![n.name.clone()];
            rec.extend(f.iter().map(|v| io::fmt_f64(*v)));
            w.write_record(&rec).map_err(|e| Error::csv(nodes_path, e))?;
        }
        io::finish(w, nodes_path)?;

        let mut w = io::create_writer(edges_path)?;
        w.write_record(EDGE_COLUMNS)
            .map_err(|e| Error::csv(edges_path, e))?;
        for e in &self.edges {
            w.write_record([
                e.source.clone(),
                e.target.clone(),
                io::fmt_f64(e.capacity_mw),
                io::fmt_f64(e.efficiency),
                io::fmt_f64(e.length_km),
                e.carrier.clone(),
            ])
            .map_err(|err| Error::csv(edges_path, err))?;
        }
        io::finish(w, edges_path)
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_names(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.node_index.get(name).copied()
    }

    /// Both directions of every line as `(source, target, line)` triples.
    pub fn directed_edges(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(2 * self.edges.len());
        for (line, e) in self.edges.iter().enumerate() {
            let s = self.node_index[&e.source];
            let t = self.node_index[&e.target];
            out.push((s, t, line));
            out.push((t, s, line));
        }
        out
    }

    /// Sorted carrier vocabulary.
    pub fn carriers(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.edges.iter().map(|e| e.carrier.as_str()).collect();
        set.into_iter().map(str::to_owned).collect()
    }

    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        self.directed_edges()
            .into_iter()
            .filter(|&(_, t, _)| t == node)
            .map(|(s, _, _)| s)
            .collect()
    }

    /// Whether every node is reachable from node 0.
    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); n];
        for (s, t, _) in self.directed_edges() {
            adj[s].push(t);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Static node features (potentials, coordinates), each column
    /// standardized over nodes. Zero-variance columns encode as zeros.
    pub fn node_feature_matrix(&self) -> Tensor {
        let rows: Vec<[f64; 5]> = self.nodes.iter().map(|n| n.static_features()).collect();
        let mut data = vec![0.0; rows.len() * 5];
        for c in 0..5 {
            let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            let (mean, std) = mean_std(&col);
            for (r, v) in col.iter().enumerate() {
                data[r * 5 + c] = standardize(*v, mean, std);
            }
        }
        Tensor::new(vec![rows.len(), 5], data).expect("consistent shape")
    }
}

fn read_nodes(path: &Path) -> Result<Vec<NodeRecord>> {
    let table = Table::read(path)?;
    let cols = NODE_COLUMNS
        .iter()
        .map(|c| table.column(c))
        .collect::<Result<Vec<_>>>()?;
    (0..table.rows.len())
        .map(|r| {
            let num = |c: usize| -> Result<f64> {
                let v = table.number(r, cols[c])?;
                if v.is_nan() {
                    return Err(Error::GraphLoad {
                        file: table.file_name(),
                        row: r + 1,
                        reason: format!("missing {}", NODE_COLUMNS[c]),
                    });
                }
                Ok(v)
            };
            Ok(NodeRecord {
                name: table.rows[r][cols[0]].to_owned(),
                pv_potential: num(1)?,
                onshore_wind_potential: num(2)?,
                offshore_wind_potential: num(3)?,
                longitude: num(4)?,
                latitude: num(5)?,
            })
        })
        .collect()
}

fn read_edges(path: &Path) -> Result<Vec<EdgeRecord>> {
    let table = Table::read(path)?;
    let cols = EDGE_COLUMNS
        .iter()
        .map(|c| table.column(c))
        .collect::<Result<Vec<_>>>()?;
    (0..table.rows.len())
        .map(|r| {
            let num = |c: usize| -> Result<f64> {
                let v = table.number(r, cols[c])?;
                if v.is_nan() {
                    return Err(Error::GraphLoad {
                        file: table.file_name(),
                        row: r + 1,
                        reason: format!("missing {}", EDGE_COLUMNS[c]),
                    });
                }
                Ok(v)
            };
            Ok(EdgeRecord {
                source: table.rows[r][cols[0]].to_owned(),
                target: table.rows[r][cols[1]].to_owned(),
                capacity_mw: num(2)?,
                efficiency: num(3)?,
                length_km: num(4)?,
                carrier: table.rows[r][cols[5]].to_owned(),
            })
        })
        .collect()
}

/// Population mean and standard deviation.
fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn standardize(v: f64, mean: f64, std: f64) -> f64 {
    if std > 0.0 {
        (v - mean) / std
    } else {
        0.0
    }
}

/// Flattened `N(i) ∪ {i}` neighborhoods: one entry per directed edge
/// `source → target`, followed by one self-loop per node.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborhoodIndex {
    pub sources: Rc<[usize]>,
    /// Destination node of each entry; the softmax segment id.
    pub segment_of: Rc<[usize]>,
    /// Row of the encoded edge-attribute matrix for each entry.
    pub edge_attr_row: Rc<[usize]>,
    pub node_count: usize,
}

impl NeighborhoodIndex {
    pub fn build(graph: &PowerGraph) -> Self {
        let directed = graph.directed_edges();
        let n = graph.node_count();
        let mut sources: Vec<usize> = directed.iter().map(|&(s, _, _)| s).collect();
        let mut segs: Vec<usize> = directed.iter().map(|&(_, t, _)| t).collect();
        sources.extend(0..n);
        segs.extend(0..n);
        let rows: Vec<usize> = (0..sources.len()).collect();
        Self {
            sources: sources.into(),
            segment_of: segs.into(),
            edge_attr_row: rows.into(),
            node_count: n,
        }
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn segment_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.node_count];
        for &s in self.segment_of.iter() {
            sizes[s] += 1;
        }
        sizes
    }

    /// Reorders entries by `perm` (entry `k` of the result is entry
    /// `perm[k]` of `self`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let pick = |v: &Rc<[usize]>| -> Rc<[usize]> { perm.iter().map(|&p| v[p]).collect() };
        Self {
            sources: pick(&self.sources),
            segment_of: pick(&self.segment_of),
            edge_attr_row: pick(&self.edge_attr_row),
            node_count: self.node_count,
        }
    }
}

/// Encoded edge attributes, one row per [`NeighborhoodIndex`] entry:
/// `[capacity, efficiency, length, one-hot(carrier)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeAttributes {
    pub columns: Vec<String>,
    pub values: Tensor,
}

impl EdgeAttributes {
    pub fn encode(graph: &PowerGraph) -> Self {
        let directed = graph.directed_edges();
        let carriers = graph.carriers();
        let d_e = CONTINUOUS_EDGE_ATTRS + carriers.len();
        let n = graph.node_count();

        let raw = |f: fn(&EdgeRecord) -> f64| -> Vec<f64> {
            directed.iter().map(|&(_, _, l)| f(&graph.edges[l])).collect()
        };
        let continuous = [
            raw(|e| e.capacity_mw),
            raw(|e| e.efficiency),
            raw(|e| e.length_km),
        ];
        // self-loop: zero capacity, lossless, zero length
        let self_loop = [0.0, 1.0, 0.0];
        let stats: Vec<(f64, f64)> = continuous.iter().map(|c| mean_std(c)).collect();

        let rows = directed.len() + n;
        let mut data = vec![0.0; rows * d_e];
        for (r, &(_, _, line)) in directed.iter().enumerate() {
            for c in 0..CONTINUOUS_EDGE_ATTRS {
                data[r * d_e + c] = standardize(continuous[c][r], stats[c].0, stats[c].1);
            }
            let k = carriers
                .iter()
                .position(|x| *x == graph.edges[line].carrier)
                .expect("carrier in vocabulary");
            data[r * d_e + CONTINUOUS_EDGE_ATTRS + k] = 1.0;
        }
        for r in directed.len()..rows {
            for c in 0..CONTINUOUS_EDGE_ATTRS {
                data[r * d_e + c] = standardize(self_loop[c], stats[c].0, stats[c].1);
            }
        }

        let mut columns: Vec<String> = ["capacity_z", "efficiency_z", "length_z"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        columns.extend(carriers.iter().map(|c| format!("carrier_{c}")));
        Self {
            columns,
            values: Tensor::new(vec![rows, d_e], data).expect("consistent shape"),
        }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = io::create_writer(path)?;
        w.write_record(&self.columns)
            .map_err(|e| Error::csv(path, e))?;
        for r in 0..self.values.rows() {
            let rec: Vec<String> = self.values.row(r).iter().map(|v| io::fmt_f64(*v)).collect();
            w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
        }
        io::finish(w, path)
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` with `A` the symmetric 0/1 adjacency and `D`
/// the degree matrix of `A + I`.
pub fn normalized_adjacency(graph: &PowerGraph) -> Tensor {
    let n = graph.node_count();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        a[i * n + i] = 1.0;
    }
    for (s, t, _) in graph.directed_edges() {
        a[s * n + t] = 1.0;
    }
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| 1.0 / a[i * n..(i + 1) * n].iter().sum::<f64>().sqrt())
        .collect();
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] *= inv_sqrt_deg[i] * inv_sqrt_deg[j];
        }
    }
    Tensor::new(vec![n, n], a).expect("consistent shape")
}

//! The GAT-LSTM forecaster and its ablation baselines.
//!
//! All four variants share the same temporal half: fused sequences go
//! through a stacked LSTM and a scalar linear head. They differ in how the
//! static node embedding appended to every time step is produced:
//!
//! | variant        | graph side                                   |
//! |----------------|----------------------------------------------|
//! | `gat-lstm`     | two edge-attribute GAT towers, concatenated  |
//! | `gcn-lstm`     | two GCN towers (+ dropout), concatenated     |
//! | `edgegcn-lstm` | two edge-aware GCN towers (+ dropout)        |
//! | `lstm`         | none; raw sequences only                     |

use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, EdgeAttributes, NeighborhoodIndex, PowerGraph};
use crate::layers::{
    edge_gcn_forward, gcn_forward, linear_forward, lstm_forward, two_tower_gat, EdgeGatParams,
    GcnParams, LinearParams, LstmParams, LEAKY_SLOPE,
};
use crate::rng::{substream, Stream};
use crate::tensor::{ParamSet, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    GatLstm,
    GcnLstm,
    EdgegcnLstm,
    Lstm,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::GatLstm,
        Variant::GcnLstm,
        Variant::EdgegcnLstm,
        Variant::Lstm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::GatLstm => "gat-lstm",
            Variant::GcnLstm => "gcn-lstm",
            Variant::EdgegcnLstm => "edgegcn-lstm",
            Variant::Lstm => "lstm",
        }
    }

    pub fn uses_graph(self) -> bool {
        self != Variant::Lstm
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub seq_len: usize,
    /// Width of one graph tower (all heads concatenated).
    pub gat_out: usize,
    pub heads: usize,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub gat_dropout: f64,
    pub lstm_dropout: f64,
    /// Sequence feature width.
    pub d_s: usize,
    /// Static node feature width.
    pub d_node: usize,
    /// Encoded edge attribute width.
    pub d_e: usize,
    pub leaky_slope: f64,
}

impl ModelConfig {
    /// Hyperparameters of the reference configuration for the given data widths.
    pub fn reference(variant: Variant, d_s: usize, d_node: usize, d_e: usize) -> Self {
        Self {
            variant,
            seq_len: 24,
            gat_out: 64,
            heads: 8,
            lstm_hidden: 128,
            lstm_layers: 4,
            gat_dropout: 0.2,
            lstm_dropout: 0.3,
            d_s,
            d_node,
            d_e,
            leaky_slope: LEAKY_SLOPE,
        }
    }

    /// Width of the graph embedding appended to each time step.
    pub fn d_g(&self) -> usize {
        if self.variant.uses_graph() {
            2 * self.gat_out
        } else {
            0
        }
    }

    pub fn fused_width(&self) -> usize {
        self.d_s + self.d_g()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.seq_len == 0 {
            return fail("seq_len must be >= 1".into());
        }
        if self.d_s == 0 || self.lstm_hidden == 0 || self.lstm_layers == 0 {
            return fail("d_s, lstm_hidden and lstm_layers must be positive".into());
        }
        if self.variant.uses_graph() && self.gat_out == 0 {
            return fail("gat_out must be positive for graph variants".into());
        }
        if self.variant == Variant::GatLstm
            && (self.heads == 0 || !self.gat_out.is_multiple_of(self.heads))
        {
            return fail(format!(
                "gat_out {} must be a positive multiple of heads {}",
                self.gat_out, self.heads
            ));
        }
        for (name, rate) in [("gat_dropout", self.gat_dropout), ("lstm_dropout", self.lstm_dropout)] {
            if !(0.0..1.0).contains(&rate) {
                return fail(format!("{name} {rate} outside [0, 1)"));
            }
        }
        Ok(())
    }
}

/// Graph-side parameters, one pair of towers per graph variant.
#[derive(Clone, Debug, PartialEq)]
pub enum GraphParams {
    EdgeGat(EdgeGatParams, EdgeGatParams),
    Gcn(GcnParams, GcnParams),
    EdgeGcn(GcnParams, GcnParams),
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub graph: GraphParams,
    pub lstm: LstmParams,
    pub head: LinearParams,
}

impl ParamSet for ModelParams {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        match &self.graph {
            GraphParams::EdgeGat(a, b) => {
                a.collect("gat1.", &mut out);
                b.collect("gat2.", &mut out);
            }
            GraphParams::Gcn(a, b) | GraphParams::EdgeGcn(a, b) => {
                a.collect("gcn1.", &mut out);
                b.collect("gcn2.", &mut out);
            }
            GraphParams::None => {}
        }
        self.lstm.collect("lstm.", &mut out);
        self.head.collect("head.", &mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        match &mut self.graph {
            GraphParams::EdgeGat(a, b) => {
                a.collect_mut(&mut out);
                b.collect_mut(&mut out);
            }
            GraphParams::Gcn(a, b) | GraphParams::EdgeGcn(a, b) => {
                a.collect_mut(&mut out);
                b.collect_mut(&mut out);
            }
            GraphParams::None => {}
        }
        self.lstm.collect_mut(&mut out);
        self.head.collect_mut(&mut out);
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Model {
    /// Fresh parameters drawn from the `init` substream of `seed`.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = substream(seed, Stream::Init);
        let c = &config;
        let graph = match c.variant {
            Variant::GatLstm => {
                let d_head = c.gat_out / c.heads;
                let mut tower = || {
                    EdgeGatParams::init(
                        &mut rng,
                        c.d_node,
                        c.d_e,
                        c.heads,
                        d_head,
                        c.leaky_slope,
                        c.gat_dropout,
                    )
                };
                let a = tower();
                GraphParams::EdgeGat(a, tower())
            }
            Variant::GcnLstm => {
                let a = GcnParams::init(&mut rng, c.d_node, c.gat_out);
                GraphParams::Gcn(a, GcnParams::init(&mut rng, c.d_node, c.gat_out))
            }
            Variant::EdgegcnLstm => {
                let a = GcnParams::init_edge(&mut rng, c.d_node, c.d_e, c.gat_out);
                GraphParams::EdgeGcn(a, GcnParams::init_edge(&mut rng, c.d_node, c.d_e, c.gat_out))
            }
            Variant::Lstm => GraphParams::None,
        };
        let lstm = LstmParams::init(
            &mut rng,
            c.fused_width(),
            c.lstm_hidden,
            c.lstm_layers,
            c.lstm_dropout,
        );
        let head = LinearParams::init(&mut rng, c.lstm_hidden, 1);
        Ok(Self {
            config,
            params: ModelParams { graph, lstm, head },
        })
    }

    /// Eval-mode forward pass returning one (scaled) forecast per batch row.
    pub fn predict(&self, graph: &GraphInputs, batch: &Batch) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let mut unused = rand::rngs::mock::StepRng::new(0, 0);
        let y = forward(&mut tape, graph, batch, self, false, &mut unused)?;
        Ok(tape.value(y).data().to_vec())
    }
}

/// Static graph tensors consumed by the graph towers.
#[derive(Clone, Debug)]
pub struct GraphInputs {
    pub node_names: Vec<String>,
    pub node_features: Tensor,
    pub neighborhoods: NeighborhoodIndex,
    pub edge_attrs: Tensor,
    pub adjacency: Tensor,
}

impl GraphInputs {
    pub fn from_graph(graph: &PowerGraph) -> Self {
        Self {
            node_names: graph.node_names(),
            node_features: graph.node_feature_matrix(),
            neighborhoods: NeighborhoodIndex::build(graph),
            edge_attrs: EdgeAttributes::encode(graph).values,
            adjacency: normalized_adjacency(graph),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn d_node(&self) -> usize {
        self.node_features.cols()
    }

    pub fn d_e(&self) -> usize {
        self.edge_attrs.cols()
    }
}

/// Node-aligned windows: row `r` is the `T`-step history of node
/// `node_ids[r]` and `y[r]` its next-step target.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub node_ids: Vec<usize>,
    /// `[B×T×d_s]`
    pub x: Tensor,
    /// `[B]`
    pub y: Tensor,
}

impl Batch {
    pub fn new(node_ids: Vec<usize>, x: Tensor, y: Tensor) -> Result<Self> {
        let b = node_ids.len();
        if x.shape().len() != 3 || x.shape()[0] != b || y.numel() != b {
            return Err(Error::dim("batch", x.shape(), y.shape()));
        }
        if !y.all_finite() {
            return Err(Error::Data("non-finite batch target".into()));
        }
        Ok(Self { node_ids, x, y })
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn seq_len(&self) -> usize {
        self.x.shape()[1]
    }
}

/// Appends each node's embedding to every time step of its sequence:
/// `Z_i = [X_i ‖ repeat(h_i, T)]`. With no embedding, `Z = X`.
pub fn fuse(tape: &mut Tape, embeddings: Option<Var>, x: Var, node_ids: &[usize]) -> Result<Var> {
    let Some(emb) = embeddings else {
        return Ok(x);
    };
    let n = tape.shape(emb)[0];
    if let Some(bad) = node_ids.iter().find(|&&i| i >= n) {
        return Err(Error::Contract(format!(
            "node id {bad} out of range for {n} embeddings"
        )));
    }
    if tape.shape(emb)[1] == 0 {
        return Ok(x);
    }
    let steps = tape.shape(x)[1];
    let picked = tape.gather_rows(emb, Rc::from(node_ids))?;
    let repeated = tape.repeat_steps(picked, steps)?;
    tape.concat(&[x, repeated], 2)
}

/// Full forward pass; returns the forecast `[B]`.
pub fn forward(
    tape: &mut Tape,
    graph: &GraphInputs,
    batch: &Batch,
    model: &Model,
    training: bool,
    rng: &mut dyn RngCore,
) -> Result<Var> {
    let c = &model.config;
    let p = &model.params;
    if batch.seq_len() != c.seq_len || batch.x.shape()[2] != c.d_s {
        return Err(Error::Config(format!(
            "batch shape {:?} does not match seq_len {} / d_s {}",
            batch.x.shape(),
            c.seq_len,
            c.d_s
        )));
    }
    let embeddings = match (&p.graph, c.variant) {
        (GraphParams::None, Variant::Lstm) => None,
        (GraphParams::EdgeGat(a, b), Variant::GatLstm) => {
            let h = tape.constant(graph.node_features.clone());
            let e = tape.constant(graph.edge_attrs.clone());
            Some(two_tower_gat(
                tape,
                h,
                &graph.neighborhoods,
                e,
                a,
                b,
                training,
                rng,
            )?)
        }
        (GraphParams::Gcn(a, b), Variant::GcnLstm) => {
            let h = tape.constant(graph.node_features.clone());
            let adj = tape.constant(graph.adjacency.clone());
            let ga = gcn_forward(tape, h, adj, a)?;
            let ga = tape.dropout(ga, c.gat_dropout, training, rng)?;
            let gb = gcn_forward(tape, h, adj, b)?;
            let gb = tape.dropout(gb, c.gat_dropout, training, rng)?;
            Some(tape.concat(&[ga, gb], 1)?)
        }
        (GraphParams::EdgeGcn(a, b), Variant::EdgegcnLstm) => {
            let h = tape.constant(graph.node_features.clone());
            let e = tape.constant(graph.edge_attrs.clone());
            let ga = edge_gcn_forward(tape, h, &graph.neighborhoods, e, a)?;
            let ga = tape.dropout(ga, c.gat_dropout, training, rng)?;
            let gb = edge_gcn_forward(tape, h, &graph.neighborhoods, e, b)?;
            let gb = tape.dropout(gb, c.gat_dropout, training, rng)?;
            Some(tape.concat(&[ga, gb], 1)?)
        }
        _ => {
            return Err(Error::Config(format!(
                "parameters do not match variant {}",
                c.variant
            )))
        }
    };
    let x = tape.constant(batch.x.clone());
    let z = fuse(tape, embeddings, x, &batch.node_ids)?;
    let h = lstm_forward(tape, z, &p.lstm, training, rng)?;
    let y = linear_forward(tape, h, &p.head)?;
    tape.reshape(y, &[batch.len()])
}

use rand::{Rng, RngCore};

use super::{push_named, uniform_init};
use crate::error::{Error, Result};
use crate::graph::NeighborhoodIndex;
use crate::tensor::{ParamSet, Tape, Tensor, Var};

/// One attention head: node transform `w [d_in×d_head]`, edge transform
/// `u [d_e×d_head]` and scoring vector `a [3·d_head×1]` laid out as
/// `[target ‖ source ‖ edge]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GatHead {
    pub w: Tensor,
    pub u: Tensor,
    pub a: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeGatParams {
    pub heads: Vec<GatHead>,
    pub leaky_slope: f64,
    pub dropout: f64,
}

impl EdgeGatParams {
    pub fn init<R: Rng + ?Sized>(
        rng: &mut R,
        d_in: usize,
        d_e: usize,
        heads: usize,
        d_head: usize,
        leaky_slope: f64,
        dropout: f64,
    ) -> Self {
        let heads = (0..heads)
            .map(|_| GatHead {
                w: uniform_init(rng, &[d_in, d_head], d_in),
                u: uniform_init(rng, &[d_e, d_head], d_e),
                a: uniform_init(rng, &[3 * d_head, 1], 3 * d_head),
            })
            .collect();
        Self {
            heads,
            leaky_slope,
            dropout,
        }
    }

    pub fn head_width(&self) -> usize {
        self.heads.first().map_or(0, |h| h.w.shape()[1])
    }

    pub fn output_width(&self) -> usize {
        self.heads.len() * self.head_width()
    }

    pub(crate) fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        for (k, h) in self.heads.iter().enumerate() {
            push_named(out, prefix, &format!("head{k}.w"), &h.w);
            push_named(out, prefix, &format!("head{k}.u"), &h.u);
            push_named(out, prefix, &format!("head{k}.a"), &h.a);
        }
    }

    pub(crate) fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        for h in &mut self.heads {
            out.push(&mut h.w);
            out.push(&mut h.u);
            out.push(&mut h.a);
        }
    }
}

impl ParamSet for EdgeGatParams {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.collect("", &mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        self.collect_mut(&mut out);
        out
    }
}

/// Node-feature-only attention heads: `w [d_in×d_head]`, `a [2·d_head×1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GatParams {
    pub heads: Vec<(Tensor, Tensor)>,
    pub leaky_slope: f64,
    pub dropout: f64,
}

impl GatParams {
    /// Drops the edge transform and the edge block of each scoring vector.
    pub fn without_edges(p: &EdgeGatParams) -> Self {
        let heads = p
            .heads
            .iter()
            .map(|h| {
                let d = h.w.shape()[1];
                let a = Tensor::new(vec![2 * d, 1], h.a.data()[..2 * d].to_vec())
                    .expect("consistent shape");
                (h.w.clone(), a)
            })
            .collect();
        Self {
            heads,
            leaky_slope: p.leaky_slope,
            dropout: p.dropout,
        }
    }
}

/// Per-head intermediate values, for inspecting attention.
#[derive(Clone, Copy, Debug)]
pub struct HeadTrace {
    /// Post-LeakyReLU scores `[E]`.
    pub scores: Var,
    /// Attention coefficients `[E]` before dropout.
    pub alpha: Var,
}

fn check_inputs(tape: &Tape, h: Var, nbr: &NeighborhoodIndex, d_in: usize) -> Result<()> {
    let hs = tape.shape(h);
    if hs.len() != 2 || hs[0] != nbr.node_count || hs[1] != d_in {
        return Err(Error::dim("edge_gat_forward", hs, &[nbr.node_count, d_in]));
    }
    Ok(())
}

/// Shared attention-and-aggregate step: given the per-entry concatenated
/// score inputs, the transformed source rows, and the scoring vector.
#[allow(clippy::too_many_arguments)]
fn attend(
    tape: &mut Tape,
    score_in: Var,
    wh_src: Var,
    a: Var,
    nbr: &NeighborhoodIndex,
    slope: f64,
    dropout: f64,
    training: bool,
    rng: &mut dyn RngCore,
) -> Result<(Var, HeadTrace)> {
    let raw = tape.matmul(score_in, a)?;
    let raw = tape.reshape(raw, &[nbr.len()])?;
    let scores = tape.leaky_relu(raw, slope);
    let alpha = tape.segment_softmax(scores, nbr.segment_of.clone(), nbr.node_count)?;
    let alpha_d = tape.dropout(alpha, dropout, training, rng)?;
    let msg = tape.scale_rows(wh_src, alpha_d)?;
    let agg = tape.scatter_add_rows(msg, nbr.segment_of.clone(), nbr.node_count)?;
    Ok((tape.elu(agg), HeadTrace { scores, alpha }))
}

/// Edge-attribute graph attention with heads concatenated.
///
/// For entry `j → i`: `score = LeakyReLU(a · [W h_i ‖ W h_j ‖ U e_ij])`,
/// `α` is the softmax of scores over `i`'s self-looped neighborhood, and
/// `h'_i = ELU(Σ_j α_ij W h_j)`. Attention dropout acts on `α` in training.
#[allow(clippy::too_many_arguments)]
pub fn edge_gat_traced(
    tape: &mut Tape,
    h: Var,
    nbr: &NeighborhoodIndex,
    edge_attrs: Var,
    p: &EdgeGatParams,
    training: bool,
    rng: &mut dyn RngCore,
) -> Result<(Var, Vec<HeadTrace>)> {
    let first = p
        .heads
        .first()
        .ok_or_else(|| Error::Config("edge GAT needs at least one head".into()))?;
    check_inputs(tape, h, nbr, first.w.shape()[0])?;
    if tape.shape(edge_attrs)[1] != first.u.shape()[0] {
        return Err(Error::dim(
            "edge_gat_forward",
            tape.shape(edge_attrs),
            first.u.shape(),
        ));
    }
    let e_rows = tape.gather_rows(edge_attrs, nbr.edge_attr_row.clone())?;
    let mut outputs = Vec::with_capacity(p.heads.len());
    let mut traces = Vec::with_capacity(p.heads.len());
    for head in &p.heads {
        let w = tape.param(&head.w);
        let u = tape.param(&head.u);
        let a = tape.param(&head.a);
        let wh = tape.matmul(h, w)?;
        let wh_dst = tape.gather_rows(wh, nbr.segment_of.clone())?;
        let wh_src = tape.gather_rows(wh, nbr.sources.clone())?;
        let ue = tape.matmul(e_rows, u)?;
        let score_in = tape.concat(&[wh_dst, wh_src, ue], 1)?;
        let (out, trace) = attend(
            tape,
            score_in,
            wh_src,
            a,
            nbr,
            p.leaky_slope,
            p.dropout,
            training,
            rng,
        )?;
        outputs.push(out);
        traces.push(trace);
    }
    Ok((tape.concat(&outputs, 1)?, traces))
}

pub fn edge_gat_forward(
    tape: &mut Tape,
    h: Var,
    nbr: &NeighborhoodIndex,
    edge_attrs: Var,
    p: &EdgeGatParams,
    training: bool,
    rng: &mut dyn RngCore,
) -> Result<Var> {
    edge_gat_traced(tape, h, nbr, edge_attrs, p, training, rng).map(|(out, _)| out)
}

/// Standard multi-head GAT: scores use node features only.
pub fn gat_forward(
    tape: &mut Tape,
    h: Var,
    nbr: &NeighborhoodIndex,
    p: &GatParams,
    training: bool,
    rng: &mut dyn RngCore,
) -> Result<Var> {
    let first = p
        .heads
        .first()
        .ok_or_else(|| Error::Config("GAT needs at least one head".into()))?;
    check_inputs(tape, h, nbr, first.0.shape()[0])?;
    let mut outputs = Vec::with_capacity(p.heads.len());
    for (w, a) in &p.heads {
        let w = tape.param(w);
        let a = tape.param(a);
        let wh = tape.matmul(h, w)?;
        let wh_dst = tape.gather_rows(wh, nbr.segment_of.clone())?;
        let wh_src = tape.gather_rows(wh, nbr.sources.clone())?;
        let score_in = tape.concat(&[wh_dst, wh_src], 1)?;
        let (out, _) = attend(
            tape,
            score_in,
            wh_src,
            a,
            nbr,
            p.leaky_slope,
            p.dropout,
            training,
            rng,
        )?;
        outputs.push(out);
    }
    tape.concat(&outputs, 1)
}

/// Two independent edge-GAT towers over the same input, concatenated.
#[allow(clippy::too_many_arguments)]
pub fn two_tower_gat(
    tape: &mut Tape,
    h: Var,
    nbr: &NeighborhoodIndex,
    edge_attrs: Var,
    first: &EdgeGatParams,
    second: &EdgeGatParams,
    training: bool,
    rng: &mut dyn RngCore,
) -> Result<Var> {
    let a = edge_gat_forward(tape, h, nbr, edge_attrs, first, training, rng)?;
    let b = edge_gat_forward(tape, h, nbr, edge_attrs, second, training, rng)?;
    tape.concat(&[a, b], 1)
}

use rand::Rng;

use super::{push_named, uniform_init};
use crate::error::{Error, Result};
use crate::graph::NeighborhoodIndex;
use crate::tensor::{ParamSet, Tape, Tensor, Var};

/// `w [d_in×d_out]`; the edge-aware variant adds `v [d_e×d_out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnParams {
    pub w: Tensor,
    pub v: Option<Tensor>,
}

impl GcnParams {
    pub fn init<R: Rng + ?Sized>(rng: &mut R, d_in: usize, d_out: usize) -> Self {
        Self {
            w: uniform_init(rng, &[d_in, d_out], d_in),
            v: None,
        }
    }

    pub fn init_edge<R: Rng + ?Sized>(rng: &mut R, d_in: usize, d_e: usize, d_out: usize) -> Self {
        let w = uniform_init(rng, &[d_in, d_out], d_in);
        let v = uniform_init(rng, &[d_e, d_out], d_e);
        Self { w, v: Some(v) }
    }

    pub fn output_width(&self) -> usize {
        self.w.shape()[1]
    }

    pub(crate) fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        push_named(out, prefix, "w", &self.w);
        if let Some(v) = &self.v {
            push_named(out, prefix, "v", v);
        }
    }

    pub(crate) fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        out.push(&mut self.w);
        if let Some(v) = &mut self.v {
            out.push(v);
        }
    }
}

impl ParamSet for GcnParams {
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

/// `ReLU(Â · H · W)`.
pub fn gcn_forward(tape: &mut Tape, h: Var, a_hat: Var, p: &GcnParams) -> Result<Var> {
    let n = tape.shape(h)[0];
    if tape.shape(a_hat) != [n, n] {
        return Err(Error::dim("gcn_forward", tape.shape(a_hat), tape.shape(h)));
    }
    let w = tape.param(&p.w);
    let hw = tape.matmul(h, w)?;
    let agg = tape.matmul(a_hat, hw)?;
    Ok(tape.relu(agg))
}

/// `h'_i = ReLU(mean_{j ∈ N(i) ∪ {i}} (W h_j + V e_ij))`.
pub fn edge_gcn_forward(
    tape: &mut Tape,
    h: Var,
    nbr: &NeighborhoodIndex,
    edge_attrs: Var,
    p: &GcnParams,
) -> Result<Var> {
    let v = p
        .v
        .as_ref()
        .ok_or_else(|| Error::Config("edge GCN requires an edge transform".into()))?;
    if tape.shape(h)[0] != nbr.node_count {
        return Err(Error::dim(
            "edge_gcn_forward",
            tape.shape(h),
            &[nbr.node_count],
        ));
    }
    let w = tape.param(&p.w);
    let v = tape.param(v);
    let hw = tape.matmul(h, w)?;
    let msg = tape.gather_rows(hw, nbr.sources.clone())?;
    let e_rows = tape.gather_rows(edge_attrs, nbr.edge_attr_row.clone())?;
    let ev = tape.matmul(e_rows, v)?;
    let msg = tape.add(msg, ev)?;
    let sum = tape.scatter_add_rows(msg, nbr.segment_of.clone(), nbr.node_count)?;
    let inv: Vec<f64> = nbr
        .segment_sizes()
        .into_iter()
        .map(|s| 1.0 / s as f64)
        .collect();
    let inv = tape.constant(Tensor::vector(inv));
    let mean = tape.scale_rows(sum, inv)?;
    Ok(tape.relu(mean))
}

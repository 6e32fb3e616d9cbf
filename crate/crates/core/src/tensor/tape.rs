use std::collections::HashMap;
use std::rc::Rc;

use rand::Rng;

use super::ops;
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    AddRow(Var, Var),
    ScaleRows(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    Relu(Var),
    Elu(Var),
    LeakyRelu(Var, f64),
    Concat { inputs: Vec<Var>, axis: usize },
    Narrow { input: Var, axis: usize, start: usize },
    Reshape(Var),
    RepeatSteps { input: Var, steps: usize },
    GatherRows { input: Var, index: Rc<[usize]> },
    ScatterAddRows { input: Var, index: Rc<[usize]> },
    SegmentSoftmax { input: Var, segments: Rc<[usize]> },
    Dropout { input: Var, mask: Vec<f64> },
    Sum(Var),
    Mean(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records operations in execution order; node ids are therefore a valid
/// topological order and backward simply walks them in reverse.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<usize, Var>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A value that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A fresh leaf that receives a gradient.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Registers a parameter tensor as a gradient-receiving leaf.
    ///
    /// Repeated calls with the same tensor return the same [`Var`], so a
    /// weight reused across time steps accumulates a single gradient. The
    /// tensor must not move or be mutated while this tape is alive.
    pub fn param(&mut self, tensor: &Tensor) -> Var {
        let key = tensor.data().as_ptr() as usize;
        if let Some(&v) = self.params.get(&key) {
            return v;
        }
        let v = self.leaf(tensor.clone());
        self.params.insert(key, v);
        v
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let src = &self.nodes[x.0].value;
        let data = src.data().iter().map(|&v| f(v)).collect();
        let value = Tensor {
            shape: src.shape().to_vec(),
            data,
        };
        let rg = self.rg(x);
        self.push(value, op, rg)
    }

    fn binary_same(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if ta.shape() != tb.shape() {
            return Err(Error::dim(name, ta.shape(), tb.shape()));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor {
            shape: ta.shape().to_vec(),
            data,
        };
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, op, rg))
    }

    /// Matrix product of two 2-D tensors.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(Error::dim("matmul", ta.shape(), tb.shape()));
        }
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let data = ops::matmul(ta.data(), tb.data(), m, k, n);
        let value = Tensor {
            shape: vec![m, n],
            data,
        };
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, |v| v * c, Op::Scale(x, c))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, |v| v + c, Op::AddScalar(x))
    }

    /// Adds the vector `b[n]` to every row of `x[m×n]`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (tx, tb) = (&self.nodes[x.0].value, &self.nodes[b.0].value);
        if tx.shape().len() != 2 || tb.numel() != tx.shape()[1] {
            return Err(Error::dim("add_row", tx.shape(), tb.shape()));
        }
        let n = tb.numel();
        let mut data = tx.data().to_vec();
        for row in data.chunks_mut(n) {
            for (o, &bv) in row.iter_mut().zip(tb.data()) {
                *o += bv;
            }
        }
        let value = Tensor {
            shape: tx.shape().to_vec(),
            data,
        };
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(value, Op::AddRow(x, b), rg))
    }

    /// Multiplies row `r` of `x[m×n]` by `w[r]`.
    pub fn scale_rows(&mut self, x: Var, w: Var) -> Result<Var> {
        let (tx, tw) = (&self.nodes[x.0].value, &self.nodes[w.0].value);
        if tx.shape().is_empty() || tw.numel() != tx.rows() {
            return Err(Error::dim("scale_rows", tx.shape(), tw.shape()));
        }
        let n = tx.cols();
        let mut data = tx.data().to_vec();
        for (row, &s) in data.chunks_mut(n.max(1)).zip(tw.data()) {
            row.iter_mut().for_each(|v| *v *= s);
        }
        let value = Tensor {
            shape: tx.shape().to_vec(),
            data,
        };
        let rg = self.rg(x) || self.rg(w);
        Ok(self.push(value, Op::ScaleRows(x, w), rg))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, ops::sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, f64::tanh, Op::Tanh(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, f64::exp, Op::Exp(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| if v > 0.0 { v } else { 0.0 }, Op::Relu(x))
    }

    pub fn elu(&mut self, x: Var) -> Var {
        self.unary(x, ops::elu, Op::Elu(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        self.unary(
            x,
            |v| if v >= 0.0 { v } else { slope * v },
            Op::LeakyRelu(x, slope),
        )
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.mul(x, x).expect("same shape")
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::dim("concat", &base, &[axis]));
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return Err(Error::dim("concat", &base, s));
            }
            total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = total;
        let (outer, _, inner) = ops::split_axis(&base, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in inputs {
                let t = &self.nodes[v.0].value;
                let block = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * block..(o + 1) * block]);
            }
        }
        let rg = inputs.iter().any(|&v| self.rg(v));
        Ok(self.push(
            Tensor { shape, data },
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// The sub-tensor `start..start+len` along `axis`.
    pub fn narrow(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || start + len > shape[axis] {
            return Err(Error::dim("narrow", &shape, &[axis, start, len]));
        }
        let (outer, n, inner) = ops::split_axis(&shape, axis);
        let src = self.nodes[x.0].value.data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * n + start) * inner;
            data.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let rg = self.rg(x);
        Ok(self.push(
            Tensor {
                shape: out_shape,
                data,
            },
            Op::Narrow {
                input: x,
                axis,
                start,
            },
            rg,
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.nodes[x.0].value.clone().reshaped(shape.to_vec())?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    /// `[B×d] → [B×steps×d]`, repeating each row `steps` times.
    pub fn repeat_steps(&mut self, x: Var, steps: usize) -> Result<Var> {
        let t = &self.nodes[x.0].value;
        if t.shape().len() != 2 {
            return Err(Error::dim("repeat_steps", t.shape(), &[steps]));
        }
        let (b, d) = (t.shape()[0], t.shape()[1]);
        let mut data = Vec::with_capacity(b * steps * d);
        for r in 0..b {
            for _ in 0..steps {
                data.extend_from_slice(t.row(r));
            }
        }
        let rg = self.rg(x);
        Ok(self.push(
            Tensor {
                shape: vec![b, steps, d],
                data,
            },
            Op::RepeatSteps { input: x, steps },
            rg,
        ))
    }

    /// Row `r` of the output is row `index[r]` of `x`.
    pub fn gather_rows(&mut self, x: Var, index: Rc<[usize]>) -> Result<Var> {
        let t = &self.nodes[x.0].value;
        if t.shape().len() != 2 {
            return Err(Error::dim("gather_rows", t.shape(), &[index.len()]));
        }
        let (rows, d) = (t.shape()[0], t.shape()[1]);
        let mut data = Vec::with_capacity(index.len() * d);
        for &i in index.iter() {
            if i >= rows {
                return Err(Error::Contract(format!(
                    "row index {i} out of range for {rows} rows"
                )));
            }
            data.extend_from_slice(t.row(i));
        }
        let rg = self.rg(x);
        Ok(self.push(
            Tensor {
                shape: vec![index.len(), d],
                data,
            },
            Op::GatherRows { input: x, index },
            rg,
        ))
    }

    /// Sums row `r` of `x` into output row `index[r]`, producing `rows` rows.
    pub fn scatter_add_rows(&mut self, x: Var, index: Rc<[usize]>, rows: usize) -> Result<Var> {
        let t = &self.nodes[x.0].value;
        if t.shape().len() != 2 || t.shape()[0] != index.len() {
            return Err(Error::dim("scatter_add_rows", t.shape(), &[index.len()]));
        }
        let d = t.shape()[1];
        let mut data = vec![0.0; rows * d];
        for (r, &i) in index.iter().enumerate() {
            if i >= rows {
                return Err(Error::Contract(format!(
                    "segment {i} out of range for {rows} rows"
                )));
            }
            for (o, &v) in data[i * d..(i + 1) * d].iter_mut().zip(t.row(r)) {
                *o += v;
            }
        }
        let rg = self.rg(x);
        Ok(self.push(
            Tensor {
                shape: vec![rows, d],
                data,
            },
            Op::ScatterAddRows { input: x, index },
            rg,
        ))
    }

    /// Softmax of `scores[E]` within groups sharing a segment id.
    ///
    /// Each of the `segment_count` segments must own at least one entry.
    pub fn segment_softmax(
        &mut self,
        scores: Var,
        segments: Rc<[usize]>,
        segment_count: usize,
    ) -> Result<Var> {
        let t = &self.nodes[scores.0].value;
        if t.numel() != segments.len() {
            return Err(Error::dim("segment_softmax", t.shape(), &[segments.len()]));
        }
        let mut max = vec![f64::NEG_INFINITY; segment_count];
        for (&s, &v) in segments.iter().zip(t.data()) {
            if s >= segment_count {
                return Err(Error::InvalidGraph(format!(
                    "segment id {s} out of range for {segment_count} segments"
                )));
            }
            max[s] = max[s].max(v);
        }
        if let Some(empty) = max.iter().position(|m| *m == f64::NEG_INFINITY) {
            return Err(Error::InvalidGraph(format!("segment {empty} is empty")));
        }
        let mut data: Vec<f64> = segments
            .iter()
            .zip(t.data())
            .map(|(&s, &v)| (v - max[s]).exp())
            .collect();
        let mut denom = vec![0.0; segment_count];
        for (&s, &e) in segments.iter().zip(&data) {
            denom[s] += e;
        }
        for (&s, e) in segments.iter().zip(data.iter_mut()) {
            *e /= denom[s];
        }
        let shape = t.shape().to_vec();
        let rg = self.rg(scores);
        Ok(self.push(
            Tensor { shape, data },
            Op::SegmentSoftmax {
                input: scores,
                segments,
            },
            rg,
        ))
    }

    /// Inverted dropout: in training mode each element is zeroed with
    /// probability `rate` and survivors are scaled by `1/(1-rate)`.
    /// Identity in eval mode or at rate 0.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0,1)")));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let t = &self.nodes[x.0].value;
        let mask: Vec<f64> = (0..t.numel())
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let data = t.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let shape = t.shape().to_vec();
        let rg = self.rg(x);
        Ok(self.push(Tensor { shape, data }, Op::Dropout { input: x, mask }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let s = t.data().iter().sum::<f64>() / t.numel() as f64;
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Mean(x), rg)
    }

    /// Populates gradients of `loss` with respect to every gradient-receiving
    /// value reachable from it.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            if !self.nodes[id].requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    /// Gradient of the last backward pass; zeros when `v` was unreachable.
    pub fn grad(&self, v: Var) -> Tensor {
        let shape = self.shape(v);
        match self.grads.get(v.0).and_then(Option::as_ref) {
            Some(g) => Tensor {
                shape: shape.to_vec(),
                data: g.clone(),
            },
            None => Tensor::zeros(shape),
        }
    }

    /// Gradient for a tensor previously registered with [`Tape::param`].
    pub fn param_grad(&self, tensor: &Tensor) -> Option<Tensor> {
        let key = tensor.data().as_ptr() as usize;
        self.params.get(&key).map(|&v| self.grad(v))
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, delta: Vec<f64>) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.iter_mut().zip(delta).for_each(|(e, d)| *e += d),
            slot @ None => *slot = Some(delta),
        }
    }

    fn propagate(&self, id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = &self.nodes[id].value;
        let val = |v: Var| &self.nodes[v.0].value;
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                if self.rg(*a) {
                    self.accumulate(grads, *a, ops::matmul_bt(g, tb.data(), m, n, k));
                }
                if self.rg(*b) {
                    self.accumulate(grads, *b, ops::matmul_at(ta.data(), g, m, k, n));
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.to_vec());
                self.accumulate(grads, *b, g.to_vec());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.to_vec());
                self.accumulate(grads, *b, g.iter().map(|v| -v).collect());
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                if self.rg(*a) {
                    let d = g.iter().zip(tb.data()).map(|(g, y)| g * y).collect();
                    self.accumulate(grads, *a, d);
                }
                if self.rg(*b) {
                    let d = g.iter().zip(ta.data()).map(|(g, x)| g * x).collect();
                    self.accumulate(grads, *b, d);
                }
            }
            Op::Scale(x, c) => self.accumulate(grads, *x, g.iter().map(|v| v * c).collect()),
            Op::AddScalar(x) | Op::Reshape(x) => self.accumulate(grads, *x, g.to_vec()),
            Op::AddRow(x, b) => {
                self.accumulate(grads, *x, g.to_vec());
                if self.rg(*b) {
                    let n = val(*b).numel();
                    let mut gb = vec![0.0; n];
                    for row in g.chunks(n) {
                        gb.iter_mut().zip(row).for_each(|(o, v)| *o += v);
                    }
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::ScaleRows(x, w) => {
                let (tx, tw) = (val(*x), val(*w));
                let n = tx.cols().max(1);
                if self.rg(*x) {
                    let mut d = g.to_vec();
                    for (row, &s) in d.chunks_mut(n).zip(tw.data()) {
                        row.iter_mut().for_each(|v| *v *= s);
                    }
                    self.accumulate(grads, *x, d);
                }
                if self.rg(*w) {
                    let d = g
                        .chunks(n)
                        .zip(tx.data().chunks(n))
                        .map(|(gr, xr)| gr.iter().zip(xr).map(|(a, b)| a * b).sum())
                        .collect();
                    self.accumulate(grads, *w, d);
                }
            }
            Op::Sigmoid(x) => {
                let d = g
                    .iter()
                    .zip(out.data())
                    .map(|(g, y)| g * y * (1.0 - y))
                    .collect();
                self.accumulate(grads, *x, d);
            }
            Op::Tanh(x) => {
                let d = g
                    .iter()
                    .zip(out.data())
                    .map(|(g, y)| g * (1.0 - y * y))
                    .collect();
                self.accumulate(grads, *x, d);
            }
            Op::Exp(x) => {
                let d = g.iter().zip(out.data()).map(|(g, y)| g * y).collect();
                self.accumulate(grads, *x, d);
            }
            Op::Relu(x) => {
                let d = g
                    .iter()
                    .zip(val(*x).data())
                    .map(|(g, v)| if *v > 0.0 { *g } else { 0.0 })
                    .collect();
                self.accumulate(grads, *x, d);
            }
            Op::Elu(x) => {
                let d = g
                    .iter()
                    .zip(val(*x).data())
                    .zip(out.data())
                    .map(|((g, v), y)| if *v > 0.0 { *g } else { g * (y + 1.0) })
                    .collect();
                self.accumulate(grads, *x, d);
            }
            Op::LeakyRelu(x, slope) => {
                let d = g
                    .iter()
                    .zip(val(*x).data())
                    .map(|(g, v)| if *v >= 0.0 { *g } else { g * slope })
                    .collect();
                self.accumulate(grads, *x, d);
            }
            Op::Concat { inputs, axis } => {
                let (outer, total, inner) = ops::split_axis(out.shape(), *axis);
                let mut offset = 0;
                for &v in inputs {
                    let len = val(v).shape()[*axis];
                    if self.rg(v) {
                        let mut d = Vec::with_capacity(outer * len * inner);
                        for o in 0..outer {
                            let base = (o * total + offset) * inner;
                            d.extend_from_slice(&g[base..base + len * inner]);
                        }
                        self.accumulate(grads, v, d);
                    }
                    offset += len;
                }
            }
            Op::Narrow { input, axis, start } => {
                let src = val(*input);
                let (outer, n, inner) = ops::split_axis(src.shape(), *axis);
                let len = out.shape()[*axis];
                let mut d = vec![0.0; src.numel()];
                for o in 0..outer {
                    let base = (o * n + start) * inner;
                    d[base..base + len * inner]
                        .copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
                }
                self.accumulate(grads, *input, d);
            }
            Op::RepeatSteps { input, steps } => {
                let d_in = val(*input).cols();
                let b = val(*input).rows();
                let mut d = vec![0.0; b * d_in];
                for r in 0..b {
                    for s in 0..*steps {
                        let base = (r * steps + s) * d_in;
                        d[r * d_in..(r + 1) * d_in]
                            .iter_mut()
                            .zip(&g[base..base + d_in])
                            .for_each(|(o, v)| *o += v);
                    }
                }
                self.accumulate(grads, *input, d);
            }
            Op::GatherRows { input, index } => {
                let src = val(*input);
                let dcol = src.cols();
                let mut d = vec![0.0; src.numel()];
                for (r, &i) in index.iter().enumerate() {
                    d[i * dcol..(i + 1) * dcol]
                        .iter_mut()
                        .zip(&g[r * dcol..(r + 1) * dcol])
                        .for_each(|(o, v)| *o += v);
                }
                self.accumulate(grads, *input, d);
            }
            Op::ScatterAddRows { input, index } => {
                let dcol = out.cols();
                let mut d = Vec::with_capacity(index.len() * dcol);
                for &i in index.iter() {
                    d.extend_from_slice(&g[i * dcol..(i + 1) * dcol]);
                }
                self.accumulate(grads, *input, d);
            }
            Op::SegmentSoftmax { input, segments } => {
                let y = out.data();
                let count = segments.iter().max().map_or(0, |m| m + 1);
                let mut dot = vec![0.0; count];
                for ((&s, &yv), &gv) in segments.iter().zip(y).zip(g) {
                    dot[s] += yv * gv;
                }
                let d = segments
                    .iter()
                    .zip(y)
                    .zip(g)
                    .map(|((&s, &yv), &gv)| yv * (gv - dot[s]))
                    .collect();
                self.accumulate(grads, *input, d);
            }
            Op::Dropout { input, mask } => {
                let d = g.iter().zip(mask).map(|(g, m)| g * m).collect();
                self.accumulate(grads, *input, d);
            }
            Op::Sum(x) => {
                let n = val(*x).numel();
                self.accumulate(grads, *x, vec![g[0]; n]);
            }
            Op::Mean(x) => {
                let n = val(*x).numel();
                self.accumulate(grads, *x, vec![g[0] / n as f64; n]);
            }
        }
    }
}

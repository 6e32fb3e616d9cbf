use rand::{Rng, RngCore};

use super::{push_named, uniform_init};
use crate::error::{Error, Result};
use crate::tensor::{ParamSet, Tape, Tensor, Var};

/// One stacked layer. Gate blocks along the `4H` axis are ordered
/// input, forget, cell, output.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    pub w_x: Tensor,
    pub w_h: Tensor,
    pub b: Tensor,
}

impl LstmLayer {
    pub fn input_width(&self) -> usize {
        self.w_x.shape()[0]
    }

    pub fn hidden(&self) -> usize {
        self.w_h.shape()[0]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub layers: Vec<LstmLayer>,
    /// Dropout between stacked layers (training only).
    pub dropout: f64,
}

impl LstmParams {
    /// Uniform weights, zero biases except the forget gate at +1.
    pub fn init<R: Rng + ?Sized>(
        rng: &mut R,
        d_in: usize,
        hidden: usize,
        layers: usize,
        dropout: f64,
    ) -> Self {
        let layers = (0..layers)
            .map(|l| {
                let width = if l == 0 { d_in } else { hidden };
                let mut b = Tensor::zeros(&[4 * hidden]);
                b.data_mut()[hidden..2 * hidden].fill(1.0);
                LstmLayer {
                    w_x: uniform_init(rng, &[width, 4 * hidden], width),
                    w_h: uniform_init(rng, &[hidden, 4 * hidden], hidden),
                    b,
                }
            })
            .collect();
        Self { layers, dropout }
    }

    pub fn hidden(&self) -> usize {
        self.layers.first().map_or(0, LstmLayer::hidden)
    }

    pub(crate) fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        for (l, layer) in self.layers.iter().enumerate() {
            push_named(out, prefix, &format!("layer{l}.w_x"), &layer.w_x);
            push_named(out, prefix, &format!("layer{l}.w_h"), &layer.w_h);
            push_named(out, prefix, &format!("layer{l}.b"), &layer.b);
        }
    }

    pub(crate) fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        for layer in &mut self.layers {
            out.push(&mut layer.w_x);
            out.push(&mut layer.w_h);
            out.push(&mut layer.b);
        }
    }
}

impl ParamSet for LstmParams {
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

/// Runs the stacked recurrence over `z [B×T×d]` from zero states and returns
/// the top layer's final hidden state `[B×H]`.
pub fn lstm_forward(
    tape: &mut Tape,
    z: Var,
    p: &LstmParams,
    training: bool,
    rng: &mut dyn RngCore,
) -> Result<Var> {
    let shape = tape.shape(z).to_vec();
    if shape.len() != 3 || shape[1] == 0 {
        return Err(Error::dim("lstm_forward", &shape, &[0, 1, 0]));
    }
    let (b, steps, d) = (shape[0], shape[1], shape[2]);
    let first = p
        .layers
        .first()
        .ok_or_else(|| Error::Config("LSTM needs at least one layer".into()))?;
    if first.input_width() != d {
        return Err(Error::dim("lstm_forward", &shape, first.w_x.shape()));
    }

    let mut inputs = Vec::with_capacity(steps);
    for t in 0..steps {
        let x = tape.narrow(z, 1, t, 1)?;
        inputs.push(tape.reshape(x, &[b, d])?);
    }

    for (l, layer) in p.layers.iter().enumerate() {
        if l > 0 {
            for x in &mut inputs {
                *x = tape.dropout(*x, p.dropout, training, rng)?;
            }
        }
        let hidden = layer.hidden();
        let w_x = tape.param(&layer.w_x);
        let w_h = tape.param(&layer.w_h);
        let bias = tape.param(&layer.b);
        let mut h = tape.constant(Tensor::zeros(&[b, hidden]));
        let mut c = tape.constant(Tensor::zeros(&[b, hidden]));
        for x in &mut inputs {
            let gx = tape.matmul(*x, w_x)?;
            let gh = tape.matmul(h, w_h)?;
            let gates = tape.add(gx, gh)?;
            let gates = tape.add_row(gates, bias)?;
            let i = tape.narrow(gates, 1, 0, hidden)?;
            let f = tape.narrow(gates, 1, hidden, hidden)?;
            let g = tape.narrow(gates, 1, 2 * hidden, hidden)?;
            let o = tape.narrow(gates, 1, 3 * hidden, hidden)?;
            let i = tape.sigmoid(i);
            let f = tape.sigmoid(f);
            let g = tape.tanh(g);
            let o = tape.sigmoid(o);
            let fc = tape.mul(f, c)?;
            let ig = tape.mul(i, g)?;
            c = tape.add(fc, ig)?;
            let tc = tape.tanh(c);
            h = tape.mul(o, tc)?;
            *x = h;
        }
    }
    Ok(*inputs.last().expect("steps >= 1"))
}

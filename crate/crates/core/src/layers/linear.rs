use rand::Rng;

use super::{push_named, uniform_init};
use crate::error::Result;
use crate::tensor::{ParamSet, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct LinearParams {
    pub w: Tensor,
    pub b: Tensor,
}

impl LinearParams {
    pub fn init<R: Rng + ?Sized>(rng: &mut R, d_in: usize, d_out: usize) -> Self {
        Self {
            w: uniform_init(rng, &[d_in, d_out], d_in),
            b: Tensor::zeros(&[d_out]),
        }
    }

    pub(crate) fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        push_named(out, prefix, "w", &self.w);
        push_named(out, prefix, "b", &self.b);
    }

    pub(crate) fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        out.push(&mut self.w);
        out.push(&mut self.b);
    }
}

impl ParamSet for LinearParams {
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

/// `x · W + b`.
pub fn linear_forward(tape: &mut Tape, x: Var, p: &LinearParams) -> Result<Var> {
    let w = tape.param(&p.w);
    let b = tape.param(&p.b);
    let xw = tape.matmul(x, w)?;
    tape.add_row(xw, b)
}

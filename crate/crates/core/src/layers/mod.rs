//! Neural building blocks recorded onto a [`Tape`](crate::tensor::Tape).
//!
//! Every forward function takes its parameters by reference and registers
//! them with [`Tape::param`](crate::tensor::Tape::param), so gradients can be
//! read back per tensor after `backward`.

mod gat;
mod gcn;
mod linear;
mod lstm;


use rand::Rng;

use crate::tensor::Tensor;

pub use gat::{
    edge_gat_forward, edge_gat_traced, gat_forward, two_tower_gat, EdgeGatParams, GatHead,
    GatParams, HeadTrace,
};
pub use gcn::{edge_gcn_forward, gcn_forward, GcnParams};
pub use linear::{linear_forward, LinearParams};
pub use lstm::{lstm_forward, LstmLayer, LstmParams};

/// Default LeakyReLU slope for attention scores.
pub const LEAKY_SLOPE: f64 = 0.2;

/// `uniform(−1/√fan_in, 1/√fan_in)` weights of the given shape.
pub(crate) fn uniform_init<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("consistent shape")
}

pub(crate) fn push_named<'a>(
    out: &mut Vec<(String, &'a Tensor)>,
    prefix: &str,
    name: &str,
    t: &'a Tensor,
) {
    out.push((format!("{prefix}{name}"), t));
}

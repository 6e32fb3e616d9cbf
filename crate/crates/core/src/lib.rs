pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod forecaster;
pub mod gradcheck;
pub mod graph;
pub mod io;
pub mod layers;
pub mod rng;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};

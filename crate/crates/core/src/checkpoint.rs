//! Self-describing model checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, RobustScaler};
use crate::error::{Error, Result};
use crate::forecaster::{Model, ModelConfig};
use crate::io;
use crate::tensor::{ParamSet, Tensor};

pub const CHECKPOINT_FORMAT: &str = "gridcast-checkpoint/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: ModelConfig,
    pub seed: u64,
    pub epoch: usize,
    pub val_loss: f64,
    pub node_names: Vec<String>,
    pub feature_columns: Vec<String>,
    pub load_column: String,
    pub scaler: RobustScaler,
    pub parameters: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new(model: &Model, seed: u64, epoch: usize, val_loss: f64, data: &Dataset) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_owned(),
            config: model.config.clone(),
            seed,
            epoch,
            val_loss,
            node_names: data.meta.states.clone(),
            feature_columns: data.meta.feature_columns.clone(),
            load_column: data.meta.load_column.clone(),
            scaler: data.scaler.clone(),
            parameters: model
                .params
                .tensors()
                .into_iter()
                .map(|(name, t)| NamedTensor {
                    name,
                    shape: t.shape().to_vec(),
                    data: t.data().to_vec(),
                })
                .collect(),
        }
    }

    /// Rebuilds the model, checking every parameter name and shape.
    pub fn model(&self) -> Result<Model> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Compatibility(format!(
                "unsupported checkpoint format `{}`",
                self.format
            )));
        }
        let mut model = Model::init(self.config.clone(), self.seed)?;
        let names: Vec<String> = model.params.tensors().into_iter().map(|(n, _)| n).collect();
        if names.len() != self.parameters.len() {
            return Err(Error::Compatibility(format!(
                "expected {} parameter tensors, found {}",
                names.len(),
                self.parameters.len()
            )));
        }
        for ((name, slot), stored) in names
            .iter()
            .zip(model.params.tensors_mut())
            .zip(&self.parameters)
        {
            if *name != stored.name || slot.shape() != stored.shape.as_slice() {
                return Err(Error::Compatibility(format!(
                    "parameter `{}` {:?} does not match `{name}` {:?}",
                    stored.name,
                    stored.shape,
                    slot.shape()
                )));
            }
            *slot = Tensor::new(stored.shape.clone(), stored.data.clone())?;
        }
        Ok(model)
    }

    /// The dataset must have the same nodes and feature columns.
    pub fn check_compatible(&self, data: &Dataset) -> Result<()> {
        if self.node_names != data.meta.states {
            return Err(Error::Compatibility(format!(
                "checkpoint nodes [{}] differ from dataset nodes [{}]",
                self.node_names.join(","),
                data.meta.states.join(",")
            )));
        }
        if self.feature_columns != data.meta.feature_columns {
            return Err(Error::Compatibility(
                "checkpoint feature columns differ from the dataset".into(),
            ));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    /// Converts scaled model outputs to MW using the stored load statistics.
    pub fn to_mw(&self, scaled: &[f64]) -> Result<Vec<f64>> {
        let mut out = scaled.to_vec();
        self.scaler.inverse(&self.load_column, &mut out)?;
        Ok(out)
    }
}

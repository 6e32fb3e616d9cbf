//! MSE training with Adam, plateau learning-rate decay and early stopping.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{SplitSpec, SplitTable, Window};
use crate::error::{Error, Result};
use crate::forecaster::{forward, Batch, GraphInputs, Model, ModelConfig, Variant};
use crate::io::{self, create_writer, fmt_f64};
use crate::layers::LEAKY_SLOPE;
use crate::rng::{substream, Stream};
use crate::tensor::{ParamSet, Tape, Tensor, Var};

/// Mean squared error between two equal-length vectors.
pub fn mse_loss(tape: &mut Tape, y_hat: Var, y: Var) -> Result<Var> {
    if tape.shape(y_hat) != tape.shape(y) {
        return Err(Error::dim("mse_loss", tape.shape(y_hat), tape.shape(y)));
    }
    let diff = tape.sub(y_hat, y)?;
    let sq = tape.square(diff);
    Ok(tape.mean(sq))
}

/// Adam with L2 weight decay added to the gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new<P: ParamSet + ?Sized>(params: &P, lr: f64, weight_decay: f64) -> Self {
        let zeros: Vec<Tensor> = params
            .tensors()
            .into_iter()
            .map(|(_, t)| Tensor::zeros(t.shape()))
            .collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn apply<P: ParamSet + ?Sized>(&mut self, params: &mut P, grads: &[Tensor]) -> Result<()> {
        let tensors = params.tensors_mut();
        if tensors.len() != grads.len() || tensors.len() != self.m.len() {
            return Err(Error::Contract(format!(
                "{} gradients for {} parameters",
                grads.len(),
                tensors.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (k, theta) in tensors.into_iter().enumerate() {
            let g = &grads[k];
            if g.shape() != theta.shape() {
                return Err(Error::Contract(format!(
                    "gradient shape {:?} for parameter {:?}",
                    g.shape(),
                    theta.shape()
                )));
            }
            let m = self.m[k].data_mut();
            let v = self.v[k].data_mut();
            for (i, p) in theta.data_mut().iter_mut().enumerate() {
                let gi = g.data()[i] + self.weight_decay * *p;
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Multiplies the learning rate by `factor` after `patience` consecutive
/// epochs without strict improvement.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateauScheduler {
    pub patience: usize,
    pub factor: f64,
    initial_lr: f64,
    reductions: i32,
    best: f64,
    stalled: usize,
}

impl PlateauScheduler {
    pub fn new(initial_lr: f64, patience: usize, factor: f64) -> Self {
        Self {
            patience,
            factor,
            initial_lr,
            reductions: 0,
            best: f64::INFINITY,
            stalled: 0,
        }
    }

    /// `initial / (1/factor)^k`; for a factor of 0.1 this is exactly
    /// `initial / 10^k`.
    pub fn lr(&self) -> f64 {
        self.initial_lr / (1.0 / self.factor).powi(self.reductions)
    }

    pub fn reductions(&self) -> i32 {
        self.reductions
    }

    /// Records one epoch's validation loss and returns the learning rate
    /// for the next epoch.
    pub fn observe(&mut self, val_loss: f64) -> f64 {
        if val_loss < self.best {
            self.best = val_loss;
            self.stalled = 0;
        } else {
            self.stalled += 1;
            if self.stalled >= self.patience {
                self.reductions += 1;
                self.stalled = 0;
            }
        }
        self.lr()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Stop,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    best: f64,
    stalled: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            stalled: 0,
        }
    }

    pub fn observe(&mut self, val_loss: f64) -> Decision {
        if val_loss < self.best {
            self.best = val_loss;
            self.stalled = 0;
        } else {
            self.stalled += 1;
        }
        if self.stalled >= self.patience {
            Decision::Stop
        } else {
            Decision::Continue
        }
    }
}

/// Training run settings, read from a TOML document. Every field has a
/// default matching the reference configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub variant: Variant,
    pub seed: u64,
    pub seq_len: usize,
    /// Node-aligned: must equal the number of graph nodes.
    pub batch_size: usize,
    pub gat_out: usize,
    pub heads: usize,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub gat_dropout: f64,
    pub lstm_dropout: f64,
    pub epochs: usize,
    pub scheduler: bool,
    pub scheduler_patience: usize,
    pub scheduler_factor: f64,
    pub early_stopping: bool,
    pub early_stopping_patience: usize,
    /// Train on a random subset of this many windows per epoch.
    pub batches_per_epoch: Option<usize>,
    /// Validate on every `val_stride`-th window.
    pub val_stride: usize,
    /// When set, must match the boundaries the dataset was split with.
    pub splits: Option<SplitSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: Variant::GatLstm,
            seed: 42,
            seq_len: 24,
            batch_size: 27,
            gat_out: 64,
            heads: 8,
            lstm_hidden: 128,
            lstm_layers: 4,
            learning_rate: 1e-4,
            weight_decay: 1e-5,
            gat_dropout: 0.2,
            lstm_dropout: 0.3,
            epochs: 200,
            scheduler: true,
            scheduler_patience: 5,
            scheduler_factor: 0.1,
            early_stopping: true,
            early_stopping_patience: 10,
            batches_per_epoch: None,
            val_stride: 1,
            splits: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0) || self.weight_decay < 0.0 {
            return fail("learning_rate must be > 0 and weight_decay >= 0".into());
        }
        if self.epochs == 0 || self.val_stride == 0 || self.batches_per_epoch == Some(0) {
            return fail("epochs, val_stride and batches_per_epoch must be positive".into());
        }
        if !(self.scheduler_factor > 0.0 && self.scheduler_factor < 1.0) {
            return fail(format!("scheduler_factor {} outside (0, 1)", self.scheduler_factor));
        }
        if self.scheduler_patience == 0 || self.early_stopping_patience == 0 {
            return fail("patience values must be positive".into());
        }
        Ok(())
    }

    pub fn model_config(&self, d_s: usize, d_node: usize, d_e: usize) -> ModelConfig {
        ModelConfig {
            variant: self.variant,
            seq_len: self.seq_len,
            gat_out: self.gat_out,
            heads: self.heads,
            lstm_hidden: self.lstm_hidden,
            lstm_layers: self.lstm_layers,
            gat_dropout: self.gat_dropout,
            lstm_dropout: self.lstm_dropout,
            d_s,
            d_node,
            d_e,
            leaky_slope: LEAKY_SLOPE,
        }
    }
}

/// Indexed access to training or validation batches.
pub trait BatchSource {
    fn count(&self) -> usize;
    fn get(&self, index: usize) -> Result<Batch>;
}

impl BatchSource for [Batch] {
    fn count(&self) -> usize {
        self.len()
    }

    fn get(&self, index: usize) -> Result<Batch> {
        Ok(self[index].clone())
    }
}

impl BatchSource for Vec<Batch> {
    fn count(&self) -> usize {
        self.len()
    }

    fn get(&self, index: usize) -> Result<Batch> {
        Ok(self[index].clone())
    }
}

/// Windows of a split table, built on demand.
pub struct TableWindows<'a> {
    pub table: &'a SplitTable,
    pub windows: Vec<Window>,
    pub seq_len: usize,
}

impl<'a> TableWindows<'a> {
    pub fn new(table: &'a SplitTable, seq_len: usize) -> Self {
        Self {
            table,
            windows: table.windows(seq_len),
            seq_len,
        }
    }

    /// Keeps every `stride`-th window.
    pub fn strided(mut self, stride: usize) -> Self {
        self.windows = self.windows.into_iter().step_by(stride.max(1)).collect();
        self
    }
}

impl BatchSource for TableWindows<'_> {
    fn count(&self) -> usize {
        self.windows.len()
    }

    fn get(&self, index: usize) -> Result<Batch> {
        self.table.batch(self.windows[index], self.seq_len)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut w = create_writer(path)?;
    w.write_record(["epoch", "train_loss", "val_loss", "lr"])
        .map_err(|e| Error::csv(path, e))?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            fmt_f64(r.train_loss),
            fmt_f64(r.val_loss),
            fmt_f64(r.lr),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    io::finish(w, path)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub best: Model,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub history: Vec<EpochRecord>,
    pub stopped_early: bool,
}

/// Mean batch MSE in eval mode; parameters are only read.
pub fn evaluate_loss<S: BatchSource + ?Sized>(
    model: &Model,
    graph: &GraphInputs,
    batches: &S,
    epoch: usize,
) -> Result<f64> {
    if batches.count() == 0 {
        return Err(Error::Data("no validation windows".into()));
    }
    let mut total = 0.0;
    for i in 0..batches.count() {
        let batch = batches.get(i)?;
        let y_hat = model.predict(graph, &batch)?;
        let mse = y_hat
            .iter()
            .zip(batch.y.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / y_hat.len() as f64;
        if !mse.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: i });
        }
        total += mse;
    }
    Ok(total / batches.count() as f64)
}

/// One optimization step on `batch`; returns the batch loss.
pub fn train_step(
    model: &mut Model,
    graph: &GraphInputs,
    batch: &Batch,
    adam: &mut Adam,
    dropout_rng: &mut dyn rand::RngCore,
) -> Result<f64> {
    let mut tape = Tape::new();
    let y_hat = forward(&mut tape, graph, batch, model, true, dropout_rng)?;
    let y = tape.constant(batch.y.clone());
    let loss = mse_loss(&mut tape, y_hat, y)?;
    let value = tape.value(loss).data()[0];
    if !value.is_finite() {
        return Ok(value);
    }
    tape.backward(loss)?;
    let grads = model
        .params
        .tensors()
        .into_iter()
        .map(|(name, t)| {
            tape.param_grad(t)
                .ok_or_else(|| Error::Contract(format!("no gradient for `{name}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    adam.apply(&mut model.params, &grads)?;
    Ok(value)
}

/// Runs the epoch loop and returns the best-validation model.
pub fn train<T, V>(
    model: Model,
    graph: &GraphInputs,
    train_set: &T,
    val_set: &V,
    cfg: &RunConfig,
) -> Result<TrainOutcome>
where
    T: BatchSource + ?Sized,
    V: BatchSource + ?Sized,
{
    cfg.validate()?;
    if train_set.count() == 0 {
        return Err(Error::Data("no training windows".into()));
    }
    let mut model = model;
    let mut adam = Adam::new(&model.params, cfg.learning_rate, cfg.weight_decay);
    let mut scheduler =
        PlateauScheduler::new(cfg.learning_rate, cfg.scheduler_patience, cfg.scheduler_factor);
    let mut stopper = EarlyStopping::new(cfg.early_stopping_patience);
    let mut shuffle_rng = substream(cfg.seed, Stream::Shuffle);
    let mut dropout_rng = substream(cfg.seed, Stream::Dropout);

    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_val = f64::INFINITY;
    let mut history = Vec::new();
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..train_set.count()).collect();
    let per_epoch = cfg
        .batches_per_epoch
        .map_or(order.len(), |b| b.min(order.len()));

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let lr = adam.lr;
        let mut total = 0.0;
        for (k, &i) in order.iter().take(per_epoch).enumerate() {
            let batch = train_set.get(i)?;
            let loss = train_step(&mut model, graph, &batch, &mut adam, &mut dropout_rng)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: k });
            }
            total += loss;
        }
        let train_loss = total / per_epoch as f64;
        let val_loss = evaluate_loss(&model, graph, val_set, epoch)?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
        });
        log::info!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6} lr {lr:e}");
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best = model.clone();
        }
        if cfg.scheduler {
            adam.lr = scheduler.observe(val_loss);
        }
        if cfg.early_stopping && stopper.observe(val_loss) == Decision::Stop {
            stopped_early = true;
            break;
        }
    }
    Ok(TrainOutcome {
        best,
        best_epoch,
        best_val_loss: best_val,
        history,
        stopped_early,
    })
}

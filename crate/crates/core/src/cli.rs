//! Command-line front end: `synth`, `preprocess`, `train`, `evaluate`,
//! `compare`, `predict`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{Duration, NaiveDateTime};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::data::{
    format_timestamp, generate_synthetic, parse_timestamp, preprocess, Dataset, SplitName,
    SplitSpec, SynthConfig,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    compare_models, peak_offpeak_report, predict_split, write_comparison, write_hourly,
    write_predictions, write_reports, HourlyPoint, MetricReport,
};
use crate::forecaster::{GraphInputs, Model};
use crate::io::{self, create_writer, fmt_f64};
use crate::rng::Stream;
use crate::training::{train, write_history, RunConfig, TableWindows};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "gridcast", version, about = "Graph-attention + LSTM load forecasting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic raw dataset (graph, sequences, weather stations).
    Synth(SynthArgs),
    /// Clean, scale and split a raw dataset.
    Preprocess(PreprocessArgs),
    /// Train one model variant on a processed dataset.
    Train(TrainArgs),
    /// Score a checkpoint on one split and export reports.
    Evaluate(EvaluateArgs),
    /// Rank several evaluation reports.
    Compare(CompareArgs),
    /// Forecast the hour after a given timestamp for every node.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML generator settings; defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub raw: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// TOML split boundaries; 2019 / 2020H1 / 2020H2 when omitted.
    #[arg(long)]
    pub split_spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// TOML run configuration; reference settings when omitted.
    #[arg(long)]
    pub model_config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: SplitName,
    /// Model label in the reports; the variant name when omitted.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// `report.json` files written by `evaluate`.
    #[arg(long, num_args = 2.., required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Last hour of the input window (`YYYY-MM-DD HH:MM`).
    #[arg(long, value_parser = parse_at)]
    pub at: NaiveDateTime,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_at(s: &str) -> std::result::Result<NaiveDateTime, String> {
    parse_timestamp(s).ok_or_else(|| format!("invalid timestamp `{s}`, expected YYYY-MM-DD HH:MM"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstreamInfo {
    pub name: String,
    pub id: u64,
}

/// Written next to every command's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub seed: Option<u64>,
    pub substreams: Vec<SubstreamInfo>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub artifact_version: String,
    pub duration_secs: f64,
}

impl RunManifest {
    fn new(command: &str, config: Option<&Path>, seed: Option<u64>) -> Self {
        Self {
            command: command.to_owned(),
            config_path: config.map(|p| p.display().to_string()),
            seed,
            substreams: Stream::ALL
                .iter()
                .map(|s| SubstreamInfo {
                    name: s.name().to_owned(),
                    id: s.id(),
                })
                .collect(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            artifact_version: env!("CARGO_PKG_VERSION").to_owned(),
            duration_secs: 0.0,
        }
    }

    fn input(mut self, p: &Path) -> Self {
        self.inputs.push(p.display().to_string());
        self
    }

    fn finish(mut self, dir: &Path, outputs: &[&str], started: Instant) -> Result<()> {
        self.outputs = outputs.iter().map(|o| dir.join(o).display().to_string()).collect();
        self.duration_secs = started.elapsed().as_secs_f64();
        io::write_json(&dir.join(MANIFEST_FILE), &self)
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Preprocess(a) => cmd_preprocess(&a),
        Command::Train(a) => cmd_train(&a).map(|_| ()),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Predict(a) => cmd_predict(&a),
    }
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let started = Instant::now();
    let config = match &a.config {
        Some(p) => SynthConfig::from_toml(&read_text(p)?)?,
        None => SynthConfig::default(),
    };
    let data = generate_synthetic(&config, a.seed)?;
    data.write(&a.out)?;
    io::write_json(&a.out.join("synth_config.json"), &config)?;
    RunManifest::new("synth", a.config.as_deref(), Some(a.seed)).finish(
        &a.out,
        &["nodes.csv", "edges.csv", "sequence.csv", "weather.csv", "synth_config.json"],
        started,
    )
}

pub fn cmd_preprocess(a: &PreprocessArgs) -> Result<()> {
    let started = Instant::now();
    let spec = match &a.split_spec {
        Some(p) => SplitSpec::from_toml(&read_text(p)?)?,
        None => SplitSpec::default(),
    };
    let raw_manifest = a.raw.join(MANIFEST_FILE);
    let seed = if raw_manifest.exists() {
        io::read_json::<RunManifest>(&raw_manifest)?.seed
    } else {
        None
    };
    let processed = preprocess(&a.raw, &spec, seed)?;
    processed.write(&a.out)?;
    RunManifest::new("preprocess", a.split_spec.as_deref(), seed)
        .input(&a.raw)
        .finish(
            &a.out,
            &[
                "train.csv",
                "val.csv",
                "test.csv",
                Dataset::SCALER_FILE,
                Dataset::META_FILE,
                Dataset::NODES_FILE,
                Dataset::EDGES_FILE,
            ],
            started,
        )
}

/// Summary returned by [`cmd_train`].
#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

pub fn cmd_train(a: &TrainArgs) -> Result<TrainSummary> {
    let started = Instant::now();
    let mut cfg = match &a.model_config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let data = Dataset::open(&a.data)?;
    if let Some(spec) = &cfg.splits {
        if *spec != data.meta.split_spec {
            return Err(Error::Config(
                "run config split boundaries differ from the dataset's".into(),
            ));
        }
    }
    if cfg.batch_size != data.graph.node_count() {
        return Err(Error::Config(format!(
            "batch_size {} must equal the node count {} (node-aligned batches)",
            cfg.batch_size,
            data.graph.node_count()
        )));
    }
    let graph = GraphInputs::from_graph(&data.graph);
    let model_config =
        cfg.model_config(data.meta.feature_columns.len(), graph.d_node(), graph.d_e());
    let model = Model::init(model_config, cfg.seed)?;
    let train_table = data.load_split(SplitName::Train)?;
    let val_table = data.load_split(SplitName::Val)?;
    let train_set = TableWindows::new(&train_table, cfg.seq_len);
    let val_set = TableWindows::new(&val_table, cfg.seq_len).strided(cfg.val_stride);
    let outcome = train(model, &graph, &train_set, &val_set, &cfg)?;

    io::ensure_dir(&a.out)?;
    Checkpoint::new(
        &outcome.best,
        cfg.seed,
        outcome.best_epoch,
        outcome.best_val_loss,
        &data,
    )
    .save(&a.out.join("checkpoint.json"))?;
    write_history(&a.out.join("history.csv"), &outcome.history)?;
    std::fs::write(a.out.join("run_config.toml"), cfg.to_toml())
        .map_err(|e| Error::io(&a.out, e))?;
    RunManifest::new("train", a.model_config.as_deref(), Some(cfg.seed))
        .input(&a.data)
        .finish(
            &a.out,
            &["checkpoint.json", "history.csv", "run_config.toml"],
            started,
        )?;
    let summary = TrainSummary {
        epochs_run: outcome.history.len(),
        best_epoch: outcome.best_epoch,
        best_val_loss: outcome.best_val_loss,
    };
    println!(
        "{}: {} epochs, best epoch {} (val loss {:.6})",
        cfg.variant, summary.epochs_run, summary.best_epoch, summary.best_val_loss
    );
    Ok(summary)
}

/// `report.json` written by `evaluate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationFile {
    pub model: String,
    pub split: SplitName,
    pub reports: Vec<MetricReport>,
    pub hourly: Vec<HourlyPoint>,
}

impl EvaluationFile {
    pub fn overall(&self) -> Result<&MetricReport> {
        self.reports
            .iter()
            .find(|r| r.slice == "overall")
            .ok_or_else(|| Error::Data(format!("report for {} has no overall slice", self.model)))
    }
}

fn load_checkpoint(path: &Path, data: &Dataset) -> Result<(Checkpoint, Model)> {
    let ckpt = Checkpoint::load(path)?;
    ckpt.check_compatible(data)?;
    let model = ckpt.model()?;
    Ok((ckpt, model))
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let started = Instant::now();
    let data = Dataset::open(&a.data)?;
    let (ckpt, model) = load_checkpoint(&a.checkpoint, &data)?;
    let graph = GraphInputs::from_graph(&data.graph);
    let table = data.load_split(a.split)?;
    let preds = predict_split(&model, &graph, &table, |v| ckpt.to_mw(v))?;
    let name = a.name.clone().unwrap_or_else(|| model.config.variant.to_string());
    let slices = peak_offpeak_report(&name, &preds)?;

    io::ensure_dir(&a.out)?;
    write_predictions(&a.out.join("predictions.csv"), &preds)?;
    write_reports(&a.out.join("report.csv"), &slices.reports())?;
    write_hourly(&a.out.join("hourly.csv"), &slices.hourly)?;
    let file = EvaluationFile {
        model: name,
        split: a.split,
        reports: slices.reports().into_iter().cloned().collect(),
        hourly: slices.hourly.clone(),
    };
    io::write_json(&a.out.join("report.json"), &file)?;
    let o = &slices.overall;
    println!(
        "{} on {}: MAE {:.3} MW, RMSE {:.3} MW, MAPE {:.3}% (n={})",
        file.model,
        a.split.as_str(),
        o.mae,
        o.rmse,
        o.mape,
        o.n
    );
    RunManifest::new("evaluate", None, Some(ckpt.seed))
        .input(&a.checkpoint)
        .input(&a.data)
        .finish(
            &a.out,
            &["predictions.csv", "report.csv", "report.json", "hourly.csv"],
            started,
        )
}

pub fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let started = Instant::now();
    let mut rows = Vec::with_capacity(a.reports.len());
    let mut manifest = RunManifest::new("compare", None, None);
    for p in &a.reports {
        let file: EvaluationFile = io::read_json(p)?;
        rows.push((file.model.clone(), file.overall()?.clone()));
        manifest = manifest.input(p);
    }
    let ranked = compare_models(&rows)?;
    io::ensure_dir(&a.out)?;
    write_comparison(&a.out.join("comparison.csv"), &ranked)?;
    io::write_json(&a.out.join("comparison.json"), &ranked)?;
    for r in &ranked {
        println!(
            "{}. {:<16} MAE {:>10.3}  RMSE {:>10.3}  MAPE {:>7.3}%  best improves MAE by {:.2}%",
            r.rank, r.model, r.mae, r.rmse, r.mape, r.mae_improvement
        );
    }
    manifest.finish(&a.out, &["comparison.csv", "comparison.json"], started)
}

pub fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let started = Instant::now();
    let data = Dataset::open(&a.data)?;
    let (ckpt, model) = load_checkpoint(&a.checkpoint, &data)?;
    let graph = GraphInputs::from_graph(&data.graph);
    let batch = data.window_at(a.at, model.config.seq_len)?;
    let mw = ckpt.to_mw(&model.predict(&graph, &batch)?)?;
    let forecast_time = format_timestamp(a.at + Duration::hours(1));

    let rows: Vec<[String; 4]> = data
        .meta
        .states
        .iter()
        .zip(&mw)
        .map(|(s, v)| [s.clone(), format_timestamp(a.at), forecast_time.clone(), fmt_f64(*v)])
        .collect();
    let header = ["state", "window_end", "forecast_time", "predicted_mw"];
    match &a.out {
        Some(path) => {
            let mut w = create_writer(path)?;
            w.write_record(header).map_err(|e| Error::csv(path, e))?;
            for r in &rows {
                w.write_record(r).map_err(|e| Error::csv(path, e))?;
            }
            io::finish(w, path)?;
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            RunManifest::new("predict", None, Some(ckpt.seed))
                .input(&a.checkpoint)
                .input(&a.data)
                .finish(dir, &[name.as_str()], started)?;
        }
        None => {
            println!("{}", header.join(","));
            for r in &rows {
                println!("{}", r.join(","));
            }
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_subcommands() {
        let cli = Cli::try_parse_from([
            "gridcast", "predict", "--checkpoint", "c.json", "--data", "d", "--at", "2020-07-01 00:00",
        ])
        .unwrap();
        let Command::Predict(p) = cli.command else {
            panic!("expected predict");
        };
        assert_eq!(format_timestamp(p.at), "2020-07-01 00:00");

        assert!(Cli::try_parse_from([
            "gridcast", "predict", "--checkpoint", "c", "--data", "d", "--at", "July first",
        ])
        .is_err());
        assert!(Cli::try_parse_from(["gridcast", "compare", "--reports", "a", "--out", "o"]).is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(main_with_args(["gridcast", "frobnicate"]), 1);
        assert_eq!(main_with_args(["gridcast", "--help"]), 0);
    }

    #[test]
    fn split_names_parse() {
        let cli = Cli::try_parse_from([
            "gridcast", "evaluate", "--checkpoint", "c", "--data", "d", "--out", "o", "--split", "val",
        ])
        .unwrap();
        let Command::Evaluate(e) = cli.command else {
            panic!("expected evaluate");
        };
        assert_eq!(e.split, SplitName::Val);
    }
}

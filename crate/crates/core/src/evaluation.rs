//! Error metrics, peak/off-peak slices, hourly curves and model comparison.

use std::path::Path;

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::data::{format_timestamp, SplitTable};
use crate::error::{Error, Result};
use crate::forecaster::{GraphInputs, Model};
use crate::io::{self, create_writer, fmt_f64};

/// Actuals with `|y|` at or below this are left out of MAPE.
pub const MAPE_EPSILON: f64 = 1e-6;

pub const PEAK_HOURS: [u32; 8] = [7, 8, 9, 10, 16, 17, 18, 19];
pub const OFF_PEAK_HOURS: [u32; 11] = [0, 1, 2, 3, 4, 5, 6, 20, 21, 22, 23];

fn check_lengths(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(Error::dim("metric", &[y.len()], &[y_hat.len()]));
    }
    Ok(())
}

pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat)?;
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat)?;
    let mse = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64;
    Ok(mse.sqrt())
}

/// MAPE in percent and the number of rows excluded for a near-zero actual.
pub fn mape(y: &[f64], y_hat: &[f64]) -> Result<(f64, usize)> {
    check_lengths(y, y_hat)?;
    let kept: Vec<f64> = y
        .iter()
        .zip(y_hat)
        .filter(|(a, _)| a.abs() > MAPE_EPSILON)
        .map(|(a, b)| ((a - b) / a).abs())
        .collect();
    if kept.is_empty() {
        return Err(Error::UndefinedMape(y.len()));
    }
    Ok((
        100.0 * kept.iter().sum::<f64>() / kept.len() as f64,
        y.len() - kept.len(),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub slice: String,
    pub mae: f64,
    pub rmse: f64,
    pub mape: f64,
    pub n: usize,
    pub mape_excluded: usize,
}

impl MetricReport {
    pub fn compute(model: &str, slice: &str, y: &[f64], y_hat: &[f64]) -> Result<Self> {
        let (mape, mape_excluded) = mape(y, y_hat)?;
        Ok(Self {
            model: model.to_owned(),
            slice: slice.to_owned(),
            mae: mae(y, y_hat)?,
            rmse: rmse(y, y_hat)?,
            mape,
            n: y.len(),
            mape_excluded,
        })
    }
}

/// One forecast: `timestamp` is the hour being forecast.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub state: String,
    pub timestamp: NaiveDateTime,
    pub actual: f64,
    pub predicted: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HourBucket {
    Peak,
    OffPeak,
    Other,
}

pub fn bucket(hour: u32) -> HourBucket {
    if PEAK_HOURS.contains(&hour) {
        HourBucket::Peak
    } else if OFF_PEAK_HOURS.contains(&hour) {
        HourBucket::OffPeak
    } else {
        HourBucket::Other
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HourlyPoint {
    pub hour: u32,
    pub mean_actual: f64,
    pub mean_predicted: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceReports {
    pub overall: MetricReport,
    pub peak: Option<MetricReport>,
    pub off_peak: Option<MetricReport>,
    /// Exactly 24 rows; hours without rows have `NaN` means.
    pub hourly: Vec<HourlyPoint>,
}

impl SliceReports {
    pub fn reports(&self) -> Vec<&MetricReport> {
        std::iter::once(&self.overall)
            .chain(self.peak.as_ref())
            .chain(self.off_peak.as_ref())
            .collect()
    }
}

pub fn peak_offpeak_report(model: &str, preds: &[Prediction]) -> Result<SliceReports> {
    let pick = |want: Option<HourBucket>| -> (Vec<f64>, Vec<f64>) {
        preds
            .iter()
            .filter(|p| want.is_none_or(|b| bucket(p.timestamp.hour()) == b))
            .map(|p| (p.actual, p.predicted))
            .unzip()
    };
    let (y, y_hat) = pick(None);
    let overall = MetricReport::compute(model, "overall", &y, &y_hat)?;
    let slice = |b: HourBucket, label: &str| -> Result<Option<MetricReport>> {
        let (y, y_hat) = pick(Some(b));
        if y.is_empty() {
            Ok(None)
        } else {
            MetricReport::compute(model, label, &y, &y_hat).map(Some)
        }
    };
    let peak = slice(HourBucket::Peak, "peak")?;
    let off_peak = slice(HourBucket::OffPeak, "off-peak")?;

    let mut sums = [(0.0, 0.0, 0usize); 24];
    for p in preds {
        let s = &mut sums[p.timestamp.hour() as usize];
        s.0 += p.actual;
        s.1 += p.predicted;
        s.2 += 1;
    }
    let hourly = sums
        .iter()
        .enumerate()
        .map(|(h, &(a, f, n))| HourlyPoint {
            hour: h as u32,
            mean_actual: if n == 0 { f64::NAN } else { a / n as f64 },
            mean_predicted: if n == 0 { f64::NAN } else { f / n as f64 },
            n,
        })
        .collect();
    Ok(SliceReports {
        overall,
        peak,
        off_peak,
        hourly,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedModel {
    pub rank: usize,
    pub model: String,
    pub mae: f64,
    pub rmse: f64,
    pub mape: f64,
    /// Improvement of the best model over this one, in percent.
    pub mae_improvement: f64,
    pub rmse_improvement: f64,
    pub mape_improvement: f64,
}

pub fn improvement(best: f64, other: f64) -> f64 {
    if other == 0.0 {
        0.0
    } else {
        100.0 * (other - best) / other
    }
}

/// Ranks models by MAE (ascending) and expresses the best model's gain over
/// each of the others.
pub fn compare_models(reports: &[(String, MetricReport)]) -> Result<Vec<RankedModel>> {
    if reports.len() < 2 {
        return Err(Error::Config("comparison needs at least two models".into()));
    }
    let mut sorted: Vec<&(String, MetricReport)> = reports.iter().collect();
    sorted.sort_by(|a, b| a.1.mae.total_cmp(&b.1.mae));
    let best = &sorted[0].1;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, (name, r))| RankedModel {
            rank: i + 1,
            model: name.clone(),
            mae: r.mae,
            rmse: r.rmse,
            mape: r.mape,
            mae_improvement: improvement(best.mae, r.mae),
            rmse_improvement: improvement(best.rmse, r.rmse),
            mape_improvement: improvement(best.mape, r.mape),
        })
        .collect())
}

/// Forecasts every window of a split and returns MW predictions, ordered by
/// window then node.
pub fn predict_split(
    model: &Model,
    graph: &GraphInputs,
    table: &SplitTable,
    to_mw: impl Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<Vec<Prediction>> {
    let seq_len = model.config.seq_len;
    let mut out = Vec::new();
    for w in table.windows(seq_len) {
        let batch = table.batch(w, seq_len)?;
        let predicted = to_mw(&model.predict(graph, &batch)?)?;
        let actual = to_mw(batch.y.data())?;
        let t = table.target_time(w);
        for (s, state) in table.states.iter().enumerate() {
            out.push(Prediction {
                state: state.clone(),
                timestamp: t,
                actual: actual[s],
                predicted: predicted[s],
            });
        }
    }
    Ok(out)
}

pub fn write_predictions(path: &Path, preds: &[Prediction]) -> Result<()> {
    let mut w = create_writer(path)?;
    w.write_record(["state", "timestamp", "actual_mw", "predicted_mw"])
        .map_err(|e| Error::csv(path, e))?;
    for p in preds {
        w.write_record([
            p.state.clone(),
            format_timestamp(p.timestamp),
            fmt_f64(p.actual),
            fmt_f64(p.predicted),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    io::finish(w, path)
}

pub fn write_reports(path: &Path, reports: &[&MetricReport]) -> Result<()> {
    let mut w = create_writer(path)?;
    w.write_record(["model", "slice", "mae", "rmse", "mape", "n", "mape_excluded"])
        .map_err(|e| Error::csv(path, e))?;
    for r in reports {
        w.write_record([
            r.model.clone(),
            r.slice.clone(),
            fmt_f64(r.mae),
            fmt_f64(r.rmse),
            fmt_f64(r.mape),
            r.n.to_string(),
            r.mape_excluded.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    io::finish(w, path)
}

pub fn write_hourly(path: &Path, hourly: &[HourlyPoint]) -> Result<()> {
    let mut w = create_writer(path)?;
    w.write_record(["hour", "mean_actual_mw", "mean_predicted_mw", "n"])
        .map_err(|e| Error::csv(path, e))?;
    for p in hourly {
        w.write_record([
            p.hour.to_string(),
            fmt_f64(p.mean_actual),
            fmt_f64(p.mean_predicted),
            p.n.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    io::finish(w, path)
}

pub fn write_comparison(path: &Path, ranked: &[RankedModel]) -> Result<()> {
    let mut w = create_writer(path)?;
    w.write_record([
        "rank",
        "model",
        "mae",
        "rmse",
        "mape",
        "mae_improvement_pct",
        "rmse_improvement_pct",
        "mape_improvement_pct",
    ])
    .map_err(|e| Error::csv(path, e))?;
    for r in ranked {
        w.write_record([
            r.rank.to_string(),
            r.model.clone(),
            fmt_f64(r.mae),
            fmt_f64(r.rmse),
            fmt_f64(r.mape),
            fmt_f64(r.mae_improvement),
            fmt_f64(r.rmse_improvement),
            fmt_f64(r.mape_improvement),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    io::finish(w, path)
}

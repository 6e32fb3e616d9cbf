//! Processed split tables, their on-disk form, and node-aligned windows.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{format_timestamp, parse_timestamp, RobustScaler, SplitName, SplitSpec};
use crate::error::{Error, Result};
use crate::forecaster::Batch;
use crate::graph::PowerGraph;
use crate::io::{self, create_writer, fmt_f64};
use crate::tensor::Tensor;

pub const DATASET_FORMAT: &str = "gridcast-dataset/1";
pub const TARGET_COLUMN: &str = "target";
pub const LOAD_COLUMN: &str = "load_mw";

/// `target(t) = load(t+1)`; the final step has no target and is dropped.
pub fn make_targets(load: &[f64]) -> Vec<f64> {
    load.iter().skip(1).copied().collect()
}

/// Number of length-`seq_len` windows in a series of `len` targeted rows.
pub fn window_count(len: usize, seq_len: usize) -> usize {
    (len + 1).saturating_sub(seq_len.max(1))
}

/// Metadata written next to the processed split tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format: String,
    pub states: Vec<String>,
    pub feature_columns: Vec<String>,
    /// Columns scaled with the robust scaler; the rest (calendar) are raw.
    pub scaled_columns: Vec<String>,
    pub load_column: String,
    pub split_spec: SplitSpec,
    /// Hourly rows per state in each split.
    pub rows: BTreeMap<SplitName, usize>,
    pub seed: Option<u64>,
}

impl DatasetMeta {
    pub fn load_feature_index(&self) -> Result<usize> {
        self.feature_columns
            .iter()
            .position(|c| *c == self.load_column)
            .ok_or_else(|| Error::Data(format!("no `{}` feature", self.load_column)))
    }
}

/// One split as a dense, node-aligned panel: every state has a value for
/// every hour in `timestamps`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitTable {
    pub name: SplitName,
    pub states: Vec<String>,
    pub columns: Vec<String>,
    pub timestamps: Vec<NaiveDateTime>,
    /// Per state, row-major `[hour × feature]`.
    pub features: Vec<Vec<f64>>,
    /// Per state, next-hour scaled load; `NaN` on the final hour.
    pub targets: Vec<Vec<f64>>,
}

/// A window position: rows `end+1−T ..= end` for every node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub end: usize,
}

impl SplitTable {
    pub fn new(
        name: SplitName,
        states: Vec<String>,
        columns: Vec<String>,
        timestamps: Vec<NaiveDateTime>,
        features: Vec<Vec<f64>>,
        targets: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let (h, d) = (timestamps.len(), columns.len());
        if features.len() != states.len()
            || targets.len() != states.len()
            || features.iter().any(|f| f.len() != h * d)
            || targets.iter().any(|t| t.len() != h)
        {
            return Err(Error::Data(format!(
                "{} split: ragged panel",
                name.as_str()
            )));
        }
        if let Some(w) = timestamps.windows(2).find(|w| w[1] - w[0] != Duration::hours(1)) {
            return Err(Error::Data(format!(
                "{} split: timestamps not consecutive hours at {}",
                name.as_str(),
                format_timestamp(w[1])
            )));
        }
        Ok(Self {
            name,
            states,
            columns,
            timestamps,
            features,
            targets,
        })
    }

    pub fn hours(&self) -> usize {
        self.timestamps.len()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn node_count(&self) -> usize {
        self.states.len()
    }

    pub fn feature(&self, state: usize, hour: usize, col: usize) -> f64 {
        self.features[state][hour * self.width() + col]
    }

    /// Rows that carry a target, per state.
    pub fn targeted_rows(&self) -> usize {
        self.hours().saturating_sub(1)
    }

    pub fn windows(&self, seq_len: usize) -> Vec<Window> {
        let count = window_count(self.targeted_rows(), seq_len);
        if count == 0 {
            log::warn!(
                "{} split has {} targeted rows per state, fewer than seq_len {seq_len}; no windows",
                self.name.as_str(),
                self.targeted_rows()
            );
        }
        (0..count).map(|k| Window { end: k + seq_len - 1 }).collect()
    }

    /// Hour being forecast by a window.
    pub fn target_time(&self, w: Window) -> NaiveDateTime {
        self.timestamps[w.end] + Duration::hours(1)
    }

    pub fn batch(&self, w: Window, seq_len: usize) -> Result<Batch> {
        let d = self.width();
        let start = (w.end + 1)
            .checked_sub(seq_len)
            .ok_or_else(|| Error::Contract(format!("window end {} < seq_len", w.end)))?;
        let n = self.node_count();
        let mut x = Vec::with_capacity(n * seq_len * d);
        let mut y = Vec::with_capacity(n);
        for s in 0..n {
            x.extend_from_slice(&self.features[s][start * d..(w.end + 1) * d]);
            y.push(self.targets[s][w.end]);
        }
        Batch::new(
            (0..n).collect(),
            Tensor::new(vec![n, seq_len, d], x)?,
            Tensor::vector(y),
        )
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = create_writer(path)?;
        let mut header = vec!["state".to_owned(), "timestamp".to_owned()];
        header.extend(self.columns.iter().cloned());
        header.push(TARGET_COLUMN.to_owned());
        w.write_record(&header).map_err(|e| Error::csv(path, e))?;
        let d = self.width();
        for (s, state) in self.states.iter().enumerate() {
            for (h, t) in self.timestamps.iter().enumerate() {
                let mut rec = Vec::with_capacity(d + 3);
                rec.push(state.clone());
                rec.push(format_timestamp(*t));
                rec.extend(self.features[s][h * d..(h + 1) * d].iter().map(|&v| fmt_f64(v)));
                rec.push(fmt_f64(self.targets[s][h]));
                w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
            }
        }
        io::finish(w, path)
    }

    /// Reads a split table; rows are reordered to `states` order and must
    /// form a complete hourly panel.
    pub fn read_csv(
        path: &Path,
        name: SplitName,
        states: &[String],
        columns: &[String],
    ) -> Result<Self> {
        let file = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::csv(path, e))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| Error::csv(path, e))?
            .iter()
            .map(str::to_owned)
            .collect();
        let mut expected = vec!["state".to_owned(), "timestamp".to_owned()];
        expected.extend(columns.iter().cloned());
        expected.push(TARGET_COLUMN.to_owned());
        if let Some(missing) = expected.iter().find(|c| !headers.contains(c)) {
            return Err(Error::Schema {
                file,
                column: missing.clone(),
            });
        }
        if headers != expected {
            return Err(Error::Data(format!("{file}: unexpected column order")));
        }

        let index: HashMap<&str, usize> =
            states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let d = columns.len();
        let mut per_state: Vec<Vec<(NaiveDateTime, Vec<f64>, f64)>> = vec![Vec::new(); states.len()];
        let mut record = csv::StringRecord::new();
        let mut row = 0usize;
        while reader.read_record(&mut record).map_err(|e| Error::csv(path, e))? {
            row += 1;
            let bad = |what: String| Error::Data(format!("{file} row {row}: {what}"));
            let s = *index
                .get(&record[0])
                .ok_or_else(|| bad(format!("unknown state `{}`", &record[0])))?;
            let t = parse_timestamp(&record[1])
                .ok_or_else(|| bad(format!("invalid timestamp `{}`", &record[1])))?;
            let mut values = Vec::with_capacity(d + 1);
            for c in 2..d + 3 {
                let cell = &record[c];
                let v = if cell.is_empty() {
                    f64::NAN
                } else {
                    cell.parse::<f64>()
                        .map_err(|_| bad(format!("`{}` is not a number", headers[c])))?
                };
                values.push(v);
            }
            let target = values.pop().expect("target cell");
            if values.iter().any(|v| !v.is_finite()) {
                return Err(bad("missing feature value".into()));
            }
            per_state[s].push((t, values, target));
        }

        let mut timestamps: Option<Vec<NaiveDateTime>> = None;
        let mut features = Vec::with_capacity(states.len());
        let mut targets = Vec::with_capacity(states.len());
        for (s, mut rows) in per_state.into_iter().enumerate() {
            rows.sort_by_key(|r| r.0);
            let ts: Vec<NaiveDateTime> = rows.iter().map(|r| r.0).collect();
            match &timestamps {
                None => timestamps = Some(ts),
                Some(first) if *first != ts => {
                    return Err(Error::Data(format!(
                        "{file}: state {} is not aligned with {}",
                        states[s], states[0]
                    )))
                }
                Some(_) => {}
            }
            let mut f = Vec::with_capacity(rows.len() * d);
            let mut y = Vec::with_capacity(rows.len());
            for (_, v, target) in rows {
                f.extend(v);
                y.push(target);
            }
            features.push(f);
            targets.push(y);
        }
        let timestamps = timestamps.unwrap_or_default();
        if targets
            .iter()
            .any(|y| y.iter().take(y.len().saturating_sub(1)).any(|v| !v.is_finite()))
        {
            return Err(Error::Data(format!("{file}: missing target before the final hour")));
        }
        Self::new(name, states.to_vec(), columns.to_vec(), timestamps, features, targets)
    }
}

/// A processed-dataset directory.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub dir: PathBuf,
    pub graph: PowerGraph,
    pub meta: DatasetMeta,
    pub scaler: RobustScaler,
}

impl Dataset {
    pub const META_FILE: &'static str = "dataset.json";
    pub const SCALER_FILE: &'static str = "scaler.json";
    pub const NODES_FILE: &'static str = "nodes.csv";
    pub const EDGES_FILE: &'static str = "edges.csv";

    pub fn open(dir: &Path) -> Result<Self> {
        let meta: DatasetMeta = io::read_json(&dir.join(Self::META_FILE))?;
        if meta.format != DATASET_FORMAT {
            return Err(Error::Data(format!(
                "unsupported dataset format `{}`",
                meta.format
            )));
        }
        let scaler = io::read_json(&dir.join(Self::SCALER_FILE))?;
        let graph = PowerGraph::read_csv(&dir.join(Self::NODES_FILE), &dir.join(Self::EDGES_FILE))?;
        if graph.node_names() != meta.states {
            return Err(Error::Data(
                "graph nodes do not match dataset states".into(),
            ));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            graph,
            meta,
            scaler,
        })
    }

    pub fn load_split(&self, name: SplitName) -> Result<SplitTable> {
        SplitTable::read_csv(
            &self.dir.join(name.file_name()),
            name,
            &self.meta.states,
            &self.meta.feature_columns,
        )
    }

    /// Inverse-scales model outputs (scaled load) to MW.
    pub fn to_mw(&self, scaled: &[f64]) -> Result<Vec<f64>> {
        let mut out = scaled.to_vec();
        self.scaler.inverse(&self.meta.load_column, &mut out)?;
        Ok(out)
    }

    /// Window of `seq_len` hours ending at `end` for every node, drawn from
    /// the concatenated splits.
    pub fn window_at(&self, end: NaiveDateTime, seq_len: usize) -> Result<Batch> {
        let splits = SplitName::ALL
            .into_iter()
            .map(|n| self.load_split(n))
            .collect::<Result<Vec<_>>>()?;
        window_across(&splits, end, seq_len)
    }
}

/// Builds an unlabeled window ending at `end` from whichever splits hold
/// each hour; errors list every missing hour.
pub fn window_across(splits: &[SplitTable], end: NaiveDateTime, seq_len: usize) -> Result<Batch> {
    let mut located: HashMap<NaiveDateTime, (usize, usize)> = HashMap::new();
    for (k, s) in splits.iter().enumerate() {
        for (h, t) in s.timestamps.iter().enumerate() {
            located.insert(*t, (k, h));
        }
    }
    let hours: Vec<NaiveDateTime> = (0..seq_len)
        .rev()
        .map(|back| end - Duration::hours(back as i64))
        .collect();
    let missing: Vec<String> = hours
        .iter()
        .filter(|t| !located.contains_key(t))
        .map(|t| format_timestamp(*t))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "incomplete window ending {}: missing {}",
            format_timestamp(end),
            missing.join(", ")
        )));
    }
    let first = splits
        .first()
        .ok_or_else(|| Error::Data("no splits loaded".into()))?;
    let (n, d) = (first.node_count(), first.width());
    let mut x = Vec::with_capacity(n * seq_len * d);
    for s in 0..n {
        for t in &hours {
            let (k, h) = located[t];
            x.extend_from_slice(&splits[k].features[s][h * d..(h + 1) * d]);
        }
    }
    Batch::new(
        (0..n).collect(),
        Tensor::new(vec![n, seq_len, d], x)?,
        Tensor::zeros(&[n]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(hours: usize, states: usize) -> SplitTable {
        let t0 = parse_timestamp("2019-01-01 00:00").unwrap();
        let timestamps: Vec<_> = (0..hours).map(|h| t0 + Duration::hours(h as i64)).collect();
        let features: Vec<Vec<f64>> = (0..states)
            .map(|s| {
                (0..hours)
                    .flat_map(|h| [h as f64 + 100.0 * s as f64, -(h as f64)])
                    .collect()
            })
            .collect();
        let targets = features
            .iter()
            .map(|f| {
                let load: Vec<f64> = f.chunks(2).map(|r| r[0]).collect();
                let mut t = make_targets(&load);
                t.push(f64::NAN);
                t
            })
            .collect();
        SplitTable::new(
            SplitName::Train,
            (0..states).map(|s| format!("S{s}")).collect(),
            vec!["load_mw".into(), "other".into()],
            timestamps,
            features,
            targets,
        )
        .unwrap()
    }

    #[test]
    fn target_examples() {
        assert_eq!(make_targets(&[5.0, 7.0, 9.0]), vec![7.0, 9.0]);
        assert!(make_targets(&[5.0]).is_empty());
        assert!(make_targets(&[]).is_empty());
    }

    #[test]
    fn window_counts() {
        assert_eq!(window_count(24, 24), 1);
        assert_eq!(window_count(26, 24), 3);
        assert_eq!(window_count(23, 24), 0);
        let t = toy(10, 2);
        assert_eq!(t.windows(3).len(), window_count(9, 3));
        assert!(toy(3, 2).windows(3).is_empty());
    }

    #[test]
    fn window_target_is_next_load() {
        let t = toy(10, 3);
        for w in t.windows(4) {
            let b = t.batch(w, 4).unwrap();
            assert_eq!(b.x.shape(), &[3, 4, 2]);
            for s in 0..3 {
                let last = b.x.data()[(s * 4 + 3) * 2];
                assert_eq!(last, t.feature(s, w.end, 0));
                assert_eq!(b.y.data()[s], t.feature(s, w.end + 1, 0));
            }
            assert_eq!(t.target_time(w), t.timestamps[w.end + 1]);
        }
    }

    #[test]
    fn csv_round_trip_reorders_states() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.csv");
        let t = toy(6, 3);
        t.write_csv(&path).unwrap();
        let back = SplitTable::read_csv(&path, SplitName::Train, &t.states, &t.columns).unwrap();
        assert_eq!(back.features, t.features);
        assert_eq!(back.timestamps, t.timestamps);
        let reversed: Vec<String> = t.states.iter().rev().cloned().collect();
        let r = SplitTable::read_csv(&path, SplitName::Train, &reversed, &t.columns).unwrap();
        assert_eq!(r.features[0], t.features[2]);
        let err = SplitTable::read_csv(
            &path,
            SplitName::Train,
            &t.states,
            &["load_mw".into(), "missing".into()],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Schema { column, .. } if column == "missing"));
    }

    #[test]
    fn window_across_splits_and_gaps() {
        let a = toy(6, 2);
        let mut b = toy(12, 2);
        b.name = SplitName::Val;
        b.timestamps.drain(..6);
        for f in &mut b.features {
            f.drain(..12);
        }
        for y in &mut b.targets {
            y.drain(..6);
        }
        let end = a.timestamps[5] + Duration::hours(2);
        let w = window_across(&[a.clone(), b.clone()], end, 4).unwrap();
        let direct = toy(12, 2).batch(Window { end: 7 }, 4).unwrap();
        assert_eq!(w.x, direct.x);
        let err = window_across(&[b], end, 4).unwrap_err().to_string();
        assert!(err.contains("2019-01-01 04:00") && err.contains("2019-01-01 05:00"), "{err}");
    }
}

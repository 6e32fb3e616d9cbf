//! Raw tables to processed splits: consolidate weather, fill gaps, clip PV,
//! scale on the training split, split chronologically, attach targets.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::{Duration, NaiveDateTime};

use super::calendar::{calendar_features, CALENDAR_COLUMNS};
use super::clean::{clip_negative, interpolate_missing, is_pv_column};
use super::dataset::{DatasetMeta, DATASET_FORMAT, LOAD_COLUMN};
use super::weather::WeatherGrid;
use super::{format_timestamp, parse_timestamp, Dataset, RobustScaler, SplitName, SplitSpec, SplitTable};
use crate::error::{Error, Result};
use crate::graph::PowerGraph;
use crate::io::{self, Table};

pub const SEQUENCE_FILE: &str = "sequence.csv";
pub const WEATHER_FILE: &str = "weather.csv";

/// Output of [`preprocess`], ready to be written as a dataset directory.
#[derive(Clone, Debug)]
pub struct Processed {
    pub graph: PowerGraph,
    pub meta: DatasetMeta,
    pub scaler: RobustScaler,
    pub splits: Vec<SplitTable>,
}

impl Processed {
    pub fn split(&self, name: SplitName) -> &SplitTable {
        self.splits
            .iter()
            .find(|s| s.name == name)
            .expect("all splits present")
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        io::ensure_dir(dir)?;
        self.graph
            .write_csv(&dir.join(Dataset::NODES_FILE), &dir.join(Dataset::EDGES_FILE))?;
        for s in &self.splits {
            s.write_csv(&dir.join(s.name.file_name()))?;
        }
        io::write_json(&dir.join(Dataset::SCALER_FILE), &self.scaler)?;
        io::write_json(&dir.join(Dataset::META_FILE), &self.meta)
    }
}

/// Dense `[state][column][hour]` panel on a common hourly index.
struct Panel {
    start: NaiveDateTime,
    hours: usize,
    columns: Vec<String>,
    values: Vec<Vec<Vec<f64>>>,
}

impl Panel {
    fn hour_index(&self, t: NaiveDateTime) -> Option<usize> {
        let h = (t - self.start).num_hours();
        (h >= 0 && (h as usize) < self.hours).then_some(h as usize)
    }

    fn time(&self, h: usize) -> NaiveDateTime {
        self.start + Duration::hours(h as i64)
    }
}

fn hourly(t: NaiveDateTime) -> bool {
    t.and_utc().timestamp() % 3600 == 0
}

fn state_index(graph: &PowerGraph) -> HashMap<String, usize> {
    graph
        .node_names()
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect()
}

fn parse_time(table: &Table, row: usize, col: usize) -> Result<NaiveDateTime> {
    let cell = &table.rows[row][col];
    let t = parse_timestamp(cell).ok_or_else(|| {
        Error::Data(format!(
            "{} row {}: invalid timestamp `{cell}`",
            table.file_name(),
            row + 1
        ))
    })?;
    if !hourly(t) {
        return Err(Error::Data(format!(
            "{} row {}: timestamp {cell} is not hour-aligned",
            table.file_name(),
            row + 1
        )));
    }
    Ok(t)
}

/// Reads `sequence.csv` into a panel whose columns are the sequence
/// features followed by the load.
fn read_sequences(path: &Path, graph: &PowerGraph) -> Result<Panel> {
    let table = Table::read(path)?;
    let state_col = table.column("state")?;
    let time_col = table.column("timestamp")?;
    let load_col = table.column(LOAD_COLUMN)?;
    let mut feature_cols: Vec<usize> = (0..table.headers.len())
        .filter(|&c| c != state_col && c != time_col && c != load_col)
        .collect();
    feature_cols.push(load_col);

    let states = state_index(graph);
    let mut times = Vec::with_capacity(table.rows.len());
    for r in 0..table.rows.len() {
        times.push(parse_time(&table, r, time_col)?);
    }
    let (Some(&start), Some(&end)) = (times.iter().min(), times.iter().max()) else {
        return Err(Error::Data(format!("{} has no rows", table.file_name())));
    };
    let hours = (end - start).num_hours() as usize + 1;
    let mut panel = Panel {
        start,
        hours,
        columns: feature_cols.iter().map(|&c| table.headers[c].clone()).collect(),
        values: vec![vec![vec![f64::NAN; hours]; feature_cols.len()]; states.len()],
    };
    let mut seen = vec![vec![false; hours]; states.len()];
    for (r, t) in times.into_iter().enumerate() {
        let name = &table.rows[r][state_col];
        let s = *states.get(name).ok_or_else(|| {
            Error::Data(format!(
                "{} row {}: state `{name}` is not a graph node",
                table.file_name(),
                r + 1
            ))
        })?;
        let h = panel.hour_index(t).expect("within range");
        if std::mem::replace(&mut seen[s][h], true) {
            return Err(Error::Data(format!(
                "{} row {}: duplicate row for {name} at {}",
                table.file_name(),
                r + 1,
                format_timestamp(t)
            )));
        }
        for (k, &c) in feature_cols.iter().enumerate() {
            panel.values[s][k][h] = table.number(r, c)?;
        }
    }
    if let Some(s) = seen.iter().position(|row| !row.contains(&true)) {
        return Err(Error::Data(format!(
            "{}: no rows for state {}",
            table.file_name(),
            graph.node_names()[s]
        )));
    }
    Ok(panel)
}

/// Streams the wide station table `station_id,state,timestamp,<variables>`
/// into per-state mean/std columns on the panel's hourly index.
fn read_weather(path: &Path, graph: &PowerGraph, panel: &Panel) -> Result<(Vec<String>, Vec<Vec<Vec<f64>>>)> {
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
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Schema {
            file: file.clone(),
            column: name.to_owned(),
        })
    };
    let (station_col, state_col, time_col) = (find("station_id")?, find("state")?, find("timestamp")?);
    let var_cols: Vec<usize> = (0..headers.len())
        .filter(|c| ![station_col, state_col, time_col].contains(c))
        .collect();
    let states = state_index(graph);
    let mut grid = WeatherGrid::new(states.len(), panel.hours, var_cols.len());
    let mut record = csv::StringRecord::new();
    let mut row = 0usize;
    while reader.read_record(&mut record).map_err(|e| Error::csv(path, e))? {
        row += 1;
        let bad = |what: String| Error::Data(format!("{file} row {row}: {what}"));
        let s = *states
            .get(&record[state_col])
            .ok_or_else(|| bad(format!("state `{}` is not a graph node", &record[state_col])))?;
        let t = parse_timestamp(&record[time_col])
            .filter(|t| hourly(*t))
            .ok_or_else(|| bad(format!("invalid timestamp `{}`", &record[time_col])))?;
        let Some(h) = panel.hour_index(t) else {
            continue;
        };
        for (v, &c) in var_cols.iter().enumerate() {
            let cell = &record[c];
            let value = if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                f64::NAN
            } else {
                cell.parse()
                    .map_err(|_| bad(format!("`{}` is not a number", headers[c])))?
            };
            grid.push(s, h, v, value);
        }
    }
    let mut names = Vec::with_capacity(2 * var_cols.len());
    for &c in &var_cols {
        names.push(format!("{}_mean", headers[c]));
        names.push(format!("{}_std", headers[c]));
    }
    let values = (0..states.len())
        .map(|s| {
            (0..var_cols.len())
                .flat_map(|v| {
                    let (mean, std) = grid.series(s, v);
                    [mean, std]
                })
                .collect()
        })
        .collect();
    Ok((names, values))
}

/// Runs the full preprocessing on a raw directory holding `nodes.csv`,
/// `edges.csv`, `sequence.csv` and `weather.csv`.
pub fn preprocess(raw: &Path, spec: &SplitSpec, seed: Option<u64>) -> Result<Processed> {
    spec.validate()?;
    let graph = PowerGraph::read_csv(&raw.join(Dataset::NODES_FILE), &raw.join(Dataset::EDGES_FILE))?;
    let mut panel = read_sequences(&raw.join(SEQUENCE_FILE), &graph)?;
    let (weather_cols, weather) = read_weather(&raw.join(WEATHER_FILE), &graph, &panel)?;

    let mut columns = weather_cols;
    columns.append(&mut panel.columns);
    for (s, w) in weather.into_iter().enumerate() {
        let seq = std::mem::take(&mut panel.values[s]);
        panel.values[s] = w.into_iter().chain(seq).collect();
    }
    panel.columns = columns;

    let names = graph.node_names();
    for (s, state) in names.iter().enumerate() {
        for (c, column) in panel.columns.iter().enumerate() {
            let series = &mut panel.values[s][c];
            interpolate_missing(series, state, column)?;
            if is_pv_column(column) {
                clip_negative(series);
            }
        }
    }

    let mut hours_of: BTreeMap<SplitName, Vec<usize>> = BTreeMap::new();
    for h in 0..panel.hours {
        if let Some(name) = spec.locate(panel.time(h)) {
            hours_of.entry(name).or_default().push(h);
        }
    }
    for name in SplitName::ALL {
        if !hours_of.contains_key(&name) {
            return Err(Error::Data(format!(
                "{} interval covers no available timestamps",
                name.as_str()
            )));
        }
    }

    let train_hours = &hours_of[&SplitName::Train];
    let train_values: Vec<Vec<f64>> = (0..panel.columns.len())
        .map(|c| {
            panel
                .values
                .iter()
                .flat_map(|cols| train_hours.iter().map(move |&h| cols[c][h]))
                .collect()
        })
        .collect();
    let scaler = RobustScaler::fit(
        panel
            .columns
            .iter()
            .map(String::as_str)
            .zip(train_values.iter().map(Vec::as_slice)),
    )?;
    for state in &mut panel.values {
        for (c, column) in panel.columns.iter().enumerate() {
            scaler.transform(column, &mut state[c])?;
        }
    }

    let load_col = panel.columns.len() - 1;
    let scaled_columns = panel.columns.clone();
    let mut feature_columns = panel.columns.clone();
    feature_columns.extend(CALENDAR_COLUMNS.iter().map(|c| c.to_string()));
    let d = feature_columns.len();

    let mut splits = Vec::new();
    let mut rows = BTreeMap::new();
    for name in SplitName::ALL {
        let hours = &hours_of[&name];
        let timestamps: Vec<NaiveDateTime> = hours.iter().map(|&h| panel.time(h)).collect();
        let calendar: Vec<[f64; 11]> = timestamps.iter().map(|&t| calendar_features(t)).collect();
        let mut features = Vec::with_capacity(names.len());
        let mut targets = Vec::with_capacity(names.len());
        for state in &panel.values {
            let mut f = Vec::with_capacity(hours.len() * d);
            for (k, &h) in hours.iter().enumerate() {
                f.extend(state.iter().map(|col| col[h]));
                f.extend_from_slice(&calendar[k]);
            }
            features.push(f);
            let load: Vec<f64> = hours.iter().map(|&h| state[load_col][h]).collect();
            let mut y = super::make_targets(&load);
            y.push(f64::NAN);
            targets.push(y);
        }
        rows.insert(name, hours.len());
        splits.push(SplitTable::new(
            name,
            names.clone(),
            feature_columns.clone(),
            timestamps,
            features,
            targets,
        )?);
    }

    let meta = DatasetMeta {
        format: DATASET_FORMAT.to_owned(),
        states: names,
        feature_columns,
        scaled_columns,
        load_column: LOAD_COLUMN.to_owned(),
        split_spec: *spec,
        rows,
        seed,
    };
    Ok(Processed {
        graph,
        meta,
        scaler,
        splits,
    })
}

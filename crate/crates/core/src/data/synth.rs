//! Synthetic grid, weather and load data with known spatial coupling.
//!
//! Load at node `i` and hour `t`:
//!
//! ```text
//! load_i(t) = base_i · (1 + a·daily(t) + b·weekly(t) + c·annual(t) + holiday(t)
//!                       + κ·temp_anomaly_i(t) + σ·(s_i(t) + λ·mean_{j∈N(i)} s_j(t)))
//!             + white noise
//! ```
//!
//! where `s_i` is a unit-variance AR(1) shock private to the node. With
//! `λ = 0` the stochastic parts of different nodes are independent.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDateTime, Timelike};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::calendar::is_holiday;
use super::pipeline::{SEQUENCE_FILE, WEATHER_FILE};
use super::{format_timestamp, parse_timestamp, timestamp_serde, Dataset};
use crate::error::{Error, Result};
use crate::graph::{EdgeRecord, NodeRecord, PowerGraph};
use crate::io::{self, create_writer, fmt_f64};
use crate::rng::{substream, Stream};

const STATE_CODES: [&str; 27] = [
    "AC", "AL", "AM", "AP", "BA", "CE", "DF", "ES", "GO", "MA", "MG", "MS", "MT", "PA", "PB", "PE",
    "PI", "PR", "RJ", "RN", "RO", "RR", "RS", "SC", "SE", "SP", "TO",
];

pub const WEATHER_VARIABLES: [&str; 6] = [
    "air_temperature",
    "pressure",
    "rainfall",
    "global_radiation",
    "relative_humidity",
    "wind_speed",
];

pub const SEQUENCE_COLUMNS: [&str; 7] = [
    "pv_mw",
    "onshore_wind_mw",
    "offshore_wind_mw",
    "population",
    "gdp",
    "plant_capacity_mw",
    "load_mw",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub nodes: usize,
    pub lines: usize,
    pub days: usize,
    #[serde(with = "timestamp_serde")]
    pub start: NaiveDateTime,
    pub base_load_min: f64,
    pub base_load_max: f64,
    pub daily_amplitude: f64,
    pub weekly_amplitude: f64,
    pub annual_amplitude: f64,
    /// Relative load change per degree of temperature anomaly.
    pub temperature_sensitivity: f64,
    /// Spatial coupling λ of neighbor shocks.
    pub coupling: f64,
    /// Scale σ of the AR(1) shock.
    pub noise: f64,
    /// AR(1) coefficient of the shock.
    pub persistence: f64,
    /// Fraction of cells left empty in the raw tables.
    pub missing_rate: f64,
    pub stations_per_state: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            nodes: 27,
            lines: 38,
            days: 731,
            start: parse_timestamp("2019-01-01 00:00").expect("valid literal"),
            base_load_min: 800.0,
            base_load_max: 12000.0,
            daily_amplitude: 0.25,
            weekly_amplitude: 0.06,
            annual_amplitude: 0.08,
            temperature_sensitivity: 0.015,
            coupling: 0.3,
            noise: 0.03,
            persistence: 0.9,
            missing_rate: 0.002,
            stations_per_state: 2,
        }
    }
}

impl SynthConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn hours(&self) -> usize {
        self.days * 24
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.nodes == 0 || self.days == 0 || self.stations_per_state == 0 {
            return fail("nodes, days and stations_per_state must be positive".into());
        }
        if self.lines + 1 < self.nodes {
            return fail(format!(
                "{} lines cannot connect {} nodes (need at least {})",
                self.lines,
                self.nodes,
                self.nodes - 1
            ));
        }
        let max_lines = self.nodes * (self.nodes - 1) / 2;
        if self.lines > max_lines {
            return fail(format!(
                "{} lines exceed the {max_lines} distinct pairs of {} nodes",
                self.lines, self.nodes
            ));
        }
        if !(0.0..1.0).contains(&self.persistence) {
            return fail(format!("persistence {} outside [0, 1)", self.persistence));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return fail(format!("missing_rate {} outside [0, 1)", self.missing_rate));
        }
        if !(0.0 < self.base_load_min && self.base_load_min <= self.base_load_max) {
            return fail("base load range must be positive and ordered".into());
        }
        if !hourly_aligned(self.start) {
            return fail("start must be hour-aligned".into());
        }
        Ok(())
    }
}

fn hourly_aligned(t: NaiveDateTime) -> bool {
    t.minute() == 0 && t.second() == 0 && t.nanosecond() == 0
}

#[derive(Clone, Debug, PartialEq)]
pub struct Station {
    pub id: String,
    pub state: usize,
    /// `[variable][hour]`, `NaN` where missing.
    pub values: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub graph: PowerGraph,
    pub timestamps: Vec<NaiveDateTime>,
    /// `[node][column][hour]` in [`SEQUENCE_COLUMNS`] order, `NaN` where missing.
    pub sequences: Vec<Vec<Vec<f64>>>,
    pub stations: Vec<Station>,
}

impl SyntheticData {
    pub fn load(&self, node: usize) -> &[f64] {
        &self.sequences[node][SEQUENCE_COLUMNS.len() - 1]
    }

    /// Writes `nodes.csv`, `edges.csv`, `sequence.csv` and `weather.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        io::ensure_dir(dir)?;
        self.graph
            .write_csv(&dir.join(Dataset::NODES_FILE), &dir.join(Dataset::EDGES_FILE))?;

        let path = dir.join(SEQUENCE_FILE);
        let mut w = create_writer(&path)?;
        let mut header = vec!["state", "timestamp"];
        header.extend(SEQUENCE_COLUMNS);
        w.write_record(&header).map_err(|e| Error::csv(&path, e))?;
        let names = self.graph.node_names();
        let stamps: Vec<String> = self.timestamps.iter().map(|t| format_timestamp(*t)).collect();
        for (i, name) in names.iter().enumerate() {
            for (h, stamp) in stamps.iter().enumerate() {
                let mut rec = vec![name.clone(), stamp.clone()];
                rec.extend(self.sequences[i].iter().map(|col| fmt_f64(col[h])));
                w.write_record(&rec).map_err(|e| Error::csv(&path, e))?;
            }
        }
        io::finish(w, &path)?;

        let path = dir.join(WEATHER_FILE);
        let mut w = create_writer(&path)?;
        let mut header = vec!["station_id", "state", "timestamp"];
        header.extend(WEATHER_VARIABLES);
        w.write_record(&header).map_err(|e| Error::csv(&path, e))?;
        for st in &self.stations {
            for (h, stamp) in stamps.iter().enumerate() {
                let mut rec = vec![st.id.clone(), names[st.state].clone(), stamp.clone()];
                rec.extend(st.values.iter().map(|col| fmt_f64(col[h])));
                w.write_record(&rec).map_err(|e| Error::csv(&path, e))?;
            }
        }
        io::finish(w, &path)
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Great-circle distance in km.
fn haversine(a: &NodeRecord, b: &NodeRecord) -> f64 {
    let (la1, la2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let dlat = la2 - la1;
    let dlon = (b.longitude - a.longitude).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + la1.cos() * la2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * 6371.0 * h.sqrt().asin()
}

fn node_name(i: usize) -> String {
    STATE_CODES
        .get(i)
        .map_or_else(|| format!("S{i:02}"), |s| (*s).to_owned())
}

fn generate_graph(c: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<PowerGraph> {
    let nodes: Vec<NodeRecord> = (0..c.nodes)
        .map(|i| {
            let offshore = if rng.gen_bool(0.5) {
                0.0
            } else {
                round3(rng.gen_range(0.2..2.0))
            };
            NodeRecord {
                name: node_name(i),
                pv_potential: round3(rng.gen_range(0.5..3.0)),
                onshore_wind_potential: round3(rng.gen_range(0.0..4.0)),
                offshore_wind_potential: offshore,
                longitude: round3(rng.gen_range(-73.0..-35.0)),
                latitude: round3(rng.gen_range(-33.0..5.0)),
            }
        })
        .collect();
    let n = nodes.len();
    let dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| haversine(&nodes[i], &nodes[j])).collect())
        .collect();
    let mut linked = vec![vec![false; n]; n];
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(c.lines);
    let link = |i: usize, j: usize, linked: &mut Vec<Vec<bool>>, pairs: &mut Vec<(usize, usize)>| {
        linked[i][j] = true;
        linked[j][i] = true;
        pairs.push((i.min(j), i.max(j)));
    };
    for i in 1..n {
        let j = (0..i)
            .min_by(|&a, &b| dist[i][a].total_cmp(&dist[i][b]))
            .expect("i >= 1");
        link(i, j, &mut linked, &mut pairs);
    }
    while pairs.len() < c.lines {
        let i = rng.gen_range(0..n);
        let nearest = (0..n)
            .filter(|&j| j != i && !linked[i][j])
            .min_by(|&a, &b| dist[i][a].total_cmp(&dist[i][b]));
        if let Some(j) = nearest {
            link(i, j, &mut linked, &mut pairs);
        }
    }

    let mut edges: Vec<EdgeRecord> = pairs
        .iter()
        .map(|&(i, j)| {
            let length = round3((1.2 * dist[i][j]).clamp(50.0, 1500.0));
            let dc = length > 900.0 || rng.gen_bool(0.15);
            EdgeRecord {
                source: nodes[i].name.clone(),
                target: nodes[j].name.clone(),
                capacity_mw: round3(rng.gen_range(100.0..2000.0)),
                efficiency: round3((0.99 - 0.00005 * length).clamp(0.9, 0.99)),
                length_km: length,
                carrier: if dc { "DC" } else { "AC" }.to_owned(),
            }
        })
        .collect();
    if edges.len() >= 2 {
        let by_length = |a: &&mut EdgeRecord, b: &&mut EdgeRecord| a.length_km.total_cmp(&b.length_km);
        if edges.iter().all(|e| e.carrier == "AC") {
            edges.iter_mut().max_by(by_length).expect("nonempty").carrier = "DC".into();
        } else if edges.iter().all(|e| e.carrier == "DC") {
            edges.iter_mut().min_by(by_length).expect("nonempty").carrier = "AC".into();
        }
    }
    PowerGraph::new(nodes, edges)
}

/// Two-peak daily profile, zero-mean over the day, peak magnitude 1.
fn daily_profile() -> [f64; 24] {
    let mut p = [0.0; 24];
    for (h, v) in p.iter_mut().enumerate() {
        let h = h as f64;
        *v = 0.7 * (-(h - 8.5).powi(2) / 6.0).exp() + (-(h - 18.5).powi(2) / 5.0).exp();
    }
    let mean = p.iter().sum::<f64>() / 24.0;
    p.iter_mut().for_each(|v| *v -= mean);
    let peak = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    p.iter_mut().for_each(|v| *v /= peak);
    p
}

struct Ar1 {
    phi: f64,
    scale: f64,
    state: f64,
}

impl Ar1 {
    /// Stationary AR(1) with marginal standard deviation `std`.
    fn new(phi: f64, std: f64, rng: &mut ChaCha8Rng) -> Self {
        Self {
            phi,
            scale: std * (1.0 - phi * phi).sqrt(),
            state: std * normal(rng),
        }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        self.state = self.phi * self.state + self.scale * normal(rng);
        self.state
    }
}

/// Deterministic given `seed`: every draw comes from the `synth` substream.
pub fn generate_synthetic(c: &SynthConfig, seed: u64) -> Result<SyntheticData> {
    c.validate()?;
    let mut rng = substream(seed, Stream::Synth);
    let graph = generate_graph(c, &mut rng)?;
    let n = graph.node_count();
    let hours = c.hours();
    let timestamps: Vec<NaiveDateTime> =
        (0..hours).map(|h| c.start + Duration::hours(h as i64)).collect();
    let neighbors: Vec<Vec<usize>> = (0..n).map(|i| graph.neighbors(i)).collect();

    let base: Vec<f64> = (0..n)
        .map(|_| rng.gen_range(c.base_load_min..=c.base_load_max))
        .collect();
    let population: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.gen_range(5.5..7.6))).collect();
    let gdp_per_capita: Vec<f64> = (0..n).map(|_| rng.gen_range(15_000.0..60_000.0)).collect();

    // Weather state per node: temperature anomaly, pressure, rain, cloud, humidity, wind.
    let mut temp_anom: Vec<Ar1> = (0..n).map(|_| Ar1::new(0.97, 2.0, &mut rng)).collect();
    let mut press: Vec<Ar1> = (0..n).map(|_| Ar1::new(0.98, 4.0, &mut rng)).collect();
    let mut rain: Vec<Ar1> = (0..n).map(|_| Ar1::new(0.9, 1.0, &mut rng)).collect();
    let mut cloud: Vec<Ar1> = (0..n).map(|_| Ar1::new(0.95, 1.0, &mut rng)).collect();
    let mut humid: Vec<Ar1> = (0..n).map(|_| Ar1::new(0.95, 8.0, &mut rng)).collect();
    let mut wind: Vec<Ar1> = (0..n).map(|_| Ar1::new(0.96, 1.0, &mut rng)).collect();
    let mut offshore_wind: Vec<Ar1> = (0..n).map(|_| Ar1::new(0.96, 1.0, &mut rng)).collect();
    let mut shock: Vec<Ar1> = (0..n)
        .map(|_| Ar1::new(c.persistence, 1.0, &mut rng))
        .collect();

    let daily = daily_profile();
    let nodes = graph.nodes();
    let mut weather = vec![vec![vec![0.0; hours]; WEATHER_VARIABLES.len()]; n];
    let mut seq = vec![vec![vec![0.0; hours]; SEQUENCE_COLUMNS.len()]; n];
    let mut shocks = vec![0.0; n];
    for (h, t) in timestamps.iter().enumerate() {
        let hour = t.hour() as f64;
        let doy = t.ordinal0() as f64;
        let annual = (TAU * (doy - 15.0) / 365.25).cos();
        let sun = (PI * (hour - 6.0) / 12.0).sin().max(0.0);
        let weekly = if t.weekday().num_days_from_monday() >= 5 { -1.0 } else { 0.4 };
        let holiday = if is_holiday(*t) { -1.5 * c.weekly_amplitude } else { 0.0 };
        for (i, s) in shocks.iter_mut().enumerate() {
            *s = shock[i].step(&mut rng);
        }
        let year = f64::from(t.year() - c.start.year());
        for i in 0..n {
            let lat = nodes[i].latitude;
            let anomaly = temp_anom[i].step(&mut rng);
            let temp = 26.0 + 0.25 * lat + 4.0 * annual
                + 4.0 * (TAU * (hour - 9.0) / 24.0).sin()
                + anomaly;
            let cloudiness = 1.0 / (1.0 + (-cloud[i].step(&mut rng)).exp());
            let radiation = 1000.0 * sun * (1.0 - 0.7 * cloudiness);
            let w = &mut weather[i];
            w[0][h] = temp;
            w[1][h] = 1013.0 + press[i].step(&mut rng);
            w[2][h] = (rain[i].step(&mut rng) - 1.0).max(0.0) * 2.0 * cloudiness;
            w[3][h] = radiation;
            w[4][h] = (70.0 - 1.5 * (temp - 26.0 - 0.25 * lat) + humid[i].step(&mut rng))
                .clamp(5.0, 100.0);
            let wind_level = wind[i].step(&mut rng);
            w[5][h] = (3.5 + 1.5 * wind_level).max(0.0);

            let coupled = if neighbors[i].is_empty() {
                0.0
            } else {
                neighbors[i].iter().map(|&j| shocks[j]).sum::<f64>() / neighbors[i].len() as f64
            };
            let relative = 1.0
                + c.daily_amplitude * daily[t.hour() as usize]
                + c.weekly_amplitude * weekly
                + c.annual_amplitude * annual
                + holiday
                + c.temperature_sensitivity * anomaly
                + c.noise * (shocks[i] + c.coupling * coupled);
            let load = base[i] * relative + 0.005 * base[i] * normal(&mut rng);

            let pv_cap = 200.0 * nodes[i].pv_potential;
            let pv = pv_cap * radiation / 1000.0 + 0.01 * pv_cap * normal(&mut rng);
            let onshore = 300.0 * nodes[i].onshore_wind_potential
                * (0.35 + 0.25 * wind_level).clamp(0.0, 1.0);
            let off_level = offshore_wind[i].step(&mut rng);
            let offshore = 300.0 * nodes[i].offshore_wind_potential
                * (0.45 + 0.25 * off_level).clamp(0.0, 1.0);
            let pop = population[i] * 1.008f64.powf(year);
            let s = &mut seq[i];
            s[0][h] = pv;
            s[1][h] = onshore;
            s[2][h] = offshore;
            s[3][h] = pop.round();
            s[4][h] = (pop * gdp_per_capita[i] * 1.02f64.powf(year) / 1e6).round();
            s[5][h] = (1.3 * base[i] + pv_cap + 300.0 * (nodes[i].onshore_wind_potential
                + nodes[i].offshore_wind_potential))
                .round();
            s[6][h] = load;
        }
    }

    let single_station = if n > 1 { 1 } else { 0 };
    let mut stations = Vec::new();
    let noise_scale = [0.5, 0.8, 0.2, 20.0, 3.0, 0.4];
    for (i, state_weather) in weather.iter().enumerate() {
        let count = if i == single_station { 1 } else { c.stations_per_state };
        for k in 0..count {
            let values = state_weather
                .iter()
                .zip(noise_scale)
                .enumerate()
                .map(|(v, (series, scale))| {
                    series
                        .iter()
                        .map(|&x| {
                            let mut obs = x + scale * normal(&mut rng);
                            if v == 2 || v == 3 || v == 5 {
                                obs = obs.max(0.0);
                            }
                            if rng.gen_bool(c.missing_rate) {
                                f64::NAN
                            } else {
                                round3(obs)
                            }
                        })
                        .collect()
                })
                .collect();
            stations.push(Station {
                id: format!("{}{:02}", node_name(i), k + 1),
                state: i,
                values,
            });
        }
    }
    for node in &mut seq {
        for (col, series) in node.iter_mut().enumerate() {
            for v in series.iter_mut() {
                // Socio-economic columns are annual statistics and always present.
                if col < 3 || col == 6 {
                    *v = if rng.gen_bool(c.missing_rate) { f64::NAN } else { round3(*v) };
                }
            }
        }
    }

    Ok(SyntheticData {
        graph,
        timestamps,
        sequences: seq,
        stations,
    })
}

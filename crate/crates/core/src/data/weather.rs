//! Station-level weather consolidated into per-state mean and spread.

use std::collections::BTreeMap;

use chrono::NaiveDateTime;

#[derive(Clone, Debug, PartialEq)]
pub struct RawWeatherRecord {
    pub station_id: String,
    pub state: String,
    pub timestamp: NaiveDateTime,
    pub variable: String,
    pub value: f64,
}

/// Running mean and squared deviation (Welford).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    count: u32,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / f64::from(self.count);
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    /// Mean, or `NaN` when nothing was observed.
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Sample standard deviation; zero for a single observation.
    pub fn std(&self) -> f64 {
        match self.count {
            0 => f64::NAN,
            1 => 0.0,
            n => (self.m2 / f64::from(n - 1)).sqrt(),
        }
    }
}

/// Mean and sample std across stations for every (state, timestamp, variable).
/// Missing values (`NaN`) are skipped.
pub fn consolidate_weather(
    records: impl IntoIterator<Item = RawWeatherRecord>,
) -> BTreeMap<(String, NaiveDateTime, String), (f64, f64)> {
    let mut groups: BTreeMap<(String, NaiveDateTime, String), Moments> = BTreeMap::new();
    for r in records {
        if r.value.is_nan() {
            continue;
        }
        groups
            .entry((r.state, r.timestamp, r.variable))
            .or_default()
            .push(r.value);
    }
    groups
        .into_iter()
        .map(|(k, m)| (k, (m.mean(), m.std())))
        .collect()
}

/// Dense accumulator over `states × hours × variables` used when streaming
/// the station table.
pub struct WeatherGrid {
    hours: usize,
    variables: usize,
    cells: Vec<Moments>,
}

impl WeatherGrid {
    pub fn new(states: usize, hours: usize, variables: usize) -> Self {
        Self {
            hours,
            variables,
            cells: vec![Moments::default(); states * hours * variables],
        }
    }

    pub fn push(&mut self, state: usize, hour: usize, variable: usize, value: f64) {
        if !value.is_nan() {
            self.cells[(state * self.hours + hour) * self.variables + variable].push(value);
        }
    }

    /// Mean and std series for one state and variable; unobserved hours are `NaN`.
    pub fn series(&self, state: usize, variable: usize) -> (Vec<f64>, Vec<f64>) {
        (0..self.hours)
            .map(|h| {
                let m = &self.cells[(state * self.hours + h) * self.variables + variable];
                (m.mean(), m.std())
            })
            .unzip()
    }
}

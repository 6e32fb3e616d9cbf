//! Calendar covariates derived from the timestamp alone.

use std::f64::consts::TAU;

use chrono::{Datelike, NaiveDateTime, Timelike};

pub const CALENDAR_COLUMNS: [&str; 11] = [
    "hour_sin",
    "hour_cos",
    "dow_sin",
    "dow_cos",
    "month_sin",
    "month_cos",
    "holiday",
    "season_summer",
    "season_autumn",
    "season_winter",
    "season_spring",
];

/// Fixed-date national holidays in Brazil as (month, day).
const FIXED_HOLIDAYS: [(u32, u32); 8] = [
    (1, 1),
    (4, 21),
    (5, 1),
    (9, 7),
    (10, 12),
    (11, 2),
    (11, 15),
    (12, 25),
];

pub fn is_holiday(t: NaiveDateTime) -> bool {
    FIXED_HOLIDAYS.contains(&(t.month(), t.day()))
}

/// Southern-hemisphere meteorological season: 0 summer (Dec–Feb),
/// 1 autumn, 2 winter, 3 spring.
pub fn season(t: NaiveDateTime) -> usize {
    (t.month() as usize % 12) / 3
}

/// Values in [`CALENDAR_COLUMNS`] order.
pub fn calendar_features(t: NaiveDateTime) -> [f64; 11] {
    let cyc = |v: u32, period: f64| {
        let angle = TAU * f64::from(v) / period;
        (angle.sin(), angle.cos())
    };
    let (hs, hc) = cyc(t.hour(), 24.0);
    let (ds, dc) = cyc(t.weekday().num_days_from_monday(), 7.0);
    let (ms, mc) = cyc(t.month0(), 12.0);
    let mut out = [hs, hc, ds, dc, ms, mc, 0.0, 0.0, 0.0, 0.0, 0.0];
    out[6] = f64::from(u8::from(is_holiday(t)));
    out[7 + season(t)] = 1.0;
    out
}

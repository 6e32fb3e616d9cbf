//! Raw-data ingestion, preprocessing, windowing and the synthetic generator.

pub mod calendar;
pub mod clean;
pub mod dataset;
pub mod pipeline;
pub mod scaler;
pub mod split;
pub mod synth;
pub mod weather;

use chrono::NaiveDateTime;

pub use dataset::{make_targets, window_count, Dataset, DatasetMeta, SplitTable, Window};
pub use pipeline::{preprocess, Processed};
pub use scaler::{ColumnStats, RobustScaler};
pub use split::{Interval, SplitName, SplitSpec};
pub use synth::{generate_synthetic, SynthConfig, SyntheticData};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M";

/// Accepts `YYYY-MM-DD HH:MM`, optionally with seconds and/or a `T` separator.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    ["%Y-%m-%d %H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%dT%H:%M:%S"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn format_timestamp(t: NaiveDateTime) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

pub(crate) mod timestamp_serde {
    use chrono::NaiveDateTime;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &NaiveDateTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_timestamp(*t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDateTime, D::Error> {
        let text = String::deserialize(d)?;
        super::parse_timestamp(&text)
            .ok_or_else(|| D::Error::custom(format!("invalid timestamp `{text}`")))
    }
}

//! Chronological train/validation/test boundaries.

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::{parse_timestamp, timestamp_serde};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Val, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.as_str())
    }
}

impl std::str::FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitName::Train),
            "val" | "validation" => Ok(SplitName::Val),
            "test" => Ok(SplitName::Test),
            _ => Err(Error::Config(format!("unknown split `{s}`"))),
        }
    }
}

/// Half-open interval `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    #[serde(with = "timestamp_serde")]
    pub start: NaiveDateTime,
    #[serde(with = "timestamp_serde")]
    pub end: NaiveDateTime,
}

impl Interval {
    pub fn contains(&self, t: NaiveDateTime) -> bool {
        self.start <= t && t < self.end
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train: Interval,
    pub validation: Interval,
    pub test: Interval,
}

impl Default for SplitSpec {
    /// Calendar 2019 for training, the first half of 2020 for validation,
    /// the second half for testing.
    fn default() -> Self {
        let t = |s| parse_timestamp(s).expect("valid literal");
        Self {
            train: Interval {
                start: t("2019-01-01 00:00"),
                end: t("2020-01-01 00:00"),
            },
            validation: Interval {
                start: t("2020-01-01 00:00"),
                end: t("2020-07-01 00:00"),
            },
            test: Interval {
                start: t("2020-07-01 00:00"),
                end: t("2021-01-01 00:00"),
            },
        }
    }
}

impl SplitSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn interval(&self, name: SplitName) -> &Interval {
        match name {
            SplitName::Train => &self.train,
            SplitName::Val => &self.validation,
            SplitName::Test => &self.test,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for name in SplitName::ALL {
            let iv = self.interval(name);
            if iv.start >= iv.end {
                return Err(Error::Config(format!("{} interval is empty", name.as_str())));
            }
        }
        if self.train.end > self.validation.start || self.validation.end > self.test.start {
            return Err(Error::Config(
                "split intervals must be disjoint and ordered train < validation < test".into(),
            ));
        }
        Ok(())
    }

    pub fn locate(&self, t: NaiveDateTime) -> Option<SplitName> {
        SplitName::ALL.into_iter().find(|&n| self.interval(n).contains(t))
    }
}

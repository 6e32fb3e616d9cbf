//! Median/IQR scaling fit on the training split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quantile by linear interpolation between order statistics
/// (position `q·(n−1)` in the sorted sample).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub median: f64,
    pub iqr: f64,
    /// IQR is zero: values are only centered.
    pub constant: bool,
}

impl ColumnStats {
    pub fn fit(name: &str, values: &[f64]) -> Result<Self> {
        let mut sorted: Vec<f64> = values.to_vec();
        if sorted.is_empty() || sorted.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "cannot fit scaler on column `{name}`: empty or non-finite values"
            )));
        }
        sorted.sort_by(f64::total_cmp);
        let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
        Ok(Self {
            name: name.to_owned(),
            median: quantile(&sorted, 0.5),
            iqr,
            constant: iqr == 0.0,
        })
    }

    fn divisor(&self) -> f64 {
        if self.constant {
            1.0
        } else {
            self.iqr
        }
    }

    pub fn transform(&self, x: f64) -> f64 {
        (x - self.median) / self.divisor()
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.divisor() + self.median
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RobustScaler {
    columns: Vec<ColumnStats>,
    fitted: bool,
}

impl RobustScaler {
    pub fn fit<'a>(columns: impl IntoIterator<Item = (&'a str, &'a [f64])>) -> Result<Self> {
        let columns = columns
            .into_iter()
            .map(|(name, values)| ColumnStats::fit(name, values))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            columns,
            fitted: true,
        })
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted
    }

    pub fn columns(&self) -> &[ColumnStats] {
        &self.columns
    }

    pub fn stats(&self, name: &str) -> Result<&ColumnStats> {
        if !self.fitted {
            return Err(Error::ScalerNotFitted);
        }
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::Data(format!("scaler has no column `{name}`")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c.name == name)
    }

    pub fn transform(&self, name: &str, values: &mut [f64]) -> Result<()> {
        let s = self.stats(name)?;
        values.iter_mut().for_each(|v| *v = s.transform(*v));
        Ok(())
    }

    pub fn inverse(&self, name: &str, values: &mut [f64]) -> Result<()> {
        let s = self.stats(name)?;
        values.iter_mut().for_each(|v| *v = s.inverse(*v));
        Ok(())
    }
}

//! Gap filling and sign fixes applied to each per-state column.

use crate::error::{Error, Result};

/// Fills `NaN` gaps in place: linear interpolation between the nearest
/// observations, nearest-value fill before the first and after the last.
///
/// Fails (naming `state` and `column`) when every value is missing.
pub fn interpolate_missing(series: &mut [f64], state: &str, column: &str) -> Result<()> {
    let observed: Vec<usize> = (0..series.len()).filter(|&i| !series[i].is_nan()).collect();
    let (Some(&first), Some(&last)) = (observed.first(), observed.last()) else {
        if series.is_empty() {
            return Ok(());
        }
        return Err(Error::Data(format!(
            "state {state}: column `{column}` has no observations"
        )));
    };
    let lead = series[first];
    series[..first].fill(lead);
    let trail = series[last];
    series[last + 1..].fill(trail);
    for pair in observed.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a < 2 {
            continue;
        }
        let (ya, yb) = (series[a], series[b]);
        let span = (b - a) as f64;
        for i in a + 1..b {
            let w = (i - a) as f64 / span;
            series[i] = ya + w * (yb - ya);
        }
    }
    Ok(())
}

pub fn clip_negative(series: &mut [f64]) {
    for v in series {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Generation columns subject to the non-negativity fix.
pub fn is_pv_column(name: &str) -> bool {
    name.starts_with("pv")
}

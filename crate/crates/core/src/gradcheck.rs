//! Central finite-difference verification of analytic gradients.
//!
//! Only forward evaluations of the loss are used here, so the numeric
//! estimate is independent of the tape's backward rules.

use crate::tensor::{ParamSet, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub error: f64,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_error: f64,
    pub failures: Vec<Mismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checked > 0
    }
}

/// `|analytic − numeric| / max(1, |analytic|)`.
pub fn gradient_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

/// Compares `analytic[i]` against `(L(θ+h) − L(θ−h)) / 2h` for every entry of
/// every tensor in `params` (or the first `limit` entries per tensor).
pub fn check<P, F>(
    params: &mut P,
    analytic: &[Tensor],
    mut loss: F,
    h: f64,
    tolerance: f64,
    limit: Option<usize>,
) -> GradCheckReport
where
    P: ParamSet,
    F: FnMut(&P) -> f64,
{
    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    assert_eq!(names.len(), analytic.len(), "one analytic gradient per tensor");
    let mut report = GradCheckReport::default();
    for (ti, name) in names.iter().enumerate() {
        let n = analytic[ti].numel();
        for idx in 0..limit.map_or(n, |l| l.min(n)) {
            let original = params.tensors_mut()[ti].data()[idx];
            params.tensors_mut()[ti].data_mut()[idx] = original + h;
            let plus = loss(params);
            params.tensors_mut()[ti].data_mut()[idx] = original - h;
            let minus = loss(params);
            params.tensors_mut()[ti].data_mut()[idx] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[ti].data()[idx];
            let error = gradient_error(a, numeric);
            report.checked += 1;
            report.max_error = report.max_error.max(error);
            if !(error <= tolerance) {
                report.failures.push(Mismatch {
                    tensor: name.clone(),
                    index: idx,
                    analytic: a,
                    numeric,
                    error,
                });
            }
        }
    }
    report
}

//! Central finite-difference verification of analytic gradients.

use super::params::Params;
use crate::error::{Error, Result};

/// Magnitudes below this are compared absolutely rather than relatively.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-4;

/// `|a - n| / max(|a|, |n|, RELATIVE_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlaggedComponent {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    /// Largest relative error per parameter tensor.
    pub per_param: Vec<(String, f64)>,
    pub flagged: Vec<FlaggedComponent>,
    pub components_checked: usize,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.per_param.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Compares `analytic` against `(L(θ+h) − L(θ−h)) / 2h` for every
/// component of every tensor in `params`.
pub fn grad_check<F>(
    params: &Params,
    analytic: &Params,
    mut loss: F,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&Params) -> Result<f64>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let mut probe = params.clone();
    let mut report = GradCheckReport::default();
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in names {
        let grad = analytic
            .get(&name)
            .map_err(|_| Error::MissingGradient(name.clone()))?
            .clone();
        let n = params.get(&name)?.len();
        if grad.len() != n {
            return Err(Error::shape(
                format!("gradient `{name}`"),
                "length differs from parameter",
            ));
        }
        let mut worst = 0.0f64;
        for k in 0..n {
            let original = probe.get(&name)?.data()[k];
            probe.get_mut(&name)?.data_mut()[k] = original + step;
            let up = loss(&probe)?;
            probe.get_mut(&name)?.data_mut()[k] = original - step;
            let down = loss(&probe)?;
            probe.get_mut(&name)?.data_mut()[k] = original;
            let numeric = (up - down) / (2.0 * step);
            let a = grad.data()[k];
            let err = relative_error(a, numeric);
            worst = worst.max(err);
            report.components_checked += 1;
            if !(err <= tolerance) {
                report.flagged.push(FlaggedComponent {
                    param: name.clone(),
                    index: k,
                    analytic: a,
                    numeric,
                    relative_error: err,
                });
            }
        }
        report.per_param.push((name, worst));
    }
    Ok(report)
}

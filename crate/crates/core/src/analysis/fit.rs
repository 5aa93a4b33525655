use alloc::vec::Vec;

use crate::train::RunRecord;
use crate::{Error, Result};

/// Losses below this are excluded from PL ratio statistics.
pub const PL_LOSS_FLOOR: f64 = 1e-14;

/// Ordinary least squares line `y = slope x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// In `[0, 1]`; 1 when `y` is constant.
    pub r_squared: f64,
}

/// Needs at least two points with distinct `x`.
pub fn least_squares(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::DataLength { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
        syy += (yi - my) * (yi - my);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("least squares needs distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(LineFit { slope, intercept, r_squared })
}

/// Slope of `log y` against `log x`; every value must be positive.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(Error::NonPositiveLoss);
    }
    let lx: Vec<f64> = x.iter().map(|&v| libm::log(v)).collect();
    let ly: Vec<f64> = y.iter().map(|&v| libm::log(v)).collect();
    least_squares(&lx, &ly)
}

/// Exponential-rate fit of the loss on a time window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    /// `d log(loss) / dt`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

/// Least-squares line of `log loss` against `t` over `t in [lo, hi]`.
pub fn fit_decay(record: &RunRecord, window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    for (&t, &loss) in record.times.iter().zip(&record.losses) {
        if t < lo || t > hi {
            continue;
        }
        if !(loss > 0.0) {
            return Err(Error::NonPositiveLoss);
        }
        ts.push(t);
        logs.push(libm::log(loss));
    }
    if ts.len() < 10 {
        return Err(Error::InsufficientData { needed: 10, got: ts.len() });
    }
    let line = least_squares(&ts, &logs)?;
    Ok(DecayFit { slope: line.slope, intercept: line.intercept, r_squared: line.r_squared, window })
}

/// [`fit_decay`] on `[0.1 T, 0.6 T]` with `T` the last recorded time.
pub fn fit_decay_default(record: &RunRecord) -> Result<DecayFit> {
    let horizon = record.times.last().copied().unwrap_or(0.0);
    fit_decay(record, (0.1 * horizon, 0.6 * horizon))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlEntry {
    pub t: f64,
    pub numerator: f64,
    pub loss: f64,
    /// `numerator / loss`, absent when the loss is below [`PL_LOSS_FLOOR`].
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlTrace {
    pub entries: Vec<PlEntry>,
}

impl PlTrace {
    /// Empirical PL constant: smallest ratio over the trace.
    pub fn mu_hat(&self) -> Option<f64> {
        self.entries.iter().filter_map(|e| e.ratio).reduce(f64::min)
    }
}

pub fn pl_trace(record: &RunRecord) -> PlTrace {
    let entries = record
        .times
        .iter()
        .zip(&record.losses)
        .zip(&record.grad_norm_sq)
        .map(|((&t, &loss), &numerator)| PlEntry {
            t,
            numerator,
            loss,
            ratio: (loss >= PL_LOSS_FLOOR).then(|| numerator / loss),
        })
        .collect();
    PlTrace { entries }
}

//! Local linear regression with the Epanechnikov kernel.

use serde::{Deserialize, Serialize};

use super::{FittedModel, Predictor};
use crate::error::{Error, Result};
use crate::scenario::Sample;

pub const MIN_POINTS: usize = 5;
const AUTO_GRID_POINTS: usize = 30;
const AUTO_GRID_LO: f64 = 0.01;
const AUTO_GRID_HI: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    Fixed(f64),
    /// Leave-one-out CV over a geometric grid of fractions of the x range.
    Auto,
}

#[inline]
fn epanechnikov(u: f64) -> f64 {
    if u.abs() < 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Rows sorted by `(x, y)` so that sums are accumulated in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLinearSmoother {
    x: Vec<f64>,
    y: Vec<f64>,
    h: f64,
}

/// Weighted line at `x0`: the intercept and the weight the fit gives to an
/// observation sitting exactly at `x0` (its hat-matrix diagonal entry).
struct LocalFit {
    value: f64,
    self_weight: f64,
}

impl LocalLinearSmoother {
    fn new(sample: &Sample, h: f64) -> Self {
        let mut rows: Vec<(f64, f64)> = sample.x.iter().copied().zip(sample.y.iter().copied()).collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let (x, y) = rows.into_iter().unzip();
        Self { x, y, h }
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    /// `skip` leaves one row out. Returns `None` when fewer than two points
    /// carry weight or the weighted design is singular.
    fn local_fit(&self, x0: f64, skip: Option<usize>) -> Option<LocalFit> {
        let lo = self.x.partition_point(|&v| v <= x0 - self.h);
        let hi = self.x.partition_point(|&v| v < x0 + self.h);
        let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut support = 0usize;
        for i in lo..hi {
            if Some(i) == skip {
                continue;
            }
            let d = self.x[i] - x0;
            let w = epanechnikov(d / self.h);
            if w <= 0.0 {
                continue;
            }
            support += 1;
            s0 += w;
            s1 += w * d;
            s2 += w * d * d;
            t0 += w * self.y[i];
            t1 += w * d * self.y[i];
        }
        let det = s0 * s2 - s1 * s1;
        if support < 2 || !(det > 1e-12 * s0 * s2) {
            return None;
        }
        Some(LocalFit { value: (s2 * t0 - s1 * t1) / det, self_weight: 0.75 * s2 / det })
    }

    fn nearest(&self, x0: f64) -> f64 {
        let i = self.x.partition_point(|&v| v < x0);
        let pick = match (i.checked_sub(1), (i < self.x.len()).then_some(i)) {
            (Some(a), Some(b)) => {
                if (x0 - self.x[a]) <= (self.x[b] - x0) {
                    self.x[a]
                } else {
                    self.x[b]
                }
            }
            (Some(a), None) => self.x[a],
            (None, Some(b)) => self.x[b],
            (None, None) => unreachable!("smoother has at least one row"),
        };
        let lo = self.x.partition_point(|&v| v < pick);
        let hi = self.x.partition_point(|&v| v <= pick);
        self.y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
    }

    pub fn eval(&self, x0: f64) -> f64 {
        match self.local_fit(x0, None) {
            Some(f) => f.value,
            None => self.nearest(x0),
        }
    }

    fn trace(&self) -> f64 {
        self.x.iter().filter_map(|&x| self.local_fit(x, None)).map(|f| f.self_weight).sum()
    }

    /// Leave-one-out squared error, `None` if any held-out point has no valid fit.
    fn loo_score(&self) -> Option<f64> {
        let mut total = 0.0;
        for i in 0..self.x.len() {
            let f = self.local_fit(self.x[i], Some(i))?;
            total += (self.y[i] - f.value).powi(2);
        }
        Some(total)
    }
}

pub fn fit_local_linear(sample: &Sample, bandwidth: Bandwidth) -> Result<FittedModel> {
    let n = sample.len();
    if n < MIN_POINTS {
        return Err(Error::SampleTooSmall { n, min: MIN_POINTS });
    }
    let smoother = match bandwidth {
        Bandwidth::Fixed(h) => {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidSpec(format!("bandwidth must be > 0, got {h}")));
            }
            LocalLinearSmoother::new(sample, h)
        }
        Bandwidth::Auto => auto_bandwidth(sample)?,
    };
    let dof = smoother.trace();
    let h = smoother.h;
    Ok(FittedModel {
        predictor: Predictor::LocalLinear(smoother),
        dof,
        lambda: None,
        coefficients: vec![h],
        train_n: n,
    })
}

fn auto_bandwidth(sample: &Sample) -> Result<LocalLinearSmoother> {
    let (lo, hi) = sample.x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::BandwidthTooSmall);
    }
    let mut best: Option<(f64, LocalLinearSmoother)> = None;
    for k in 0..AUTO_GRID_POINTS {
        let t = k as f64 / (AUTO_GRID_POINTS - 1) as f64;
        let h = range * AUTO_GRID_LO * (AUTO_GRID_HI / AUTO_GRID_LO).powf(t);
        let candidate = LocalLinearSmoother::new(sample, h);
        if let Some(score) = candidate.loo_score() {
            if best.as_ref().is_none_or(|(b, _)| score < *b) {
                best = Some((score, candidate));
            }
        }
    }
    best.map(|(_, s)| s).ok_or(Error::BandwidthTooSmall)
}

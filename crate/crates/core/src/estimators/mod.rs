//! Competing regression procedures.
//!
//! Every procedure is invariant to the order of the sample rows. Multi-split
//! selection relies on this: a criterion then depends only on which rows are
//! in the estimation set, not on how they are arranged.

pub mod banded;
pub mod local_linear;
pub mod polynomial;
pub mod spline;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use local_linear::{fit_local_linear, Bandwidth, LocalLinearSmoother};
pub use polynomial::fit_polynomial;
pub use spline::{fit_smoothing_spline, gcv_profile, GcvPoint, LambdaGrid, SplineCurve};

use crate::error::{Error, Result};
use crate::scenario::Sample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Predictor {
    Constant(f64),
    Polynomial(Vec<f64>),
    Spline(SplineCurve),
    LocalLinear(LocalLinearSmoother),
}

/// A procedure fitted on an estimation set. Immutable; `Send + Sync`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub predictor: Predictor,
    /// Effective degrees of freedom (trace of the hat matrix).
    pub dof: f64,
    /// Smoothing parameter, for penalized fits.
    pub lambda: Option<f64>,
    pub coefficients: Vec<f64>,
    pub train_n: usize,
}

impl FittedModel {
    pub fn predict(&self, x: f64) -> f64 {
        match &self.predictor {
            Predictor::Constant(c) => *c,
            Predictor::Polynomial(coef) => polynomial::horner(coef, x),
            Predictor::Spline(curve) => curve.eval(x),
            Predictor::LocalLinear(sm) => sm.eval(x),
        }
    }
}

/// Model 1 (`with_mean = false`) predicts 0; model 2 predicts the sample mean.
pub fn fit_mean_model(sample: &Sample, with_mean: bool) -> FittedModel {
    let (c, dof) = if with_mean { (sample.mean_y(), 1.0) } else { (0.0, 0.0) };
    FittedModel { predictor: Predictor::Constant(c), dof, lambda: None, coefficients: vec![c], train_n: sample.len() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProcedureKind {
    Polynomial(usize),
    MeanZero,
    MeanConstant,
    SmoothingSpline(LambdaGrid),
    LocalLinear(Bandwidth),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcedureSpec {
    pub kind: ProcedureKind,
    pub label: String,
}

impl ProcedureSpec {
    pub fn new(kind: ProcedureKind) -> Result<Self> {
        match &kind {
            ProcedureKind::LocalLinear(Bandwidth::Fixed(h)) if !(*h > 0.0 && h.is_finite()) => {
                return Err(Error::InvalidSpec(format!("bandwidth must be > 0, got {h}")));
            }
            ProcedureKind::SmoothingSpline(LambdaGrid::Fixed(v))
                if v.is_empty() || v.iter().any(|l| !(l.is_finite() && *l > 0.0)) =>
            {
                return Err(Error::InvalidSpec("λ grid must be non-empty, finite and > 0".into()));
            }
            _ => {}
        }
        let label = match &kind {
            ProcedureKind::Polynomial(d) => format!("poly:{d}"),
            ProcedureKind::MeanZero => "zero".into(),
            ProcedureKind::MeanConstant => "mean".into(),
            ProcedureKind::SmoothingSpline(_) => "spline".into(),
            ProcedureKind::LocalLinear(Bandwidth::Auto) => "loclin:auto".into(),
            ProcedureKind::LocalLinear(Bandwidth::Fixed(h)) => format!("loclin:{h}"),
        };
        Ok(Self { kind, label })
    }

    pub fn polynomial(degree: usize) -> Self {
        Self::new(ProcedureKind::Polynomial(degree)).expect("valid")
    }

    pub fn spline() -> Self {
        Self::new(ProcedureKind::SmoothingSpline(LambdaGrid::Default)).expect("valid")
    }

    pub fn zero() -> Self {
        Self::new(ProcedureKind::MeanZero).expect("valid")
    }

    pub fn mean() -> Self {
        Self::new(ProcedureKind::MeanConstant).expect("valid")
    }

    /// Simple linear, quadratic, smoothing spline.
    pub fn default_trio() -> Vec<Self> {
        vec![Self::polynomial(1), Self::polynomial(2), Self::spline()]
    }

    /// Fewest estimation points the procedure can be fitted on.
    pub fn min_points(&self) -> usize {
        match &self.kind {
            ProcedureKind::Polynomial(d) => d + 1,
            ProcedureKind::MeanZero | ProcedureKind::MeanConstant => 1,
            ProcedureKind::SmoothingSpline(_) => spline::MIN_POINTS,
            ProcedureKind::LocalLinear(_) => local_linear::MIN_POINTS,
        }
    }

    pub fn fit(&self, sample: &Sample) -> Result<FittedModel> {
        match &self.kind {
            ProcedureKind::Polynomial(d) => fit_polynomial(sample, *d),
            ProcedureKind::MeanZero => Ok(fit_mean_model(sample, false)),
            ProcedureKind::MeanConstant => Ok(fit_mean_model(sample, true)),
            ProcedureKind::SmoothingSpline(grid) => fit_smoothing_spline(sample, grid),
            ProcedureKind::LocalLinear(bw) => fit_local_linear(sample, *bw),
        }
    }
}

impl fmt::Display for ProcedureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl FromStr for ProcedureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidSpec(format!("unknown procedure `{s}`"));
        let kind = match s {
            "zero" => ProcedureKind::MeanZero,
            "mean" => ProcedureKind::MeanConstant,
            "spline" => ProcedureKind::SmoothingSpline(LambdaGrid::Default),
            _ => {
                if let Some(d) = s.strip_prefix("poly:") {
                    ProcedureKind::Polynomial(d.parse().map_err(|_| bad())?)
                } else if let Some(h) = s.strip_prefix("loclin:") {
                    if h == "auto" {
                        ProcedureKind::LocalLinear(Bandwidth::Auto)
                    } else {
                        ProcedureKind::LocalLinear(Bandwidth::Fixed(h.parse().map_err(|_| bad())?))
                    }
                } else {
                    return Err(bad());
                }
            }
        };
        ProcedureSpec::new(kind)
    }
}

/// Parses a comma-separated list of procedure ids.
pub fn parse_procedures(list: &str) -> Result<Vec<ProcedureSpec>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_models() {
        let s = Sample::new(vec![0.1, 0.2, 0.3], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(fit_mean_model(&s, false).predict(0.3), 0.0);
        let m = fit_mean_model(&s, true);
        assert_eq!(m.predict(0.0), 2.0);
        assert_eq!(m.predict(0.77), 2.0);
        let c = Sample::new(vec![0.1, 0.2, 0.3], vec![4.5; 3]).unwrap();
        assert_eq!(fit_mean_model(&c, true).predict(0.5), 4.5);
    }

    #[test]
    fn ids_round_trip() {
        for id in ["poly:1", "poly:2", "zero", "mean", "spline", "loclin:auto", "loclin:0.25"] {
            let p: ProcedureSpec = id.parse().unwrap();
            assert_eq!(p.label, id);
        }
        assert!("poly:x".parse::<ProcedureSpec>().is_err());
        assert!("loclin:-1".parse::<ProcedureSpec>().is_err());
        assert!("ridge".parse::<ProcedureSpec>().is_err());
        assert_eq!(parse_procedures("poly:1, spline").unwrap().len(), 2);
    }
}

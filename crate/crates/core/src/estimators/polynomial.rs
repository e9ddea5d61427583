use nalgebra::{DMatrix, DVector};

use super::{FittedModel, Predictor};
use crate::error::{Error, Result};
use crate::scenario::Sample;

/// Least-squares polynomial of the given degree, via Householder QR of the
/// Vandermonde matrix. Coefficients are in the monomial basis, constant first.
pub fn fit_polynomial(sample: &Sample, degree: usize) -> Result<FittedModel> {
    let distinct = sample.distinct_x();
    if distinct < degree + 1 {
        return Err(Error::RankDeficient { distinct, needed: degree + 1 });
    }
    let n = sample.len();
    let k = degree + 1;
    let v = DMatrix::from_fn(n, k, |i, j| sample.x[i].powi(j as i32));
    let y = DVector::from_column_slice(&sample.y);
    let qr = v.qr();
    let qty = qr.q().transpose() * y;
    let coef = qr.r().solve_upper_triangular(&qty).ok_or(Error::RankDeficient { distinct, needed: k })?;
    let coef: Vec<f64> = coef.iter().copied().collect();
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::RankDeficient { distinct, needed: k });
    }
    Ok(FittedModel {
        predictor: Predictor::Polynomial(coef.clone()),
        dof: k as f64,
        lambda: None,
        coefficients: coef,
        train_n: n,
    })
}

/// Horner evaluation, constant coefficient first.
pub(crate) fn horner(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

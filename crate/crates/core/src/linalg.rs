//! Small dense solves used by the Newton iterations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Smallest admissible Cholesky pivot of the unit-diagonal scaled matrix.
const PIVOT_FLOOR: f64 = 1e-12;

/// Solves `a x = b` for symmetric positive definite `a`.
///
/// The matrix is Jacobi-scaled to unit diagonal first so the rank test does
/// not depend on covariate units.
pub(crate) fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>, context: &'static str) -> Result<DVector<f64>> {
    let k = a.nrows();
    let scale: Vec<f64> = (0..k).map(|i| a[(i, i)]).collect();
    if scale.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
        return Err(Error::Singular { context });
    }
    let inv_sqrt: Vec<f64> = scale.iter().map(|s| 1.0 / s.sqrt()).collect();
    let scaled = DMatrix::from_fn(k, k, |i, j| a[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    let chol = scaled.cholesky().ok_or(Error::Singular { context })?;
    let l = chol.l_dirty();
    if (0..k).any(|i| l[(i, i)] * l[(i, i)] < PIVOT_FLOOR) {
        return Err(Error::Singular { context });
    }
    let rhs = DVector::from_fn(k, |i, _| b[i] * inv_sqrt[i]);
    let z = chol.solve(&rhs);
    Ok(DVector::from_fn(k, |i, _| z[i] * inv_sqrt[i]))
}

/// General square inverse with a scale-free singularity check.
pub(crate) fn inverse(a: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    let k = a.nrows();
    let row_scale: Vec<f64> = (0..k)
        .map(|i| a.row(i).iter().fold(0.0_f64, |m, v| m.max(v.abs())))
        .collect();
    if row_scale.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
        return Err(Error::Singular { context });
    }
    let scaled = DMatrix::from_fn(k, k, |i, j| a[(i, j)] / row_scale[i]);
    let svd = scaled.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin.is_nan() || smin <= smax * 1e-13 {
        return Err(Error::Singular { context });
    }
    let inv = scaled.try_inverse().ok_or(Error::Singular { context })?;
    // (D a)^-1 = a^-1 D^-1  =>  a^-1 = inv * D^-1
    Ok(DMatrix::from_fn(k, k, |i, j| inv[(i, j)] / row_scale[j]))
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

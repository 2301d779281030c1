use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::cholesky::Cholesky;
use crate::error::{Error, Result};

/// log ψ(x; mean, cov) for a multivariate normal density.
pub fn mvn_log_density(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let k = x.len();
    if mean.len() != k || cov.nrows() != k || cov.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "x has length {k}, mean {}, covariance {}x{}",
            mean.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    let chol = Cholesky::new(cov)?;
    let quad = chol.quadratic_form(&(x - mean));
    Ok(-0.5 * (k as f64 * (2.0 * PI).ln() + chol.log_det() + quad))
}

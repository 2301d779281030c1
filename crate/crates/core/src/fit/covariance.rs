use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::glm::Observation;

use super::design::{inverse_scaled, Design};
use super::{active_of, FittedModel};

/// Inverse of the averaged Fisher information on the active set, embedded
/// in a zero matrix. `Var(θ̂) ≈ Σ̂/n`.
pub fn active_set_covariance(model: &FittedModel, data: &[Observation]) -> Result<DMatrix<f64>> {
    let design = Design::control(data, &model.family)?;
    if design.dim() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} coefficients, data {}",
            model.dim(),
            design.dim()
        )));
    }
    covariance_on(&design, &model.theta_hat)
}

pub(crate) fn covariance_on(design: &Design, theta: &[f64]) -> Result<DMatrix<f64>> {
    let d = design.dim();
    let mut sigma = DMatrix::zeros(d, d);
    let active = active_of(theta);
    if active.is_empty() {
        return Ok(sigma);
    }
    let eta = design.eta(theta);
    let (mut w, _) = design.working(&eta);
    let nf = design.n() as f64;
    for wi in w.iter_mut() {
        *wi /= nf;
    }
    let info = design.weighted_gram(&w, &active);
    let inv = inverse_scaled(&info, &active)?;
    for (a, &ja) in active.iter().enumerate() {
        for (b, &jb) in active.iter().enumerate() {
            sigma[(ja, jb)] = 0.5 * (inv[(a, b)] + inv[(b, a)]);
        }
    }
    Ok(sigma)
}

//! Control-arm model fitting.
//!
//! Everything here works on the averaged objective
//! `Q(θ) = −ℓ(θ)/n + Σⱼ P_λ(θⱼ)`, except the ridge pilot which uses the
//! summed form `−ℓ(θ) + (λ/2)‖θ‖²`.

mod covariance;
mod design;
mod mle;
mod path;
mod penalized;
mod ridge;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::glm::GlmFamily;
use crate::penalty::PenaltyConfig;

pub use covariance::active_set_covariance;
pub use design::Design;
pub use mle::fit_mle;
pub use path::{default_lambda_grid, lambda_max, select_lambda, LAMBDA_GRID_LEN, LAMBDA_MIN_RATIO};
pub use penalized::{fit_penalized, penalized_objective};
pub use ridge::{fit_ridge, ridge_pilot, RidgeFit};

/// Outer-iteration cap for penalized fits.
pub const MAX_OUTER_ITER: usize = 1000;
/// Outer convergence: largest coefficient change between iterations.
pub const OUTER_TOL: f64 = 1e-7;
/// Linear predictor magnitude beyond which a Bernoulli or Poisson fit is
/// declared separated.
pub const SEPARATION_ETA: f64 = 30.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Penalized objective after each outer iteration.
    pub objective_trace: Vec<f64>,
    /// Outer iterations whose objective rose above the previous one.
    pub objective_increases: usize,
    /// Grid points dropped because their fit failed.
    pub skipped_lambdas: usize,
    /// `−2ℓ + |A|·log n` at the returned estimate.
    pub bic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub theta_hat: Vec<f64>,
    /// Indices of nonzero coefficients, ascending.
    pub active_set: Vec<usize>,
    pub lambda: f64,
    /// Per-√n covariance of the estimator, zero outside the active set.
    pub sigma_hat: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub family: GlmFamily,
    pub penalty: PenaltyConfig,
    pub diagnostics: FitDiagnostics,
}

impl FittedModel {
    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }
}

pub(crate) fn active_of(theta: &[f64]) -> Vec<usize> {
    theta.iter().enumerate().filter(|(_, t)| **t != 0.0).map(|(j, _)| j).collect()
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

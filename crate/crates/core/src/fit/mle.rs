use crate::error::Result;
use crate::glm::{GlmFamily, Observation};
use crate::penalty::PenaltyConfig;

use super::covariance::covariance_on;
use super::design::{solve_scaled, Design};
use super::penalized::bic;
use super::{max_abs_diff, FitDiagnostics, FittedModel};

const MLE_TOL: f64 = 1e-10;
const MLE_MAX_ITER: usize = 200;

/// Unpenalized maximum likelihood by IRLS with Cholesky solves.
pub fn fit_mle(data: &[Observation], family: &GlmFamily) -> Result<FittedModel> {
    let design = Design::control(data, family)?;
    mle_on(&design)
}

pub(crate) fn mle_on(design: &Design) -> Result<FittedModel> {
    let d = design.dim();
    let coords: Vec<usize> = (0..d).collect();
    let mut theta = vec![0.0; d];
    let mut diagnostics = FitDiagnostics::default();
    let mut converged = false;
    let mut iterations = 0;
    let mut current = -design.log_likelihood(&theta);
    for it in 1..=MLE_MAX_ITER {
        iterations = it;
        let (h, rhs) = design.quadratic(&design.eta(&theta));
        let proposal: Vec<f64> = solve_scaled(&h, &rhs, &coords)?.iter().copied().collect();

        let mut candidate = proposal.clone();
        let mut value = -design.log_likelihood(&candidate);
        let mut step = 1.0;
        while !(value <= current + 1e-12 * current.abs().max(1.0)) && step > 1e-9 {
            step *= 0.5;
            for ((c, p), t) in candidate.iter_mut().zip(&proposal).zip(&theta) {
                *c = t + step * (p - t);
            }
            value = -design.log_likelihood(&candidate);
        }
        if value > current {
            diagnostics.objective_increases += 1;
        }
        diagnostics.objective_trace.push(value / design.n() as f64);
        let change = max_abs_diff(&candidate, &theta);
        theta = candidate;
        current = value;
        design.check_separation(&design.eta(&theta), it)?;
        if change < MLE_TOL * (1.0 + theta.iter().fold(0.0_f64, |m, t| m.max(t.abs()))) {
            converged = true;
            break;
        }
    }
    let sigma_hat = covariance_on(design, &theta)?;
    diagnostics.bic = bic(design, &theta);
    Ok(FittedModel {
        active_set: (0..d).collect(),
        theta_hat: theta,
        lambda: 0.0,
        sigma_hat,
        converged,
        iterations,
        family: *design.family(),
        penalty: PenaltyConfig::none(),
        diagnostics,
    })
}

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::glm::{FamilyKind, GlmFamily, Observation};
use crate::penalty::{penalty_value, threshold_update, PenaltyConfig, PenaltyKind};

use super::covariance::covariance_on;
use super::design::Design;
use super::ridge::ridge_pilot_on;
use super::{active_of, max_abs_diff, FitDiagnostics, FittedModel, MAX_OUTER_ITER, OUTER_TOL};

const INNER_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100_000;
const MAX_HALVINGS: usize = 30;

/// Fits at a single λ. AdaLasso without weights gets them from a ridge pilot.
pub fn fit_penalized(
    data: &[Observation],
    family: &GlmFamily,
    penalty: &PenaltyConfig,
    lambda: f64,
    init: Option<&[f64]>,
) -> Result<FittedModel> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    let design = Design::control(data, family)?;
    let penalty = with_pilot_weights(&design, penalty)?;
    let fit = solve_on(&design, &penalty, lambda, init)?;
    finish(&design, fit, penalty, lambda)
}

/// `−ℓ(θ)/n + Σⱼ P_λ(θⱼ)` on control-arm data.
pub fn penalized_objective(
    data: &[Observation],
    family: &GlmFamily,
    penalty: &PenaltyConfig,
    lambda: f64,
    theta: &[f64],
) -> Result<f64> {
    let design = Design::control(data, family)?;
    Ok(objective(&design, penalty, lambda, theta))
}

pub(crate) fn with_pilot_weights(design: &Design, penalty: &PenaltyConfig) -> Result<PenaltyConfig> {
    if penalty.kind() == PenaltyKind::AdaLasso {
        match penalty.weights() {
            Some(w) if w.len() != design.dim() => Err(Error::DimensionMismatch(format!(
                "{} penalty weights for {} coefficients",
                w.len(),
                design.dim()
            ))),
            Some(_) => Ok(penalty.clone()),
            None => {
                let pilot = ridge_pilot_on(design)?;
                penalty.clone().with_weights(crate::penalty::adaptive_weights(&pilot))
            }
        }
    } else {
        Ok(penalty.clone())
    }
}

pub(crate) fn objective(design: &Design, penalty: &PenaltyConfig, lambda: f64, theta: &[f64]) -> f64 {
    let pen: f64 = theta.iter().enumerate().map(|(j, t)| penalty_value(*t, lambda, penalty, j)).sum();
    -design.log_likelihood(theta) / design.n() as f64 + pen
}

pub(crate) struct CdFit {
    pub theta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub diagnostics: FitDiagnostics,
}

pub(crate) fn finish(design: &Design, fit: CdFit, penalty: PenaltyConfig, lambda: f64) -> Result<FittedModel> {
    let sigma_hat = covariance_on(design, &fit.theta)?;
    let active_set = active_of(&fit.theta);
    let mut diagnostics = fit.diagnostics;
    diagnostics.bic = bic(design, &fit.theta);
    Ok(FittedModel {
        theta_hat: fit.theta,
        active_set,
        lambda,
        sigma_hat,
        converged: fit.converged,
        iterations: fit.iterations,
        family: *design.family(),
        penalty,
        diagnostics,
    })
}

pub(crate) fn bic(design: &Design, theta: &[f64]) -> f64 {
    let k = theta.iter().filter(|t| **t != 0.0).count() as f64;
    -2.0 * design.log_likelihood(theta) + k * (design.n() as f64).ln()
}

/// IRLS outer loop around coordinate descent on the weighted quadratic.
pub(crate) fn solve_on(design: &Design, penalty: &PenaltyConfig, lambda: f64, init: Option<&[f64]>) -> Result<CdFit> {
    let d = design.dim();
    let mut theta = match init {
        Some(t) if t.len() != d => {
            return Err(Error::DimensionMismatch(format!("initial value has length {}, expected {d}", t.len())))
        }
        Some(t) => t.to_vec(),
        None => vec![0.0; d],
    };
    let gaussian = design.family().kind() == FamilyKind::GaussianIdentity;
    let mut diagnostics = FitDiagnostics::default();
    let mut current = objective(design, penalty, lambda, &theta);
    let mut eta = design.eta(&theta);

    for iteration in 1..=MAX_OUTER_ITER {
        let (gram, c) = design.quadratic(&eta);
        let mut proposal = theta.clone();
        coordinate_descent(&gram, c.as_slice(), penalty, lambda, &mut proposal);

        let mut step = 1.0;
        let mut candidate = proposal.clone();
        let mut value = objective(design, penalty, lambda, &candidate);
        let mut halvings = 0;
        let slack = 1e-12 * current.abs().max(1.0);
        while !gaussian && !(value <= current + slack) && halvings < MAX_HALVINGS {
            step *= 0.5;
            halvings += 1;
            for ((c, p), t) in candidate.iter_mut().zip(&proposal).zip(&theta) {
                *c = t + step * (p - t);
            }
            value = objective(design, penalty, lambda, &candidate);
        }
        if !value.is_finite() || candidate.iter().any(|t| !t.is_finite()) {
            diagnostics.objective_trace.push(value);
            return Err(Error::Divergence {
                iteration,
                reason: "non-finite linear predictor".into(),
                trace: diagnostics.objective_trace,
            });
        }
        if value > current {
            diagnostics.objective_increases += 1;
        }
        diagnostics.objective_trace.push(value);
        let change = max_abs_diff(&candidate, &theta);
        theta = candidate;
        current = value;
        eta = design.eta(&theta);
        design.check_separation(&eta, iteration)?;
        if change < OUTER_TOL {
            return Ok(CdFit { theta, converged: true, iterations: iteration, diagnostics });
        }
    }
    Ok(CdFit { theta, converged: false, iterations: MAX_OUTER_ITER, diagnostics })
}

/// Minimizes `½θᵀGθ − cᵀθ + Σ P_λ(θⱼ)` in place by cyclic coordinate
/// descent, alternating full sweeps with sweeps over the nonzero set.
fn coordinate_descent(gram: &DMatrix<f64>, c: &[f64], penalty: &PenaltyConfig, lambda: f64, theta: &mut [f64]) {
    let d = theta.len();
    let g = gram.as_slice();
    // grad[k] = c[k] − (Gθ)[k]
    let mut grad: Vec<f64> = (0..d).map(|k| c[k] - (0..d).map(|j| g[j * d + k] * theta[j]).sum::<f64>()).collect();
    let mut sweeps = 0;

    let update = |j: usize, theta: &mut [f64], grad: &mut [f64]| -> f64 {
        let v = g[j * d + j];
        let old = theta[j];
        if v <= 0.0 {
            return 0.0;
        }
        let new = threshold_update(grad[j] + v * old, v, lambda, penalty, j);
        let delta = new - old;
        if delta != 0.0 {
            for (gk, gjk) in grad.iter_mut().zip(&g[j * d..(j + 1) * d]) {
                *gk -= gjk * delta;
            }
            theta[j] = new;
        }
        delta.abs()
    };

    loop {
        let mut biggest = 0.0_f64;
        for j in 0..d {
            biggest = biggest.max(update(j, theta, &mut grad));
        }
        sweeps += 1;
        if biggest < INNER_TOL || sweeps >= MAX_SWEEPS {
            return;
        }
        let active: Vec<usize> = (0..d).filter(|&j| theta[j] != 0.0).collect();
        loop {
            let mut biggest = 0.0_f64;
            for &j in &active {
                biggest = biggest.max(update(j, theta, &mut grad));
            }
            sweeps += 1;
            if biggest < INNER_TOL || sweeps >= MAX_SWEEPS {
                break;
            }
        }
    }
}

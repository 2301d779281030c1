use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::glm::{GlmFamily, Observation};

use super::design::{solve_scaled, Design};
use super::max_abs_diff;

const RIDGE_TOL: f64 = 1e-8;
const RIDGE_MAX_ITER: usize = 200;
/// Pilot grid: `n · 10^k` for k evenly spaced over [−4, 1].
const PILOT_GRID_LEN: usize = 10;
const PILOT_LOG10_LO: f64 = -4.0;
const PILOT_LOG10_HI: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub theta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `tr((H + λI)⁻¹ H)` at the solution.
    pub effective_df: f64,
}

/// Minimizes `−ℓ(θ) + (λ/2)·Σⱼθⱼ²` by damped Newton (IRLS) steps.
pub fn fit_ridge(data: &[Observation], family: &GlmFamily, lambda_ridge: f64) -> Result<RidgeFit> {
    if data.len() < 2 {
        return Err(Error::invalid("ridge fit needs at least two observations"));
    }
    if !(lambda_ridge > 0.0 && lambda_ridge.is_finite()) {
        return Err(Error::invalid(format!("ridge penalty must be positive, got {lambda_ridge}")));
    }
    let design = Design::control(data, family)?;
    ridge_on(&design, lambda_ridge)
}

/// Ridge pilot with its penalty picked by BIC over an `n`-scaled grid,
/// counting effective degrees of freedom.
pub fn ridge_pilot(data: &[Observation], family: &GlmFamily) -> Result<Vec<f64>> {
    let design = Design::control(data, family)?;
    ridge_pilot_on(&design)
}

pub(crate) fn ridge_pilot_on(design: &Design) -> Result<Vec<f64>> {
    let n = design.n() as f64;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut init: Option<Vec<f64>> = None;
    for k in (0..PILOT_GRID_LEN).rev() {
        let e = PILOT_LOG10_LO + (PILOT_LOG10_HI - PILOT_LOG10_LO) * k as f64 / (PILOT_GRID_LEN - 1) as f64;
        let lambda = n * 10f64.powf(e);
        let fit = ridge_from(design, lambda, init.as_deref())?;
        let bic = -2.0 * design.log_likelihood(&fit.theta) + fit.effective_df * n.ln();
        if bic.is_finite() && best.as_ref().is_none_or(|(b, _)| bic < *b) {
            best = Some((bic, fit.theta.clone()));
        }
        init = Some(fit.theta);
    }
    best.map(|(_, t)| t).ok_or_else(|| Error::NonFinite("ridge pilot produced no finite fit".into()))
}

pub(crate) fn ridge_on(design: &Design, lambda: f64) -> Result<RidgeFit> {
    ridge_from(design, lambda, None)
}

fn ridge_from(design: &Design, lambda: f64, init: Option<&[f64]>) -> Result<RidgeFit> {
    let d = design.dim();
    let n = design.n() as f64;
    let coords: Vec<usize> = (0..d).collect();
    let objective = |t: &[f64]| -design.log_likelihood(t) + 0.5 * lambda * t.iter().map(|v| v * v).sum::<f64>();
    let mut theta = init.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; d]);
    let mut current = objective(&theta);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=RIDGE_MAX_ITER {
        iterations = it;
        let eta = design.eta(&theta);
        // (H + λI) θ_new = Xᵀ W (η + r), carried on the averaged scale
        let (mut h, rhs) = design.quadratic(&eta);
        for j in 0..d {
            h[(j, j)] += lambda / n;
        }
        let proposal = solve_scaled(&h, &rhs, &coords)?;
        let proposal: Vec<f64> = proposal.iter().copied().collect();

        let mut candidate = proposal.clone();
        let mut value = objective(&candidate);
        let mut step = 1.0;
        while !(value <= current + 1e-12 * current.abs().max(1.0)) && step > 1e-9 {
            step *= 0.5;
            for ((c, p), t) in candidate.iter_mut().zip(&proposal).zip(&theta) {
                *c = t + step * (p - t);
            }
            value = objective(&candidate);
        }
        if !value.is_finite() {
            break;
        }
        let change = max_abs_diff(&candidate, &theta);
        theta = candidate;
        current = value;
        if change < RIDGE_TOL {
            converged = true;
            break;
        }
    }
    let (h, _) = design.quadratic(&design.eta(&theta));
    let effective_df = effective_df(&h, lambda / n, &coords)?;
    Ok(RidgeFit { theta, converged, iterations, effective_df })
}

fn effective_df(h: &DMatrix<f64>, lambda: f64, coords: &[usize]) -> Result<f64> {
    let d = h.nrows();
    let mut reg = h.clone();
    for j in 0..d {
        reg[(j, j)] += lambda;
    }
    let mut trace = 0.0;
    for j in 0..d {
        let col: DVector<f64> = h.column(j).into_owned();
        trace += solve_scaled(&reg, &col, coords)?[j];
    }
    Ok(trace)
}

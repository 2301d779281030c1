//! Treatment-arm score statistic and its chi-squared calibration.
//!
//! With canonical links `∂μ/∂β = V(μ)·x`, so the score reduces to
//! `S = Σᵢ xᵢ(yᵢ − μᵢ)/a(φ)`. A non-canonical family would have to restore
//! the general weighted form.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distributions::{Cholesky, NoncentralChiSq};
use crate::error::{Error, Result};
use crate::fit::select_lambda;
use crate::glm::{GlmFamily, Observation};
use crate::penalty::PenaltyConfig;

/// Relative ridge added to a singular `V̄/n`.
pub const SINGULAR_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreComponents {
    /// Average score `S/n`.
    pub s_bar: DVector<f64>,
    pub info_beta: DMatrix<f64>,
    pub info_theta: DMatrix<f64>,
    pub v_bar: DMatrix<f64>,
    pub n_treat: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub lambda_stat: f64,
    pub u0: f64,
    /// The raw noncentrality was negative and was clamped to zero.
    pub u0_clamped: bool,
    pub dof: usize,
    pub p_value_pointwise: f64,
    /// Condition estimate of `V̄/n` from its Cholesky diagonal.
    pub v_condition: f64,
    pub regularized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Reject,
    Continue,
}

fn check_treatment(theta_hat: &[f64], beta0: &[f64], treat_data: &[Observation]) -> Result<()> {
    if treat_data.is_empty() {
        return Err(Error::NoData);
    }
    if theta_hat.len() != beta0.len() {
        return Err(Error::DimensionMismatch(format!(
            "theta has length {}, beta0 {}",
            theta_hat.len(),
            beta0.len()
        )));
    }
    for (i, o) in treat_data.iter().enumerate() {
        if !o.treated {
            return Err(Error::invalid(format!("observation {i} is not in the treatment arm")));
        }
        if o.dim() != theta_hat.len() {
            return Err(Error::DimensionMismatch(format!(
                "observation {i} has {} covariates, expected {}",
                o.dim(),
                theta_hat.len()
            )));
        }
    }
    Ok(())
}

/// Linear predictor `(θ̂ + β₀)ᵀx` on the treatment arm.
fn combined(theta_hat: &[f64], beta0: &[f64]) -> Vec<f64> {
    theta_hat.iter().zip(beta0).map(|(t, b)| t + b).collect()
}

/// Summed score `Σᵢ xᵢ(yᵢ − μᵢ)/a(φ)`.
pub fn score_vector(
    theta_hat: &[f64],
    beta0: &[f64],
    treat_data: &[Observation],
    family: &GlmFamily,
) -> Result<DVector<f64>> {
    check_treatment(theta_hat, beta0, treat_data)?;
    let coef = combined(theta_hat, beta0);
    let mut s = DVector::zeros(coef.len());
    for obs in treat_data {
        family.validate_response(obs.y)?;
        let r = (obs.y - family.mean(obs.dot(&coef))) / family.dispersion();
        for (sj, xj) in s.iter_mut().zip(&obs.x) {
            *sj += xj * r;
        }
    }
    Ok(s)
}

/// `(1/n)·Σᵢ V(μᵢ)·xᵢxᵢᵀ/a(φ)`, returned once for β and once for θ; on the
/// treatment arm the two derivatives coincide.
pub fn information_matrices(
    theta_hat: &[f64],
    beta0: &[f64],
    treat_data: &[Observation],
    family: &GlmFamily,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_treatment(theta_hat, beta0, treat_data)?;
    let coef = combined(theta_hat, beta0);
    let d = coef.len();
    let mut info = DMatrix::zeros(d, d);
    for obs in treat_data {
        let w = family.variance(family.mean(obs.dot(&coef))) / family.dispersion();
        for a in 0..d {
            let wa = w * obs.x[a];
            for b in a..d {
                info[(a, b)] += wa * obs.x[b];
            }
        }
    }
    let n = treat_data.len() as f64;
    for a in 0..d {
        for b in a..d {
            let v = info[(a, b)] / n;
            info[(a, b)] = v;
            info[(b, a)] = v;
        }
    }
    Ok((info.clone(), info))
}

/// `Ī + Ī·Σ̂·Ī`, symmetrized.
pub fn v_matrix(info_theta: &DMatrix<f64>, sigma_hat: &DMatrix<f64>) -> DMatrix<f64> {
    let v = info_theta + info_theta * sigma_hat * info_theta;
    (&v + v.transpose()) * 0.5
}

pub fn score_components(
    theta_hat: &[f64],
    sigma_hat: &DMatrix<f64>,
    beta0: &[f64],
    treat_data: &[Observation],
    family: &GlmFamily,
) -> Result<ScoreComponents> {
    let d = theta_hat.len();
    if sigma_hat.nrows() != d || sigma_hat.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}x{}, expected {d}x{d}",
            sigma_hat.nrows(),
            sigma_hat.ncols()
        )));
    }
    let s = score_vector(theta_hat, beta0, treat_data, family)?;
    let (info_beta, info_theta) = information_matrices(theta_hat, beta0, treat_data, family)?;
    let v_bar = v_matrix(&info_theta, sigma_hat);
    let n = treat_data.len();
    Ok(ScoreComponents { s_bar: s / n as f64, info_beta, info_theta, v_bar, n_treat: n })
}

/// Factorization of `V̄/n`, ridged when singular.
struct ScaledV {
    chol: Cholesky,
    regularized: bool,
}

fn factor_v(comp: &ScoreComponents) -> Result<ScaledV> {
    let d = comp.v_bar.nrows();
    let scaled = &comp.v_bar / comp.n_treat as f64;
    match Cholesky::new(&scaled) {
        Ok(chol) => Ok(ScaledV { chol, regularized: false }),
        Err(Error::NotPositiveDefinite { .. }) => {
            let ridge = SINGULAR_RIDGE * scaled.trace() / d as f64;
            let mut reg = scaled;
            for j in 0..d {
                reg[(j, j)] += ridge;
            }
            Ok(ScaledV { chol: Cholesky::new(&reg)?, regularized: true })
        }
        Err(e) => Err(e),
    }
}

/// `Λ̃ = S̄ᵀ(V̄/n)⁻¹S̄ − β₀ᵀĪ(V̄/n)⁻¹Īβ₀` with its p-value against
/// `χ²_{p+1}(u₀)`.
pub fn test_statistic(comp: &ScoreComponents, beta0: &[f64]) -> Result<TestResult> {
    let d = comp.s_bar.len();
    if beta0.len() != d || comp.v_bar.nrows() != d || comp.info_beta.nrows() != d {
        return Err(Error::DimensionMismatch(format!("statistic of dimension {d} with beta0 of length {}", beta0.len())));
    }
    if comp.n_treat == 0 {
        return Err(Error::NoData);
    }
    let v = factor_v(comp)?;
    let quad_s = v.chol.quadratic_form(&comp.s_bar);
    let ib = &comp.info_beta * DVector::from_column_slice(beta0);
    let quad_b = v.chol.quadratic_form(&ib);
    let lambda_stat = quad_s - quad_b;
    let v_condition = v.chol.condition_estimate();
    if !lambda_stat.is_finite() {
        return Err(Error::NonFinite(format!(
            "statistic is {lambda_stat}; condition of V/n {v_condition:e}, info diagonal {:?}",
            comp.info_beta.diagonal().as_slice()
        )));
    }
    let raw_u0 = -quad_b;
    let u0 = if raw_u0 > 0.0 { raw_u0 } else { 0.0 };
    let dist = NoncentralChiSq::new(d as f64, u0)?;
    let p_value_pointwise = if lambda_stat <= 0.0 { 1.0 } else { dist.survival(lambda_stat)? };
    Ok(TestResult {
        lambda_stat,
        u0,
        u0_clamped: raw_u0 < 0.0,
        dof: d,
        p_value_pointwise,
        v_condition,
        regularized: v.regularized,
    })
}

/// Noncentrality `(δ/√n − β₀)ᵀ Ī (V̄/n)⁻¹ Ī (δ/√n + β₀)` under the local
/// alternative `β = β₀ + δ/√n`.
pub fn alternative_noncentrality(comp: &ScoreComponents, delta: &[f64], beta0: &[f64]) -> Result<f64> {
    let d = comp.s_bar.len();
    if delta.len() != d || beta0.len() != d {
        return Err(Error::DimensionMismatch("delta and beta0 must match the statistic dimension".into()));
    }
    let v = factor_v(comp)?;
    let root_n = (comp.n_treat as f64).sqrt();
    let shift = DVector::from_iterator(d, delta.iter().map(|x| x / root_n));
    let b0 = DVector::from_column_slice(beta0);
    let left = &comp.info_beta * (&shift - &b0);
    let right = &comp.info_beta * (&shift + &b0);
    Ok(left.dot(&v.chol.solve(&right)))
}

/// One look: fit the control arm, score the treatment arm, compare with α.
pub fn run_single_post(
    control_data: &[Observation],
    treat_data: &[Observation],
    family: &GlmFamily,
    penalty: &PenaltyConfig,
    beta0: &[f64],
    alpha: f64,
) -> Result<(TestResult, Decision)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if control_data.is_empty() || treat_data.is_empty() {
        return Err(Error::NoData);
    }
    let (_, model) = select_lambda(control_data, family, penalty, None)?;
    let comp = score_components(&model.theta_hat, &model.sigma_hat, beta0, treat_data, family)?;
    let result = test_statistic(&comp, beta0)?;
    let decision = if result.p_value_pointwise <= alpha { Decision::Reject } else { Decision::Continue };
    Ok((result, decision))
}

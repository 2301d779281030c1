use crate::error::{Error, Result};
use crate::glm::{GlmFamily, Observation};
use crate::penalty::{PenaltyConfig, PenaltyKind};

use super::design::Design;
use super::mle::mle_on;
use super::penalized::{bic, finish, solve_on, with_pilot_weights, CdFit};
use super::FittedModel;

pub const LAMBDA_GRID_LEN: usize = 50;
pub const LAMBDA_MIN_RATIO: f64 = 1e-3;

/// Smallest λ at which every penalized coefficient is zero, read off the
/// score of the null model. Adaptive weights must already be attached for
/// AdaLasso, otherwise unit weights are assumed.
pub fn lambda_max(data: &[Observation], family: &GlmFamily, penalty: &PenaltyConfig) -> Result<f64> {
    let design = Design::control(data, family)?;
    Ok(null_model(&design, penalty).1)
}

/// `len` log-spaced values from `lambda_max` down to `ratio · lambda_max`.
pub fn default_lambda_grid(lambda_max: f64, len: usize, ratio: f64) -> Vec<f64> {
    if len == 1 {
        return vec![lambda_max];
    }
    let (hi, lo) = (lambda_max.ln(), (lambda_max * ratio).ln());
    (0..len).map(|k| (hi + (lo - hi) * k as f64 / (len - 1) as f64).exp()).collect()
}

/// Null-model coefficients and the resulting λ_max.
fn null_model(design: &Design, penalty: &PenaltyConfig) -> (Vec<f64>, f64) {
    let d = design.dim();
    let n = design.n() as f64;
    let family = design.family();
    let mut theta = vec![0.0; d];
    let mu = if penalty.is_penalized(0) {
        family.mean(0.0)
    } else {
        let ybar = design.y().iter().sum::<f64>() / n;
        if let Some(eta) = canonical_link(family, ybar) {
            theta[0] = eta;
        }
        family.mean(theta[0])
    };
    let phi = family.dispersion();
    let resid: Vec<f64> = design.y().iter().map(|y| (y - mu) / phi).collect();
    let mut lmax = 0.0_f64;
    for j in 0..d {
        if !penalty.is_penalized(j) {
            continue;
        }
        let w = penalty.weight(j);
        if w <= 0.0 {
            continue;
        }
        let g: f64 = resid.iter().zip(design.col(j)).map(|(r, x)| r * x).sum::<f64>() / n;
        lmax = lmax.max(g.abs() / w);
    }
    (theta, lmax)
}

fn canonical_link(family: &GlmFamily, mu: f64) -> Option<f64> {
    use crate::glm::FamilyKind::*;
    let eta = match family.kind() {
        GaussianIdentity => mu,
        BernoulliLogit => (mu / (1.0 - mu)).ln(),
        PoissonLog => mu.ln(),
    };
    eta.is_finite().then_some(eta)
}

/// Warm-started path from the largest λ down, returning the BIC minimizer
/// (ties go to the larger λ). Unpenalized configurations fall through to
/// maximum likelihood. Once the data separate at some λ every smaller λ is
/// skipped as well, since weaker penalties separate too.
pub fn select_lambda(
    data: &[Observation],
    family: &GlmFamily,
    penalty: &PenaltyConfig,
    grid: Option<&[f64]>,
) -> Result<(f64, FittedModel)> {
    let design = Design::control(data, family)?;
    if penalty.kind() == PenaltyKind::None {
        let model = mle_on(&design)?;
        return Ok((0.0, model));
    }
    let penalty = with_pilot_weights(&design, penalty)?;
    let (null_theta, lmax) = null_model(&design, &penalty);
    let mut grid: Vec<f64> = match grid {
        Some(g) => {
            if g.is_empty() || g.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                return Err(Error::invalid("lambda grid must hold positive finite values"));
            }
            g.to_vec()
        }
        None => default_lambda_grid(if lmax > 0.0 { lmax } else { f64::MIN_POSITIVE }, LAMBDA_GRID_LEN, LAMBDA_MIN_RATIO),
    };
    grid.sort_by(|a, b| b.total_cmp(a));

    let mut warm = null_theta;
    let mut best: Option<(f64, f64, CdFit)> = None;
    let mut skipped = 0;
    let mut last_err = None;
    for (k, &lambda) in grid.iter().enumerate() {
        match solve_on(&design, &penalty, lambda, Some(&warm)) {
            Ok(fit) => {
                let score = bic(&design, &fit.theta);
                warm.clone_from(&fit.theta);
                if score.is_finite() && best.as_ref().is_none_or(|(b, _, _)| score < *b) {
                    best = Some((score, lambda, fit));
                }
            }
            Err(e @ Error::Separation { .. }) => {
                skipped += grid.len() - k;
                last_err = Some(e);
                break;
            }
            Err(e) if e.is_data_dependent() => {
                skipped += 1;
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    let (_, lambda, mut fit) = match best {
        Some(b) => b,
        None => return Err(last_err.unwrap_or(Error::NoData)),
    };
    fit.diagnostics.skipped_lambdas = skipped;
    let model = finish(&design, fit, penalty, lambda)?;
    Ok((lambda, model))
}

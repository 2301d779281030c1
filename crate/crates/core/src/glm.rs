//! Exponential-family semantics for the three canonical-link models.
//!
//! Each observation contributes `(y·γ − b(γ))/a(φ) + c(y, φ)` to the
//! log-likelihood, with linear predictor `η = θᵀx + (βᵀx)·a` where `a` is the
//! treatment indicator. All links are canonical, so `γ = η`.

use serde::{Deserialize, Serialize};

use crate::distributions::ln_gamma;
use crate::error::{Error, Result};

/// Largest linear predictor exponentiated by the log link.
pub const ETA_CLAMP: f64 = 700.0;
/// Floor applied to the variance function when it is used as a weight.
pub const VARIANCE_FLOOR: f64 = 1e-10;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const MU_UPPER: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    GaussianIdentity,
    BernoulliLogit,
    PoissonLog,
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::GaussianIdentity => "gaussian",
            FamilyKind::BernoulliLogit => "bernoulli",
            FamilyKind::PoissonLog => "poisson",
        }
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "identity" | "normal" => Ok(FamilyKind::GaussianIdentity),
            "bernoulli" | "logit" | "binomial" => Ok(FamilyKind::BernoulliLogit),
            "poisson" | "log" => Ok(FamilyKind::PoissonLog),
            other => Err(Error::invalid(format!("unknown family '{other}'"))),
        }
    }
}

/// A GLM family with a fixed, known dispersion `a(φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFamily")]
pub struct GlmFamily {
    kind: FamilyKind,
    dispersion: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFamily {
    kind: FamilyKind,
    dispersion: f64,
}

impl TryFrom<RawFamily> for GlmFamily {
    type Error = Error;

    fn try_from(raw: RawFamily) -> Result<Self> {
        GlmFamily::new(raw.kind, raw.dispersion)
    }
}

/// Result of the inverse link, with a flag set when a numeric guard fired.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mean {
    pub value: f64,
    pub saturated: bool,
}

/// Result of the variance function, with a flag set when floored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variance {
    pub value: f64,
    pub floored: bool,
}

impl GlmFamily {
    /// Bernoulli and Poisson families only admit unit dispersion.
    pub fn new(kind: FamilyKind, dispersion: f64) -> Result<Self> {
        if !(dispersion.is_finite() && dispersion > 0.0) {
            return Err(Error::invalid(format!("dispersion must be positive, got {dispersion}")));
        }
        if kind != FamilyKind::GaussianIdentity && dispersion != 1.0 {
            return Err(Error::invalid(format!(
                "{} family has dispersion fixed at 1, got {dispersion}",
                kind.name()
            )));
        }
        Ok(Self { kind, dispersion })
    }

    pub fn gaussian() -> Self {
        Self { kind: FamilyKind::GaussianIdentity, dispersion: 1.0 }
    }

    pub fn gaussian_with_dispersion(dispersion: f64) -> Result<Self> {
        Self::new(FamilyKind::GaussianIdentity, dispersion)
    }

    pub fn bernoulli() -> Self {
        Self { kind: FamilyKind::BernoulliLogit, dispersion: 1.0 }
    }

    pub fn poisson() -> Self {
        Self { kind: FamilyKind::PoissonLog, dispersion: 1.0 }
    }

    pub fn of_kind(kind: FamilyKind) -> Self {
        Self { kind, dispersion: 1.0 }
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn dispersion(&self) -> f64 {
        self.dispersion
    }

    /// μ = g⁻¹(η), reporting whether a numeric guard was applied.
    pub fn inverse_link(&self, eta: f64) -> Result<Mean> {
        if !eta.is_finite() {
            return Err(Error::invalid(format!("linear predictor must be finite, got {eta}")));
        }
        Ok(match self.kind {
            FamilyKind::GaussianIdentity => Mean { value: eta, saturated: false },
            FamilyKind::BernoulliLogit => {
                let raw = logistic(eta);
                let value = raw.clamp(f64::MIN_POSITIVE, MU_UPPER);
                Mean { value, saturated: value != raw }
            }
            FamilyKind::PoissonLog => {
                let clamped = eta.min(ETA_CLAMP);
                let raw = clamped.exp();
                let value = raw.max(f64::MIN_POSITIVE);
                Mean { value, saturated: clamped != eta || value != raw }
            }
        })
    }

    /// Unchecked inverse link for inner loops; applies the same guards as
    /// [`GlmFamily::inverse_link`].
    #[inline]
    pub fn mean(&self, eta: f64) -> f64 {
        match self.kind {
            FamilyKind::GaussianIdentity => eta,
            FamilyKind::BernoulliLogit => logistic(eta).clamp(f64::MIN_POSITIVE, MU_UPPER),
            FamilyKind::PoissonLog => eta.min(ETA_CLAMP).exp().max(f64::MIN_POSITIVE),
        }
    }

    /// V(μ) = b''(γ(μ)), floored at [`VARIANCE_FLOOR`].
    pub fn variance_function(&self, mu: f64) -> Result<Variance> {
        let raw = match self.kind {
            FamilyKind::GaussianIdentity => {
                if !mu.is_finite() {
                    return Err(Error::Domain(format!("gaussian mean must be finite, got {mu}")));
                }
                1.0
            }
            FamilyKind::BernoulliLogit => {
                if !(mu > 0.0 && mu < 1.0) {
                    return Err(Error::Domain(format!("bernoulli mean must lie in (0, 1), got {mu}")));
                }
                mu * (1.0 - mu)
            }
            FamilyKind::PoissonLog => {
                if !(mu > 0.0 && mu.is_finite()) {
                    return Err(Error::Domain(format!("poisson mean must be positive, got {mu}")));
                }
                mu
            }
        };
        Ok(if raw < VARIANCE_FLOOR {
            Variance { value: VARIANCE_FLOOR, floored: true }
        } else {
            Variance { value: raw, floored: false }
        })
    }

    /// Unchecked, floored variance function for inner loops.
    #[inline]
    pub fn variance(&self, mu: f64) -> f64 {
        let v = match self.kind {
            FamilyKind::GaussianIdentity => 1.0,
            FamilyKind::BernoulliLogit => mu * (1.0 - mu),
            FamilyKind::PoissonLog => mu,
        };
        v.max(VARIANCE_FLOOR)
    }

    pub fn validate_response(&self, y: f64) -> Result<()> {
        let ok = match self.kind {
            FamilyKind::GaussianIdentity => y.is_finite(),
            FamilyKind::BernoulliLogit => y == 0.0 || y == 1.0,
            FamilyKind::PoissonLog => y.is_finite() && y >= 0.0 && y.fract() == 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("response {y} is invalid for the {} family", self.kind.name())))
        }
    }

    /// One observation's log-density at linear predictor `eta`, including the
    /// data-only term `c(y, φ)`.
    #[inline]
    pub fn log_density(&self, y: f64, eta: f64) -> f64 {
        match self.kind {
            FamilyKind::GaussianIdentity => {
                let r = y - eta;
                -0.5 * r * r / self.dispersion - 0.5 * (LN_2PI + self.dispersion.ln())
            }
            FamilyKind::BernoulliLogit => y * eta - softplus(eta),
            FamilyKind::PoissonLog => {
                let eta = eta.min(ETA_CLAMP);
                y * eta - eta.exp() - ln_gamma(y + 1.0)
            }
        }
    }
}

#[inline]
fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// One subject: response, covariates with a leading intercept, arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub y: f64,
    /// Covariates including `x[0] = 1`.
    pub x: Vec<f64>,
    pub treated: bool,
}

impl Observation {
    pub fn new(y: f64, x: Vec<f64>, treated: bool) -> Result<Self> {
        if x.first() != Some(&1.0) {
            return Err(Error::invalid("covariate vector must start with the intercept 1"));
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("observation contains a non-finite value"));
        }
        Ok(Self { y, x, treated })
    }

    /// Builds an observation from covariates without the intercept.
    pub fn with_covariates(y: f64, covariates: &[f64], treated: bool) -> Result<Self> {
        let mut x = Vec::with_capacity(covariates.len() + 1);
        x.push(1.0);
        x.extend_from_slice(covariates);
        Self::new(y, x, treated)
    }

    /// p + 1
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    #[inline]
    pub fn dot(&self, v: &[f64]) -> f64 {
        self.x.iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

/// Log-likelihood of the interaction model over `data`.
pub fn log_likelihood(family: &GlmFamily, data: &[Observation], theta: &[f64], beta: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (i, obs) in data.iter().enumerate() {
        if obs.dim() != theta.len() || obs.dim() != beta.len() {
            return Err(Error::DimensionMismatch(format!(
                "observation {i} has {} covariates, theta {}, beta {}",
                obs.dim(),
                theta.len(),
                beta.len()
            )));
        }
        family.validate_response(obs.y)?;
        let mut eta = obs.dot(theta);
        if obs.treated {
            eta += obs.dot(beta);
        }
        total += family.log_density(obs.y, eta);
    }
    Ok(total)
}

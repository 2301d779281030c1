use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::{cholesky_factor, ln_gamma};
use crate::error::{Error, Result};
use crate::glm::{FamilyKind, GlmFamily, Observation};

/// Number of structured covariates ahead of the N(0,1) noise block.
pub const STRUCTURED_COLUMNS: usize = 6;
/// Pairwise correlation of the structured block in the MVN setting.
pub const MVN_CORRELATION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateSetting {
    /// Independent normal and uniform columns with shifted means.
    Nu,
    /// Equicorrelated standard normal columns.
    Mvn,
}

impl std::str::FromStr for CovariateSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nu" => Ok(CovariateSetting::Nu),
            "mvn" => Ok(CovariateSetting::Mvn),
            other => Err(Error::invalid(format!("unknown covariate setting '{other}'"))),
        }
    }
}

impl CovariateSetting {
    pub fn name(&self) -> &'static str {
        match self {
            CovariateSetting::Nu => "nu",
            CovariateSetting::Mvn => "mvn",
        }
    }
}

/// `n × (p+1)` covariate matrix with a leading column of ones.
///
/// Columns 1 to 6 are N(0,1), N(1,1), N(2,1), U(−1,1), U(0,2), U(1,3) under
/// [`CovariateSetting::Nu`] and jointly normal with unit variance and 0.5
/// correlation under [`CovariateSetting::Mvn`]. Remaining columns are iid
/// N(0,1).
pub fn gen_covariates<R: Rng + ?Sized>(setting: CovariateSetting, n: usize, p: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if p < STRUCTURED_COLUMNS + 1 {
        return Err(Error::invalid(format!("covariate layout needs p >= 7, got {p}")));
    }
    let mut x = DMatrix::zeros(n, p + 1);
    let chol = match setting {
        CovariateSetting::Mvn => Some(cholesky_factor(&DMatrix::from_fn(STRUCTURED_COLUMNS, STRUCTURED_COLUMNS, |i, j| {
            if i == j {
                1.0
            } else {
                MVN_CORRELATION
            }
        }))?),
        CovariateSetting::Nu => None,
    };
    let mut z = [0.0; STRUCTURED_COLUMNS];
    for i in 0..n {
        x[(i, 0)] = 1.0;
        match &chol {
            None => {
                x[(i, 1)] = rng.sample::<f64, _>(StandardNormal);
                x[(i, 2)] = 1.0 + rng.sample::<f64, _>(StandardNormal);
                x[(i, 3)] = 2.0 + rng.sample::<f64, _>(StandardNormal);
                x[(i, 4)] = rng.random_range(-1.0..1.0);
                x[(i, 5)] = rng.random_range(0.0..2.0);
                x[(i, 6)] = rng.random_range(1.0..3.0);
            }
            Some(l) => {
                for v in z.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                for r in 0..STRUCTURED_COLUMNS {
                    x[(i, r + 1)] = (0..=r).map(|k| l[(r, k)] * z[k]).sum();
                }
            }
        }
        for j in (STRUCTURED_COLUMNS + 1)..=p {
            x[(i, j)] = rng.sample(StandardNormal);
        }
    }
    Ok(x)
}

/// Poisson draw: sequential inversion below mean 30, transformed rejection
/// with squeeze (PTRS) above.
pub fn sample_poisson<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> f64 {
    if mu <= 0.0 {
        return 0.0;
    }
    if mu < 30.0 {
        let u: f64 = rng.random();
        let mut k = 0.0;
        let mut prob = (-mu).exp();
        let mut cdf = prob;
        while u > cdf {
            k += 1.0;
            prob *= mu / k;
            cdf += prob;
            if prob < 1e-300 && k > mu {
                break;
            }
        }
        return k;
    }
    let smu = mu.sqrt();
    let b = 0.931 + 2.53 * smu;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    let ln_mu = mu.ln();
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mu + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln() <= -mu + k * ln_mu - ln_gamma(k + 1.0) {
            return k;
        }
    }
}

/// Responses under `η = Xθ₀ + (Xβ)·a`.
pub fn gen_response<R: Rng + ?Sized>(
    family: &GlmFamily,
    theta0: &[f64],
    beta: &[f64],
    x: &DMatrix<f64>,
    treated: &[bool],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let d = x.ncols();
    if theta0.len() != d || beta.len() != d || treated.len() != x.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "design {}x{d}, theta {}, beta {}, arms {}",
            x.nrows(),
            theta0.len(),
            beta.len(),
            treated.len()
        )));
    }
    let sd = family.dispersion().sqrt();
    let mut y = Vec::with_capacity(x.nrows());
    for (i, &t) in treated.iter().enumerate() {
        let mut eta: f64 = (0..d).map(|j| x[(i, j)] * theta0[j]).sum();
        if t {
            eta += (0..d).map(|j| x[(i, j)] * beta[j]).sum::<f64>();
        }
        let v = match family.kind() {
            FamilyKind::GaussianIdentity => eta + sd * rng.sample::<f64, _>(StandardNormal),
            FamilyKind::BernoulliLogit => {
                if rng.random::<f64>() < family.mean(eta) {
                    1.0
                } else {
                    0.0
                }
            }
            FamilyKind::PoissonLog => sample_poisson(family.mean(eta), rng),
        };
        y.push(v);
    }
    Ok(y)
}

/// Arm labels drawn as fair coin flips.
pub fn gen_arms<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<bool> {
    (0..n).map(|_| rng.random::<bool>()).collect()
}

/// Joins a covariate matrix, responses and arms into observations.
pub fn to_observations(x: &DMatrix<f64>, y: &[f64], treated: &[bool]) -> Result<Vec<Observation>> {
    (0..x.nrows())
        .map(|i| Observation::new(y[i], x.row(i).iter().copied().collect(), treated[i]))
        .collect()
}

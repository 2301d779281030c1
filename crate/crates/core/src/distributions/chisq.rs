use serde::{Deserialize, Serialize};

use super::gamma::{ln_gamma, regularized_gamma_q};
use crate::error::{Error, Result};

/// Poisson tail mass left out of the mixture series.
pub const DEFAULT_TAIL_MASS: f64 = 1e-12;
const NEGLIGIBLE_TERM: f64 = 1e-14;
const QUANTILE_MAX_ITER: usize = 200;

/// Central chi-squared survival function Pr(X ≥ x).
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    regularized_gamma_q(0.5 * df, 0.5 * x)
}

/// χ²_df(nc), the noncentral chi-squared distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoncentralChiSq {
    df: f64,
    nc: f64,
}

impl NoncentralChiSq {
    pub fn new(df: f64, nc: f64) -> Result<Self> {
        if !(df.is_finite() && df > 0.0) {
            return Err(Error::invalid(format!("degrees of freedom must be positive, got {df}")));
        }
        if !(nc.is_finite() && nc >= 0.0) {
            return Err(Error::invalid(format!("noncentrality must be nonnegative, got {nc}")));
        }
        Ok(Self { df, nc })
    }

    pub fn central(df: f64) -> Result<Self> {
        Self::new(df, 0.0)
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    pub fn nc(&self) -> f64 {
        self.nc
    }

    pub fn survival(&self, x: f64) -> Result<f64> {
        self.survival_with_tail_mass(x, DEFAULT_TAIL_MASS)
    }

    /// Survival function with an explicit Poisson tail-mass cutoff for the
    /// mixture series.
    pub fn survival_with_tail_mass(&self, x: f64, tail_mass: f64) -> Result<f64> {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::invalid(format!("survival argument must be finite and >= 0, got {x}")));
        }
        if x == 0.0 {
            return Ok(1.0);
        }
        let half_x = 0.5 * x;
        let half_df = 0.5 * self.df;
        if self.nc == 0.0 {
            return Ok(regularized_gamma_q(half_df, half_x));
        }

        // Σ_j Pois(j; nc/2) · Q(df/2 + j, x/2)
        let h = 0.5 * self.nc;
        let ln_h = h.ln();
        let max_terms = (h + 60.0 * h.sqrt() + 1000.0) as usize;
        let mut cumulative = 0.0;
        let mut total = 0.0;
        for j in 0..max_terms {
            let jf = j as f64;
            let weight = (-h + jf * ln_h - ln_gamma(jf + 1.0)).exp();
            let term = weight * regularized_gamma_q(half_df + jf, half_x);
            cumulative += weight;
            total += term;
            if cumulative >= 1.0 - tail_mass && term < NEGLIGIBLE_TERM {
                break;
            }
        }
        Ok(total.clamp(0.0, 1.0))
    }

    /// Smallest x with Pr(X ≤ x) = p, by bisection.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!("quantile level must lie in (0, 1), got {p}")));
        }
        let target = 1.0 - p;
        let mut lo = 0.0_f64;
        let mut hi = self.df + self.nc + 40.0 * (2.0 * self.df + 4.0 * self.nc).sqrt() + 40.0;
        while self.survival(hi)? > target {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..QUANTILE_MAX_ITER {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.survival(mid)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // pick the endpoint whose survival is closer to the target
        let s_lo = self.survival(lo)?;
        let s_hi = self.survival(hi)?;
        Ok(if (s_lo - target).abs() <= (s_hi - target).abs() { lo } else { hi })
    }
}

/// Pr(X ≥ x) for X ~ χ²_df(nc).
pub fn noncentral_chi2_survival(x: f64, dist: &NoncentralChiSq) -> Result<f64> {
    dist.survival(x)
}

/// Inverse of the distribution function of χ²_df(nc).
pub fn noncentral_chi2_quantile(p: f64, dist: &NoncentralChiSq) -> Result<f64> {
    dist.quantile(p)
}

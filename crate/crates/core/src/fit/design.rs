use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::distributions::Cholesky;
use crate::error::{Error, Result};
use crate::glm::{FamilyKind, GlmFamily, Observation};

/// Column-major design matrix with its response, validated for one family.
#[derive(Debug, Clone)]
pub struct Design {
    n: usize,
    d: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    family: GlmFamily,
    /// Gaussian weights do not depend on θ, so the averaged quadratic is
    /// computed once.
    gaussian_quadratic: OnceLock<(DMatrix<f64>, DVector<f64>)>,
}

impl Design {
    /// Builds the control-arm design; every observation must be untreated.
    pub fn control(data: &[Observation], family: &GlmFamily) -> Result<Self> {
        if data.iter().any(|o| o.treated) {
            return Err(Error::invalid("control-arm fit received a treated observation"));
        }
        Self::from_rows(data, family)
    }

    /// Builds a design ignoring arm labels.
    pub fn from_rows(data: &[Observation], family: &GlmFamily) -> Result<Self> {
        let first = data.first().ok_or(Error::NoData)?;
        let d = first.dim();
        let n = data.len();
        let mut x = vec![0.0; n * d];
        let mut y = Vec::with_capacity(n);
        for (i, obs) in data.iter().enumerate() {
            if obs.dim() != d {
                return Err(Error::DimensionMismatch(format!(
                    "observation {i} has {} covariates, expected {d}",
                    obs.dim()
                )));
            }
            family.validate_response(obs.y)?;
            for (j, v) in obs.x.iter().enumerate() {
                x[j * n + i] = *v;
            }
            y.push(obs.y);
        }
        Ok(Self { n, d, x, y, family: *family, gaussian_quadratic: OnceLock::new() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn family(&self) -> &GlmFamily {
        &self.family
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.x[j * self.n..(j + 1) * self.n]
    }

    pub fn eta(&self, theta: &[f64]) -> Vec<f64> {
        let mut eta = vec![0.0; self.n];
        for (j, &t) in theta.iter().enumerate() {
            if t != 0.0 {
                for (e, x) in eta.iter_mut().zip(self.col(j)) {
                    *e += t * x;
                }
            }
        }
        eta
    }

    pub fn log_likelihood_at_eta(&self, eta: &[f64]) -> f64 {
        self.y.iter().zip(eta).map(|(y, e)| self.family.log_density(*y, *e)).sum()
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        self.log_likelihood_at_eta(&self.eta(theta))
    }

    /// `Σᵢ wᵢ x_{iA} x_{iA}ᵀ` over the listed coordinates.
    pub fn weighted_gram(&self, w: &[f64], coords: &[usize]) -> DMatrix<f64> {
        let k = coords.len();
        let mut g = DMatrix::zeros(k, k);
        let mut wx = vec![0.0; self.n];
        for (a, &ja) in coords.iter().enumerate() {
            for ((o, wi), xi) in wx.iter_mut().zip(w).zip(self.col(ja)) {
                *o = wi * xi;
            }
            for (b, &jb) in coords.iter().enumerate().skip(a) {
                let s: f64 = wx.iter().zip(self.col(jb)).map(|(p, q)| p * q).sum();
                g[(a, b)] = s;
                g[(b, a)] = s;
            }
        }
        g
    }

    /// `Σᵢ vᵢ x_{iA}`.
    pub fn cross(&self, v: &[f64], coords: &[usize]) -> DVector<f64> {
        DVector::from_iterator(
            coords.len(),
            coords.iter().map(|&j| v.iter().zip(self.col(j)).map(|(a, b)| a * b).sum()),
        )
    }

    /// Weights `V(μ)/φ` and working residuals `(y − μ)/V(μ)` at `eta`.
    pub fn working(&self, eta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let phi = self.family.dispersion();
        let mut w = Vec::with_capacity(self.n);
        let mut r = Vec::with_capacity(self.n);
        for (y, e) in self.y.iter().zip(eta) {
            let mu = self.family.mean(*e);
            let v = self.family.variance(mu);
            w.push(v / phi);
            r.push((y - mu) / v);
        }
        (w, r)
    }

    /// Averaged IRLS quadratic at `eta`: `G = (1/n)·XᵀWX` and
    /// `c = (1/n)·XᵀW(η + r)` with working residual `r`.
    pub fn quadratic(&self, eta: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        if self.family.kind() == FamilyKind::GaussianIdentity {
            return self
                .gaussian_quadratic
                .get_or_init(|| {
                    let w = vec![1.0 / (self.family.dispersion() * self.n as f64); self.n];
                    let z: Vec<f64> = self.y.iter().zip(&w).map(|(y, wi)| y * wi).collect();
                    let all: Vec<usize> = (0..self.d).collect();
                    (self.weighted_gram(&w, &all), self.cross(&z, &all))
                })
                .clone();
        }
        let (mut w, r) = self.working(eta);
        let nf = self.n as f64;
        for wi in w.iter_mut() {
            *wi /= nf;
        }
        let z: Vec<f64> = eta.iter().zip(&r).zip(&w).map(|((e, ri), wi)| wi * (e + ri)).collect();
        let all: Vec<usize> = (0..self.d).collect();
        (self.weighted_gram(&w, &all), self.cross(&z, &all))
    }

    /// Separation guard for the non-Gaussian families.
    pub fn check_separation(&self, eta: &[f64], iteration: usize) -> Result<()> {
        if self.family.kind() == FamilyKind::GaussianIdentity {
            return Ok(());
        }
        if eta.iter().any(|e| e.abs() > super::SEPARATION_ETA) {
            return Err(Error::Separation { iteration });
        }
        Ok(())
    }
}

/// Solves `G x = b` for symmetric PSD `G` after unit-diagonal scaling, so the
/// pivot threshold is relative. A failing pivot is reported as the
/// coordinate `coords[pivot]`.
pub(crate) fn solve_scaled(g: &DMatrix<f64>, b: &DVector<f64>, coords: &[usize]) -> Result<DVector<f64>> {
    let (chol, scale) = factor_scaled(g, coords)?;
    let bs = b.component_mul(&scale);
    Ok(chol.solve(&bs).component_mul(&scale))
}

/// Inverse of a symmetric PD matrix via the scaled factorization.
pub(crate) fn inverse_scaled(g: &DMatrix<f64>, coords: &[usize]) -> Result<DMatrix<f64>> {
    let (chol, scale) = factor_scaled(g, coords)?;
    let inv = chol.inverse();
    let k = g.nrows();
    Ok(DMatrix::from_fn(k, k, |i, j| inv[(i, j)] * scale[i] * scale[j]))
}

fn factor_scaled(g: &DMatrix<f64>, coords: &[usize]) -> Result<(Cholesky, DVector<f64>)> {
    let k = g.nrows();
    let mut scale = DVector::zeros(k);
    for i in 0..k {
        let d = g[(i, i)];
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::RankDeficient { coordinates: vec![coords[i]] });
        }
        scale[i] = 1.0 / d.sqrt();
    }
    let mut s = DMatrix::from_fn(k, k, |i, j| g[(i, j)] * scale[i] * scale[j]);
    s = (&s + s.transpose()) * 0.5;
    match Cholesky::new(&s) {
        Ok(c) => Ok((c, scale)),
        Err(Error::NotPositiveDefinite { pivot, .. }) => {
            Err(Error::RankDeficient { coordinates: collinear_group(&s, pivot, coords) })
        }
        Err(e) => Err(e),
    }
}

/// Coordinates up to and including `pivot` that carry weight in the
/// dependency detected at `pivot`.
fn collinear_group(s: &DMatrix<f64>, pivot: usize, coords: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = (0..pivot)
        .filter(|&i| s[(i, pivot)].abs() > 1e-8)
        .map(|i| coords[i])
        .collect();
    out.push(coords[pivot]);
    out
}

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const MIN_PIVOT: f64 = 1e-12;

/// Lower-triangular factor `L` with `L Lᵀ = cov`.
///
/// Rejects inputs that are asymmetric beyond `1e-10` (relative to the largest
/// entry when that exceeds one) and inputs with a pivot below `1e-12`.
pub fn cholesky_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Cholesky::new(cov).map(|c| c.l)
}

/// A Cholesky factorization with the solves the statistic needs.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "cholesky of a {}x{} matrix",
                n,
                a.ncols()
            )));
        }
        let scale = a.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in 0..i {
                let diff = (a[(i, j)] - a[(j, i)]).abs();
                if !(diff <= SYMMETRY_TOL * scale) {
                    return Err(Error::Asymmetric {
                        row: i,
                        col: j,
                        difference: diff,
                    });
                }
            }
        }

        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut pivot = a[(j, j)];
            for k in 0..j {
                pivot -= l[(j, k)] * l[(j, k)];
            }
            if !(pivot >= MIN_PIVOT) {
                return Err(Error::NotPositiveDefinite {
                    pivot: j,
                    value: pivot,
                });
            }
            let d = pivot.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut x = self.solve_lower(b);
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// `bᵀ A⁻¹ b`, computed as `|L⁻¹ b|²`.
    pub fn quadratic_form(&self, b: &DVector<f64>) -> f64 {
        self.solve_lower(b).norm_squared()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::<f64>::zeros(n, n);
        let mut e = DVector::<f64>::zeros(n);
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            inv.set_column(j, &self.solve(&e));
        }
        // exact symmetry for downstream symmetric checks
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = m;
                inv[(j, i)] = m;
            }
        }
        inv
    }

    /// Squared ratio of the extreme diagonal entries of `L`; a cheap
    /// condition-number estimate.
    pub fn condition_estimate(&self) -> f64 {
        let d = self.l.diagonal();
        let max = d.iter().cloned().fold(f64::MIN, f64::max);
        let min = d.iter().cloned().fold(f64::MAX, f64::min);
        (max / min).powi(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_factor_is_identity() {
        let l = cholesky_factor(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(l, DMatrix::identity(3, 3));
    }

    #[test]
    fn hand_checked_two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 5.0]);
        let l = cholesky_factor(&a).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2.0]);
        assert!((l - expected).abs().max() < 1e-15);
    }

    #[test]
    fn reconstruction_of_random_pd_matrix() {
        // AᵀA + I with a fixed pseudo-random A
        let mut state = 12345_u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let a = DMatrix::from_fn(5, 5, |_, _| next());
        let cov = a.transpose() * &a + DMatrix::identity(5, 5);
        let l = cholesky_factor(&cov).unwrap();
        assert!((&l * l.transpose() - &cov).abs().max() < 1e-9);
        for i in 0..5 {
            for j in (i + 1)..5 {
                assert_eq!(l[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(cholesky_factor(&a), Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn rejects_indefinite_input_and_names_pivot() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        match cholesky_factor(&a) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn solve_and_inverse_agree() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let c = Cholesky::new(&a).unwrap();
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let x = c.solve(&b);
        assert!((&a * &x - &b).amax() < 1e-13);
        assert!((&a * c.inverse() - DMatrix::identity(3, 3)).amax() < 1e-13);
        assert!((c.quadratic_form(&b) - b.dot(&x)).abs() < 1e-13);
    }
}

#![allow(dead_code)]
pub mod checks;

use nalgebra::{DMatrix, DVector};
use post_core::{GlmFamily, FamilyKind, Observation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = DMatrix::identity(n, n);
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[(i, c)].abs().total_cmp(&m[(j, c)].abs())).unwrap();
        m.swap_rows(c, piv);
        inv.swap_rows(c, piv);
        let d = m[(c, c)];
        assert!(d.abs() > 1e-300, "singular");
        for k in 0..n {
            m[(c, k)] /= d;
            inv[(c, k)] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[(r, c)];
                if f != 0.0 {
                    for k in 0..n {
                        m[(r, k)] -= f * m[(c, k)];
                        inv[(r, k)] -= f * inv[(c, k)];
                    }
                }
            }
        }
    }
    inv
}

/// Determinant by the same elimination.
pub fn gauss_det(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut m = a.clone();
    let mut det = 1.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[(i, c)].abs().total_cmp(&m[(j, c)].abs())).unwrap();
        if piv != c {
            m.swap_rows(c, piv);
            det = -det;
        }
        let d = m[(c, c)];
        det *= d;
        for r in c + 1..n {
            let f = m[(r, c)] / d;
            for k in c..n {
                m[(r, k)] -= f * m[(c, k)];
            }
        }
    }
    det
}

pub fn random_spd(d: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| normal(rng));
    (&a * a.transpose() + DMatrix::identity(d, d) * d as f64) * scale
}

pub fn draw_response(family: &GlmFamily, eta: f64, rng: &mut ChaCha8Rng) -> f64 {
    match family.kind() {
        FamilyKind::GaussianIdentity => eta + family.dispersion().sqrt() * normal(rng),
        FamilyKind::BernoulliLogit => {
            if rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp()) {
                1.0
            } else {
                0.0
            }
        }
        FamilyKind::PoissonLog => {
            // Knuth's product method, fine for the small means used here
            let l = (-eta.exp()).exp();
            let mut k = 0.0;
            let mut prod = rng.random::<f64>();
            while prod > l {
                k += 1.0;
                prod *= rng.random::<f64>();
            }
            k
        }
    }
}

/// `n` observations in one arm with standard-normal covariates scaled by
/// `x_scale` and responses drawn at `η = coefᵀx`.
pub fn sample_arm(
    family: &GlmFamily,
    coef: &[f64],
    n: usize,
    x_scale: f64,
    treated: bool,
    rng: &mut ChaCha8Rng,
) -> Vec<Observation> {
    (0..n)
        .map(|_| {
            let mut x = vec![1.0];
            x.extend((1..coef.len()).map(|_| x_scale * normal(rng)));
            let eta: f64 = x.iter().zip(coef).map(|(a, b)| a * b).sum();
            Observation::new(draw_response(family, eta, rng), x, treated).unwrap()
        })
        .collect()
}

pub fn families() -> [GlmFamily; 3] {
    [GlmFamily::gaussian(), GlmFamily::bernoulli(), GlmFamily::poisson()]
}

/// Survival function of χ²₆, `e^{−x/2}(1 + x/2 + x²/8)`.
pub fn chi2_6_sf(x: f64) -> f64 {
    let h = 0.5 * x;
    (-h).exp() * (1.0 + h + h * h / 2.0)
}

/// One-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d = 0.0_f64;
    for (i, x) in s.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let rn = n.sqrt();
    let lam = (rn + 0.12 + 0.11 / rn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-1.0_f64).powi(k - 1) * (-2.0 * kf * kf * lam * lam).exp();
        p += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    (d, p.clamp(0.0, 1.0))
}

/// Quasi-Newton minimization with central-difference gradients and a
/// backtracking line search.
pub fn bfgs(f: impl Fn(&DVector<f64>) -> f64, x0: DVector<f64>, tol: f64, max_iter: usize) -> DVector<f64> {
    let n = x0.len();
    let grad = |x: &DVector<f64>| {
        DVector::from_fn(n, |i, _| {
            let h = 1e-6 * (1.0 + x[i].abs());
            let mut a = x.clone();
            let mut b = x.clone();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
    };
    let mut x = x0;
    let mut g = grad(&x);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fx = f(&x);
    for _ in 0..max_iter {
        if g.amax() < tol {
            break;
        }
        let mut p = -(&h * &g);
        if p.dot(&g) >= 0.0 {
            h = DMatrix::identity(n, n);
            p = -g.clone();
        }
        let mut t = 1.0;
        let mut xn = &x + &p * t;
        let mut fn_ = f(&xn);
        while fn_ > fx + 1e-4 * t * p.dot(&g) && t > 1e-16 {
            t *= 0.5;
            xn = &x + &p * t;
            fn_ = f(&xn);
        }
        let gn = grad(&xn);
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let a = &i - &s * y.transpose() * rho;
            let b = &i - &y * s.transpose() * rho;
            h = &a * &h * &b + &s * s.transpose() * rho;
        }
        x = xn;
        g = gn;
        fx = fn_;
    }
    x
}

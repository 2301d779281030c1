//! Oracle comparisons shared by the oracle suite and the acceptance run.
//! Each returns the worst discrepancy seen.

use nalgebra::DVector;
use post_core::distributions::{chi2_sf, mvn_log_density, NoncentralChiSq};
use post_core::glm::log_likelihood;
use post_core::penalty::{penalty_value, threshold_update, PenaltyConfig};
use post_core::score::{information_matrices, score_components, score_vector, test_statistic};
use post_core::GlmFamily;
use rand::Rng;

use super::{bfgs, families, gauss_jordan_inverse, normal, random_spd, rng, sample_arm};

const FD_STEP: f64 = 1e-5;

/// Largest relative gap between the score and a central difference of the
/// log-likelihood in β, over `instances` random problems per family.
pub fn score_vs_finite_difference(instances: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0_f64;
    for family in families() {
        for _ in 0..instances {
            let d = r.random_range(2..6);
            let theta: Vec<f64> = (0..d).map(|_| 0.3 * normal(&mut r)).collect();
            let beta0: Vec<f64> = (0..d).map(|_| 0.2 * normal(&mut r)).collect();
            let coef: Vec<f64> = theta.iter().zip(&beta0).map(|(a, b)| a + b).collect();
            let data = sample_arm(&family, &coef, 40, 0.7, true, &mut r);
            let s = score_vector(&theta, &beta0, &data, &family).unwrap();
            for j in 0..d {
                let mut up = beta0.clone();
                let mut dn = beta0.clone();
                up[j] += FD_STEP;
                dn[j] -= FD_STEP;
                let fd = (log_likelihood(&family, &data, &theta, &up).unwrap()
                    - log_likelihood(&family, &data, &theta, &dn).unwrap())
                    / (2.0 * FD_STEP);
                worst = worst.max((fd - s[j]).abs() / s[j].abs().max(1.0));
            }
        }
    }
    worst
}

/// Largest relative gap between the averaged information and minus the
/// finite-difference Jacobian of the score divided by n.
pub fn information_vs_finite_difference(instances: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0_f64;
    for family in families() {
        for _ in 0..instances {
            let d = r.random_range(2..6);
            let theta: Vec<f64> = (0..d).map(|_| 0.3 * normal(&mut r)).collect();
            let beta0: Vec<f64> = (0..d).map(|_| 0.2 * normal(&mut r)).collect();
            let coef: Vec<f64> = theta.iter().zip(&beta0).map(|(a, b)| a + b).collect();
            let data = sample_arm(&family, &coef, 40, 0.7, true, &mut r);
            let n = data.len() as f64;
            let (info, info_theta) = information_matrices(&theta, &beta0, &data, &family).unwrap();
            assert_eq!(info, info_theta);
            let scale = info.amax().max(1e-12);
            for j in 0..d {
                let mut up = beta0.clone();
                let mut dn = beta0.clone();
                up[j] += FD_STEP;
                dn[j] -= FD_STEP;
                let col = (score_vector(&theta, &up, &data, &family).unwrap()
                    - score_vector(&theta, &dn, &data, &family).unwrap())
                    / (2.0 * FD_STEP * n);
                for i in 0..d {
                    worst = worst.max((-col[i] - info[(i, j)]).abs() / scale);
                }
            }
        }
    }
    worst
}

/// Largest amount by which the closed-form coordinate minimizer is worse
/// than a dense grid search of the same one-dimensional objective.
pub fn threshold_vs_grid(instances: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..instances {
        let lambda = r.random_range(0.05..1.5);
        let v = r.random_range(0.1..3.0);
        let z = r.random_range(-6.0..6.0);
        let cfg = match k % 3 {
            0 => PenaltyConfig::adalasso().with_weights(vec![1.0, r.random_range(0.2..3.0)]).unwrap(),
            1 => PenaltyConfig::scad(),
            _ => PenaltyConfig::mcp(),
        };
        let f = |t: f64| 0.5 * v * t * t - z * t + penalty_value(t, lambda, &cfg, 1);
        let ours = f(threshold_update(z, v, lambda, &cfg, 1));
        let bound = 2.0 * z.abs() / v + 1.0;
        let steps = 200_000;
        let grid = (0..=steps)
            .map(|i| f(-bound + 2.0 * bound * i as f64 / steps as f64))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(ours - grid);
    }
    worst
}

/// Monte Carlo survival estimates versus the series, in standard errors.
pub fn noncentral_vs_monte_carlo(draws: usize, seed: u64) -> f64 {
    let cases = [(2.0, 1.0, 4.0), (3.0, 2.5, 6.0), (6.0, 0.0, 12.59), (6.0, 4.0, 10.0)];
    let mut r = rng(seed);
    let mut worst = 0.0_f64;
    for (df, nc, x) in cases {
        let dist = NoncentralChiSq::new(df, nc).unwrap();
        let exact = dist.survival(x).unwrap();
        let shift = nc.sqrt();
        let k = df as usize;
        let mut hits = 0usize;
        for _ in 0..draws {
            let mut s = (normal(&mut r) + shift).powi(2);
            for _ in 1..k {
                s += normal(&mut r).powi(2);
            }
            if s >= x {
                hits += 1;
            }
        }
        let est = hits as f64 / draws as f64;
        let se = (exact * (1.0 - exact) / draws as f64).sqrt();
        worst = worst.max((est - exact).abs() / se);
    }
    worst
}

/// Noncentral survival at zero noncentrality versus closed forms for even
/// degrees of freedom and the central survival function for odd ones.
pub fn noncentral_vs_central(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let x = r.random_range(0.01..40.0);
        for half in 1..=5 {
            let df = 2.0 * half as f64;
            let h = 0.5 * x;
            let mut term = 1.0;
            let mut sum = 1.0;
            for k in 1..half {
                term *= h / k as f64;
                sum += term;
            }
            let closed = (-h).exp() * sum;
            let got = NoncentralChiSq::central(df).unwrap().survival(x).unwrap();
            worst = worst.max((got - closed).abs());
        }
        for df in [1.0, 3.0, 7.0] {
            let got = NoncentralChiSq::new(df, 0.0).unwrap().survival(x).unwrap();
            worst = worst.max((got - chi2_sf(x, df)).abs());
        }
    }
    worst
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Worst (statistic gap, maximizer gap) between the closed form and a
/// multi-start quasi-Newton maximization of the Gaussian density ratio.
pub fn closed_form_vs_direct_maximization(instances: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let mut worst = (0.0_f64, 0.0_f64);
    let fam = GlmFamily::gaussian();
    for _ in 0..instances {
        let theta: Vec<f64> = (0..3).map(|_| normal(&mut r)).collect();
        let truth: Vec<f64> = theta.iter().map(|t| t + 0.2 * normal(&mut r)).collect();
        let data = sample_arm(&fam, &truth, 60, 1.0, true, &mut r);
        let sigma = random_spd(3, 0.05, &mut r);
        let comp = score_components(&theta, &sigma, &[0.0; 3], &data, &fam).unwrap();
        let closed = test_statistic(&comp, &[0.0; 3]).unwrap().lambda_stat;
        let cov = &comp.v_bar / comp.n_treat as f64;
        let zero = DVector::zeros(3);
        let null = mvn_log_density(&comp.s_bar, &zero, &cov).unwrap();
        let neg_log_ratio = |b: &DVector<f64>| -(mvn_log_density(&comp.s_bar, &(&comp.info_beta * b), &cov).unwrap() - null);
        let mut best: Option<(f64, DVector<f64>)> = None;
        for _ in 0..5 {
            let start = DVector::from_fn(3, |_, _| r.random_range(-5.0..5.0));
            let b = bfgs(neg_log_ratio, start, 1e-10, 500);
            let v = neg_log_ratio(&b);
            if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                best = Some((v, b));
            }
        }
        let (v, b) = best.unwrap();
        assert!(b.amax() <= 5.0);
        let direct = -2.0 * v;
        let maximizer = gauss_jordan_inverse(&comp.info_beta) * &comp.s_bar;
        worst.0 = worst.0.max((direct - closed).abs());
        worst.1 = worst.1.max((b - maximizer).amax());
    }
    worst
}

/// Runs `count` random sequential experiments to their horizon and counts
/// looks where the reported p-value rose or disagreed with the minimum of
/// the pointwise history.
pub fn running_p_violations(count: usize, seed: u64) -> usize {
    use post_core::sequential::{Batch, ExperimentState};
    let mut r = rng(seed);
    let mut violations = 0;
    for t in 0..count {
        let family = families()[t % 3];
        let penalty = [PenaltyConfig::adalasso(), PenaltyConfig::scad(), PenaltyConfig::mcp()][t % 3].clone();
        let coef: Vec<f64> = (0..4).map(|_| 0.4 * normal(&mut r)).collect();
        let shift = if r.random::<bool>() { 0.3 } else { 0.0 };
        let mut state = ExperimentState::new(format!("t{t}"), family, penalty, 4, 0.05, 60)
            .unwrap()
            .with_stop_on_reject(false);
        let mut prev: Option<f64> = None;
        for k in 0..6u64 {
            let mut obs = sample_arm(&family, &coef, 10, 0.8, false, &mut r);
            let treat_coef: Vec<f64> = coef.iter().map(|c| c + shift).collect();
            obs.extend(sample_arm(&family, &treat_coef, 10, 0.8, true, &mut r));
            if state.ingest_batch(Batch::new(k, obs).unwrap()).is_err() {
                violations += 1;
                break;
            }
            let now = state.running_min_p;
            let hist = state.stat_history.iter().map(|s| s.p_value).reduce(f64::min);
            if now != hist || matches!((prev, now), (Some(a), Some(b)) if b > a) || (prev.is_some() && now.is_none()) {
                violations += 1;
            }
            prev = now;
        }
    }
    violations
}

/// Checkpoints mid-run, restores, feeds both copies the same remaining
/// batches and reports whether they end byte-identical.
pub fn checkpoint_replay_identical(seed: u64) -> bool {
    use post_core::sequential::{Batch, ExperimentState};
    let mut r = rng(seed);
    let family = GlmFamily::bernoulli();
    let coef = [0.1, 0.5, -0.5, 0.0];
    let batches: Vec<Batch> = (0..6u64)
        .map(|k| {
            let mut obs = sample_arm(&family, &coef, 30, 1.0, false, &mut r);
            obs.extend(sample_arm(&family, &coef, 30, 1.0, true, &mut r));
            Batch::new(k, obs).unwrap()
        })
        .collect();
    let mut live = ExperimentState::new("replay", family, PenaltyConfig::adalasso(), 4, 0.05, 180)
        .unwrap()
        .with_seed(seed)
        .with_stop_on_reject(false);
    for b in &batches[..3] {
        live.ingest_batch(b.clone()).unwrap();
    }
    let bytes = live.checkpoint().unwrap();
    let mut restored = ExperimentState::restore(&bytes).unwrap();
    if restored != live {
        return false;
    }
    for b in &batches[3..] {
        let x = live.ingest_batch(b.clone()).unwrap();
        let y = restored.ingest_batch(b.clone()).unwrap();
        if x != y {
            return false;
        }
    }
    live == restored && live.checkpoint().unwrap() == restored.checkpoint().unwrap()
}

/// Counts of nesting failures `(BC ⊄ BY, BY ⊄ BH, BC ⊄ BH)` and of
/// α-monotonicity failures over random p-vectors.
pub fn multiple_testing_violations(vectors: usize, seed: u64) -> ([usize; 3], usize) {
    use post_core::multiple::{benjamini_hochberg, benjamini_yekutieli, bonferroni, MultipleTestInput, Procedure};
    let subset = |a: &[usize], b: &[usize]| a.iter().all(|i| b.contains(i));
    let mut r = rng(seed);
    let mut nest = [0usize; 3];
    let mut mono = 0;
    for _ in 0..vectors {
        let m = r.random_range(1..50);
        let p: Vec<f64> = (0..m)
            .map(|_| if r.random::<f64>() < 0.3 { r.random::<f64>() * 0.01 } else { r.random::<f64>() })
            .collect();
        let alpha = r.random_range(0.001..0.3);
        let input = MultipleTestInput::unlabeled(p.clone(), alpha).unwrap();
        let (bc, by, bh) = (bonferroni(&input), benjamini_yekutieli(&input), benjamini_hochberg(&input));
        nest[0] += usize::from(!subset(&bc, &by));
        nest[1] += usize::from(!subset(&by, &bh));
        nest[2] += usize::from(!subset(&bc, &bh));
        let larger = MultipleTestInput::unlabeled(p, (alpha * 1.5).min(1.0)).unwrap();
        for proc in [Procedure::Bonferroni, Procedure::BenjaminiHochberg, Procedure::BenjaminiYekutieli] {
            mono += usize::from(!subset(&proc.apply(&input), &proc.apply(&larger)));
        }
    }
    (nest, mono)
}

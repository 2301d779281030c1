mod common;

use nalgebra::{DMatrix, DVector};
use post_core::distributions::{Cholesky, NoncentralChiSq};
use post_core::multiple::{benjamini_hochberg, benjamini_yekutieli, bonferroni, MultipleTestInput, Procedure};
use post_core::penalty::{penalty_value, threshold_update, PenaltyConfig};
use post_core::score::{score_components, test_statistic, v_matrix};
use post_core::GlmFamily;
use proptest::prelude::*;

fn subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|i| b.contains(i))
}

fn p_vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![0.0..1.0f64, 0.0..0.01f64, Just(1.0)], 1..40)
}

fn penalty_cfg() -> impl Strategy<Value = PenaltyConfig> {
    prop_oneof![
        (0.1..4.0f64).prop_map(|w| PenaltyConfig::adalasso().with_weights(vec![1.0, w]).unwrap()),
        (2.1..6.0f64).prop_map(|g| PenaltyConfig::new(post_core::PenaltyKind::Scad, g).unwrap()),
        (1.1..6.0f64).prop_map(|g| PenaltyConfig::new(post_core::PenaltyKind::Mcp, g).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn step_up_procedures_nest_inside_bh(p in p_vector(), alpha in 0.001..0.5f64) {
        let input = MultipleTestInput::unlabeled(p, alpha).unwrap();
        let bh = benjamini_hochberg(&input);
        prop_assert!(subset(&benjamini_yekutieli(&input), &bh));
        prop_assert!(subset(&bonferroni(&input), &bh));
    }

    #[test]
    fn rejections_grow_with_alpha(p in p_vector(), a in 0.001..0.5f64, b in 0.001..0.5f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for proc in [Procedure::Bonferroni, Procedure::BenjaminiHochberg, Procedure::BenjaminiYekutieli] {
            let small = proc.apply(&MultipleTestInput::unlabeled(p.clone(), lo).unwrap());
            let large = proc.apply(&MultipleTestInput::unlabeled(p.clone(), hi).unwrap());
            prop_assert!(subset(&small, &large));
        }
    }

    #[test]
    fn rejected_labels_ignore_input_order(p in p_vector(), alpha in 0.01..0.3f64, seed in any::<u64>()) {
        let labels: Vec<String> = (0..p.len()).map(|i| format!("h{i:03}")).collect();
        let mut order: Vec<usize> = (0..p.len()).collect();
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let perm_p: Vec<f64> = order.iter().map(|&i| p[i]).collect();
        let perm_l: Vec<String> = order.iter().map(|&i| labels[i].clone()).collect();
        for proc in [Procedure::Bonferroni, Procedure::BenjaminiHochberg, Procedure::BenjaminiYekutieli] {
            let a = MultipleTestInput::new(p.clone(), alpha, labels.clone()).unwrap();
            let b = MultipleTestInput::new(perm_p.clone(), alpha, perm_l.clone()).unwrap();
            let mut ra: Vec<&String> = proc.apply(&a).iter().map(|&i| &labels[i]).collect();
            let mut rb: Vec<&String> = proc.apply(&b).iter().map(|&i| &perm_l[i]).collect();
            ra.sort();
            rb.sort();
            prop_assert_eq!(ra, rb);
        }
    }

    #[test]
    fn threshold_is_odd(cfg in penalty_cfg(), z in -10.0..10.0f64, v in 0.05..5.0f64, lambda in 0.0..2.0f64) {
        let a = threshold_update(z, v, lambda, &cfg, 1);
        let b = threshold_update(-z, v, lambda, &cfg, 1);
        prop_assert_eq!(a, -b);
        prop_assert!(a == 0.0 || a.signum() == z.signum());
    }

    #[test]
    fn threshold_never_beaten_nearby(cfg in penalty_cfg(), z in -10.0..10.0f64, v in 0.05..5.0f64, lambda in 0.01..2.0f64) {
        let f = |t: f64| 0.5 * v * t * t - z * t + penalty_value(t, lambda, &cfg, 1);
        let t = threshold_update(z, v, lambda, &cfg, 1);
        for step in [1e-3, 1e-2, 0.1, 1.0] {
            prop_assert!(f(t) <= f(t + step) + 1e-12);
            prop_assert!(f(t) <= f(t - step) + 1e-12);
        }
    }

    #[test]
    fn penalty_symmetric_monotone_concave(cfg in penalty_cfg(), a in 0.0..8.0f64, b in 0.0..8.0f64, lambda in 0.01..2.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p = |t: f64| penalty_value(t, lambda, &cfg, 1);
        prop_assert_eq!(p(a), p(-a));
        prop_assert!(p(lo) <= p(hi) + 1e-12);
        let mid = 0.5 * (lo + hi);
        prop_assert!(p(mid) >= 0.5 * (p(lo) + p(hi)) - 1e-12);
    }

    #[test]
    fn survival_monotone(df in 1usize..40, nc in 0.0..30.0f64, x in 0.0..80.0f64, dx in 0.0..10.0f64) {
        let dist = NoncentralChiSq::new(df as f64, nc).unwrap();
        let s0 = dist.survival(x).unwrap();
        prop_assert!((0.0..=1.0).contains(&s0));
        prop_assert!(dist.survival(x + dx).unwrap() <= s0 + 1e-12);
        let more = NoncentralChiSq::new(df as f64, nc + 1.0).unwrap();
        prop_assert!(more.survival(x).unwrap() >= s0 - 1e-12);
    }

    #[test]
    fn cholesky_solve_round_trip(vals in prop::collection::vec(-2.0..2.0f64, 16), rhs in prop::collection::vec(-5.0..5.0f64, 4)) {
        let a = DMatrix::from_column_slice(4, 4, &vals);
        let spd = &a * a.transpose() + DMatrix::identity(4, 4);
        let b = DVector::from_column_slice(&rhs);
        let x = Cholesky::new(&spd).unwrap().solve(&b);
        prop_assert!((&spd * x - b).amax() < 1e-9);
    }

    #[test]
    fn v_bar_dominates_information(vals in prop::collection::vec(-2.0..2.0f64, 9), svals in prop::collection::vec(-1.0..1.0f64, 9)) {
        let a = DMatrix::from_column_slice(3, 3, &vals);
        let s = DMatrix::from_column_slice(3, 3, &svals);
        let info = &a * a.transpose();
        let sigma = &s * s.transpose();
        let diff = v_matrix(&info, &sigma) - &info;
        let min_eig = diff.symmetric_eigen().eigenvalues.min();
        prop_assert!(min_eig >= -1e-10 * (1.0 + info.amax().powi(2) * sigma.amax()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn statistic_nonnegative_at_zero_null(seed in any::<u64>(), fam in 0usize..3) {
        let family = common::families()[fam];
        let mut r = common::rng(seed);
        let theta: Vec<f64> = (0..4).map(|_| 0.3 * common::normal(&mut r)).collect();
        let data = common::sample_arm(&family, &theta, 30, 0.8, true, &mut r);
        let sigma = common::random_spd(4, 0.1, &mut r);
        let comp = score_components(&theta, &sigma, &[0.0; 4], &data, &family).unwrap();
        let res = test_statistic(&comp, &[0.0; 4]).unwrap();
        prop_assert!(res.lambda_stat >= -1e-10);
        prop_assert_eq!(res.u0, 0.0);
        prop_assert!((0.0..=1.0).contains(&res.p_value_pointwise));
    }

    #[test]
    fn means_stay_in_range(eta in -800.0..800.0f64) {
        for family in [GlmFamily::bernoulli(), GlmFamily::poisson()] {
            let mu = family.mean(eta);
            prop_assert!(mu.is_finite() && mu >= 0.0);
            prop_assert!(family.variance(mu) > 0.0);
        }
        let mu = GlmFamily::bernoulli().mean(eta);
        prop_assert!(mu > 0.0 && mu < 1.0);
    }
}

#[test]
fn bonferroni_is_not_nested_in_by() {
    let input = MultipleTestInput::unlabeled(vec![0.02, 0.9], 0.05).unwrap();
    assert_eq!(bonferroni(&input), vec![0]);
    assert!(benjamini_yekutieli(&input).is_empty());
}

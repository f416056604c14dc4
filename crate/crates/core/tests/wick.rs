use heralded_fock::kernels::{ClickTimes, OpoParams};
use heralded_fock::wick::{
    conditional_moment, conditional_moment_lhs, conditional_moment_rhs, count_pairings, detector_splitting_check,
    gaussian_moment, Field, LinearOp, OperatorString, SplitCoefficients, Symbol,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(eps: f64) -> OpoParams {
    OpoParams::scaled(eps, 1.0, 1.0).unwrap()
}

fn triggers(times: &[f64]) -> Vec<LinearOp> {
    times.iter().map(|&t| LinearOp::single(Symbol::ann(Field::Trigger, t))).collect()
}

fn double_factorial(k: usize) -> usize {
    (1..2 * k).step_by(2).product()
}

#[test]
fn pairing_enumeration_counts() {
    for k in 0..=6 {
        assert_eq!(count_pairings(2 * k), double_factorial(k), "2k = {}", 2 * k);
    }
    assert_eq!(count_pairings(5), 0);
}

#[test]
fn weak_pump_identity_on_random_configurations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let p = params(1e-3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..=3usize);
        let m = rng.random_range(0..=n);
        let mut t: Vec<f64> = (0..n).map(|_| 3.0 * rng.random::<f64>()).collect();
        t.sort_by(f64::total_cmp);
        let primed: Vec<f64> = (0..m).map(|_| 4.0 * rng.random::<f64>() - 0.5).collect();
        let double_primed: Vec<f64> = (0..m).map(|_| 4.0 * rng.random::<f64>() - 0.5).collect();
        let ct = ClickTimes::new(t).unwrap();
        let lhs = conditional_moment_lhs(&ct, &primed, &double_primed, &p).unwrap();
        let rhs = conditional_moment_rhs(&ct, &primed, &double_primed, 1.0).unwrap();
        worst = worst.max((lhs.value - rhs).abs());
    }
    assert!(worst < 1e-8, "worst deviation {worst}");
}

#[test]
fn unbalanced_requests_vanish_exactly() {
    let ct = ClickTimes::new(vec![0.0, 1.0]).unwrap();
    let p = params(1e-3);
    let cases: [(&[f64], &[f64]); 3] = [(&[0.2], &[]), (&[0.2, 0.4], &[0.1]), (&[0.1, 0.2, 0.3], &[0.1, 0.5, 0.9])];
    for (a, b) in cases {
        assert_eq!(conditional_moment_lhs(&ct, a, b, &p).unwrap().value, 0.0);
        assert_eq!(conditional_moment_rhs(&ct, a, b, 1.0).unwrap(), 0.0);
    }
    // odd strings at the Gaussian level
    let mut s = OperatorString::default();
    s.push(LinearOp::single(Symbol::dag(Field::Signal, 0.0)));
    assert_eq!(gaussian_moment(&s, &p).unwrap(), Complex64::new(0.0, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn moments_are_multilinear(
        re in -2.0f64..2.0, im in -2.0f64..2.0, slot in 0usize..4, t in proptest::collection::vec(0.0f64..3.0, 4),
    ) {
        let p = params(0.1);
        let ops = vec![
            LinearOp::single(Symbol::dag(Field::Trigger, t[0])),
            LinearOp(vec![
                (Complex64::new(0.6, 0.1), Symbol::dag(Field::Signal, t[1])),
                (Complex64::new(-0.3, 0.0), Symbol::ann(Field::Trigger, t[1] + 0.2)),
            ]),
            LinearOp::single(Symbol::ann(Field::Signal, t[2])),
            LinearOp::single(Symbol::ann(Field::Trigger, t[3])),
        ];
        let s = Complex64::new(re, im);
        let base = gaussian_moment(&OperatorString(ops.clone()), &p).unwrap();
        let mut scaled = ops.clone();
        scaled[slot] = scaled[slot].scaled(s);
        let out = gaussian_moment(&OperatorString(scaled), &p).unwrap();
        prop_assert!((out - base * s).norm() <= 1e-12 * (1.0 + base.norm() * s.norm()));

        // additivity in one slot
        let extra = LinearOp::single(Symbol::dag(Field::Signal, t[0] + 0.5));
        let mut summed = ops.clone();
        summed[1] = LinearOp([ops[1].0.clone(), extra.0.clone()].concat());
        let mut only_extra = ops.clone();
        only_extra[1] = extra;
        let lhs = gaussian_moment(&OperatorString(summed), &p).unwrap();
        let rhs = base + gaussian_moment(&OperatorString(only_extra), &p).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()));
    }
}

#[test]
fn numerator_scales_with_the_leading_pump_power() {
    let cases: [(&[f64], &[f64], &[f64]); 5] = [
        (&[0.0], &[0.3], &[0.7]),
        (&[0.0, 1.0], &[0.3], &[0.7]),
        (&[0.0, 1.0], &[0.3, 1.4], &[0.7, -0.2]),
        (&[0.0, 0.5, 1.0], &[0.3], &[0.7]),
        (&[0.0], &[0.3, 0.9], &[0.7, 1.3]),
    ];
    for (t, primed, double_primed) in cases {
        let ops = OperatorString::conditional(&triggers(t), primed, double_primed);
        let at = |e: f64| gaussian_moment(&ops, &params(e)).unwrap().re;
        let (e1, e2) = (1e-3, 1e-4);
        let slope = (at(e1) / at(e2)).ln() / (e1 / e2).ln();
        let expected = 2.0 * t.len().max(primed.len()) as f64;
        assert!((slope - expected).abs() < 0.01 * expected, "{t:?}: slope {slope}, expected {expected}");
    }
}

fn random_unitary(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Complex64>> {
    let m = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let q = m.qr().q();
    (0..dim).map(|i| (0..dim).map(|j| q[(i, j)]).collect()).collect()
}

#[test]
fn detector_splitting_leaves_moments_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = params(0.08);
    for clicks in [vec![0.0, 0.8], vec![0.0, 2.5], vec![0.0, 0.0]] {
        let ct = ClickTimes::new(clicks).unwrap();
        let report = detector_splitting_check(&ct, &SplitCoefficients::balanced(), &[0, 1], &p).unwrap();
        assert!(report.max_relative_deviation < 1e-10, "balanced: {report:?}");
        for dim in [2, 3] {
            let split = SplitCoefficients::new(random_unitary(dim, &mut rng)).unwrap();
            for assignment in [[0, 1], [1, 1], [dim - 1, 0]] {
                let report = detector_splitting_check(&ct, &split, &assignment, &p).unwrap();
                assert!(report.max_relative_deviation < 1e-10, "{assignment:?}: {report:?}");
            }
        }
    }
}

#[test]
fn split_detector_moments_at_finite_pump() {
    // the invariance is exact, not only in the weak-pump limit
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let split = SplitCoefficients::new(random_unitary(2, &mut rng)).unwrap();
    let p = params(0.3);
    let ops = vec![split.detector_op(0, 0.0), split.detector_op(1, 1.1)];
    let direct = conditional_moment(&triggers(&[0.0, 1.1]), &[0.4], &[0.9], &p).unwrap();
    let viasplit = conditional_moment(&ops, &[0.4], &[0.9], &p).unwrap();
    assert!((direct - viasplit).norm() < 1e-10 * direct.norm());
}

#[test]
fn split_rows_are_validated() {
    let h = Complex64::new(0.5, 0.0);
    assert!(SplitCoefficients::new(vec![vec![h, h]]).is_err());
    assert!(SplitCoefficients::new(vec![]).is_err());
    let ct = ClickTimes::new(vec![0.0, 1.0]).unwrap();
    assert!(detector_splitting_check(&ct, &SplitCoefficients::balanced(), &[0, 2], &params(0.1)).is_err());
}

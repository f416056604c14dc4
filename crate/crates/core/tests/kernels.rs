use heralded_fock::kernels::{
    auto_correlation, auto_correlation_weak, bunching_ratio, cross_correlation, cross_correlation_weak, g_mode,
    overlap, OpoParams,
};
use heralded_fock::mode::TimeGrid;
use proptest::prelude::*;

fn params(eps: f64) -> OpoParams {
    OpoParams::scaled(eps, 1.0, 1.0).unwrap()
}

proptest! {
    #[test]
    fn kernels_depend_only_on_abs_tau(eps in 1e-4f64..0.49, tau in -30.0f64..30.0) {
        let p = params(eps);
        prop_assert_eq!(auto_correlation(&p, tau), auto_correlation(&p, -tau));
        prop_assert_eq!(cross_correlation(&p, tau), cross_correlation(&p, -tau));
    }

    #[test]
    fn bunching_stays_between_one_and_two(eps in 1e-4f64..0.49, dt in 0.0f64..50.0) {
        let r = bunching_ratio(&params(eps), dt).unwrap();
        prop_assert!((1.0..=2.0).contains(&r), "ratio {}", r);
    }

    #[test]
    fn weak_pump_kernels_agree_to_first_order(eps in 1e-6f64..1e-3, tau in 0.0f64..10.0) {
        let p = params(eps);
        let bound = 10.0 * eps * (1.0 + tau);
        let rel = |exact: f64, weak: f64| ((exact - weak) / weak).abs();
        prop_assert!(rel(auto_correlation(&p, tau), auto_correlation_weak(&p, tau)) < bound);
        prop_assert!(rel(cross_correlation(&p, tau), cross_correlation_weak(&p, tau)) < bound);
    }
}

#[test]
fn overlap_matches_quadrature() {
    let grid = TimeGrid::new(-25.0, 1e-3, 55_001).unwrap();
    for (a, b) in [(0.0, 0.0), (0.0, 0.7), (1.0, 4.0), (0.5, 9.5)] {
        let ga = g_mode(&grid, a, 1.0).unwrap();
        let gb = g_mode(&grid, b, 1.0).unwrap();
        let numeric = ga.overlap(&gb).unwrap();
        assert!((numeric - overlap(a, b, 1.0)).abs() < 1e-6, "{a} {b}: {numeric}");
    }
}

#[test]
fn overlap_scales_with_gamma() {
    assert!((overlap(0.0, 2.0, 2.0) - overlap(0.0, 4.0, 1.0)).abs() < 1e-15);
    assert!((overlap(0.0, 8.0, 1.0) - 5.0 * (-4.0f64).exp()).abs() < 1e-15);
}

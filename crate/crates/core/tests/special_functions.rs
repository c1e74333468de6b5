use hyperclust::special::{
    bessel_k_ratio, digamma, dlog_bessel_k_dorder, log_bessel_k, log_bessel_k_neighbors, BesselOrderDerivativeConfig,
};
use hyperclust_oracles::bessel;
use hyperclust_oracles::quad::integrate_to_infinity;
use proptest::prelude::*;

fn log_k_quadrature(nu: f64, x: f64) -> f64 {
    bessel::log_k(nu, x)
}

fn dlog_k_quadrature(nu: f64, x: f64) -> f64 {
    bessel::dlog_k_dorder(nu, x)
}

#[test]
fn log_bessel_k_matches_integral_representation() {
    for &x in &[0.01, 0.3, 1.0, 1.9, 2.0, 2.1, 5.0, 20.0, 150.0] {
        for &nu in &[0.0, 0.2, 0.5, 0.75, 1.0, 1.6, 3.3, 7.5, 20.0] {
            let got = log_bessel_k(nu, x).unwrap();
            let want = log_k_quadrature(nu, x);
            assert!((got - want).abs() < 1e-10 * (1.0 + want.abs()), "nu={nu} x={x}: {got} vs {want}");
        }
    }
}

#[test]
fn order_derivative_matches_quadrature() {
    let cfg = BesselOrderDerivativeConfig::default();
    for &x in &[0.2, 1.0, 3.0, 10.0] {
        for &nu in &[0.3, 1.0, 2.5, 6.0] {
            let got = dlog_bessel_k_dorder(nu, x, &cfg).unwrap();
            let want = dlog_k_quadrature(nu, x);
            assert!((got - want).abs() < 1e-7 * (1.0 + want.abs()), "nu={nu} x={x}: {got} vs {want}");
        }
    }
}

#[test]
fn derivative_step_is_validated() {
    assert!(BesselOrderDerivativeConfig::new(0.0).is_err());
    assert!(BesselOrderDerivativeConfig::new(1.0).is_err());
    assert_eq!(BesselOrderDerivativeConfig::new(1e-3).unwrap().step(), 1e-3);
}

#[test]
fn large_order_uses_asymptotics_consistently() {
    // either side of the switch to the uniform expansion
    let below = log_bessel_k(999.5, 300.0).unwrap();
    let above = log_bessel_k(1000.5, 300.0).unwrap();
    let mid = log_bessel_k(1000.0, 300.0).unwrap();
    assert!(below < mid && mid < above);
    let want = log_k_quadrature(1200.0, 400.0);
    let got = log_bessel_k(1200.0, 400.0).unwrap();
    assert!((got - want).abs() < 1e-8 * want.abs(), "{got} vs {want}");
}

#[test]
fn domain_errors() {
    assert!(log_bessel_k(1.0, 0.0).is_err());
    assert!(log_bessel_k(f64::NAN, 1.0).is_err());
    assert!(digamma(0.0).is_err());
    assert!(digamma(-1.5).is_err());
}

/// `ψ(x) = ∫_0^∞ (e^{-t}/t - e^{-xt}/(1 - e^{-t})) dt`
fn digamma_quadrature(x: f64) -> f64 {
    integrate_to_infinity(
        |t| {
            if t < 1e-8 {
                // limit of the integrand as t → 0
                return x - 1.5;
            }
            (-t).exp() / t - (-x * t).exp() / (-(-t).exp_m1())
        },
        0.0,
        1e-14,
    )
}

#[test]
fn digamma_matches_integral() {
    for &x in &[0.1, 0.5, 1.0, 2.5, 7.0, 12.0, 100.0] {
        let want = digamma_quadrature(x);
        assert!((digamma(x).unwrap() - want).abs() < 1e-9 * (1.0 + want.abs()), "x={x}");
    }
    let euler = 0.577_215_664_901_532_9;
    assert!((digamma(1.0).unwrap() + euler).abs() < 1e-14);
}

proptest! {
    #[test]
    fn even_in_order(nu in -30.0f64..30.0, x in 0.01f64..50.0) {
        prop_assert_eq!(log_bessel_k(nu, x).unwrap(), log_bessel_k(-nu, x).unwrap());
    }

    #[test]
    fn three_term_recurrence(nu in 0.0f64..25.0, x in 0.05f64..40.0) {
        // K_{ν+1} = K_{ν-1} + (2ν/x) K_ν
        let (lo, mid, hi) = log_bessel_k_neighbors(nu, x).unwrap();
        let rhs = (lo - hi).exp() + 2.0 * nu / x * (mid - hi).exp();
        prop_assert!((rhs - 1.0).abs() < 1e-11);
    }

    #[test]
    fn ratio_exceeds_one_for_positive_order(nu in 0.5f64..20.0, x in 0.05f64..40.0) {
        prop_assert!(bessel_k_ratio(nu, x).unwrap() > 1.0);
    }

    #[test]
    fn decreasing_in_argument(nu in -10.0f64..10.0, x in 0.05f64..40.0) {
        prop_assert!(log_bessel_k(nu, x * 1.01).unwrap() < log_bessel_k(nu, x).unwrap());
    }

    #[test]
    fn digamma_recurrence(x in 0.05f64..50.0) {
        prop_assert!((digamma(x + 1.0).unwrap() - digamma(x).unwrap() - 1.0 / x).abs() < 1e-12 * (1.0 + 1.0 / x));
    }
}

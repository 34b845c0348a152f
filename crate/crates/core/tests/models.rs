mod common;

use recutil::function_space::{abs_normal_power_bound, log_abs_normal_power_moment};
use recutil::models::{
    arg_laplace, cond_expect, kalman_steady_state, log_cond_expect_exp, sample_transition, DisasterArgModel,
    GaussianStateSpaceModel, Model,
};
use recutil::quadrature::{LogIntegral, QuadratureSpec};

#[test]
fn arg_laplace_matches_simulation() {
    let m = DisasterArgModel::new(0.02, 0.02, -0.1, 0.05, 0.8, 0.2, 1.0, 1.0).unwrap();
    let (u, h) = (0.5, 1.5);
    let exact = arg_laplace(&m, u, h).unwrap();
    let closed = (0.8 * u * h / (1.0 - u * 0.2)).exp() * (1.0 - u * 0.2f64).powf(-1.0);
    assert!((exact - closed).abs() < 1e-12 * closed);
    let n = 200_000;
    let mc: f64 = (0..n)
        .map(|s| (u * sample_transition(&m, &[0.0, h], s as u64).unwrap()[1]).exp())
        .sum::<f64>()
        / n as f64;
    assert!((mc - exact).abs() < 0.02 * exact, "mc {mc} exact {exact}");
}

#[test]
fn cond_expect_quadrature_vs_monte_carlo() {
    let model = common::robust_gaussian();
    let x = [0.3];
    let f = |y: &[f64]| y[0] * y[0] + y[0].sin();
    let q = cond_expect(&model, f, &x, &QuadratureSpec::gauss_hermite(41)).unwrap();
    let mc = cond_expect(&model, f, &x, &QuadratureSpec::monte_carlo(200_000, 3)).unwrap();
    // Mean 0.27, variance 0.01.
    let exact = 0.27f64 * 0.27 + 0.01 + 0.27f64.sin() * (-0.005f64).exp();
    assert!((q - exact).abs() < 1e-12);
    assert!((mc - exact).abs() < 2e-3);
}

#[test]
fn log_cond_expect_exp_is_gaussian_mgf() {
    let model = common::robust_gaussian();
    let v = log_cond_expect_exp(&model, |y| 2.0 * y[0], &[1.0], &QuadratureSpec::gauss_hermite(41)).unwrap();
    assert!((v - (2.0 * 0.9 + 0.5 * 4.0 * 0.01)).abs() < 1e-12);
}

#[test]
fn abs_normal_power_bound_dominates_moment() {
    for r in [1.0, 1.25, 1.5, 1.75] {
        for a in [0.5, 1.0, 2.0, 5.0] {
            let LogIntegral::Finite(lm) = log_abs_normal_power_moment(a, r) else {
                panic!("moment should be finite for r < 2");
            };
            assert!(lm.exp() <= abs_normal_power_bound(a, r), "a {a} r {r}");
        }
    }
}

#[test]
fn kalman_fixed_point() {
    let ss = GaussianStateSpaceModel::scalar(1.0, 0.5, 1.0, 1.0).unwrap();
    let s = kalman_steady_state(&ss, 1e-14).unwrap().sigma_bar[(0, 0)];
    assert!((s - 1.132_782_218_537_318_7).abs() < 1e-10);
}

#[test]
fn model_json_round_trip() {
    for m in [
        Model::GaussianVar1(common::robust_gaussian()),
        common::ssy(),
        Model::HiddenRegime(common::hidden_regime()),
    ] {
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(Model::from_json(&text).unwrap(), m);
    }
}

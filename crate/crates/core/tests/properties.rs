mod common;

use proptest::prelude::*;

use recutil::function_space::{embedding_constant, orlicz_norm_samples, Extrapolation, GridFunction, StateGrid};
use recutil::models::{GaussianVar1Model, HiddenRegimeModel, Model};
use recutil::operators::{belief_grid, ez_eigenpair_closed_form, EzOperator, LearningOperator, RobustOperator};
use recutil::preferences::{EzSpec, LearningSpec, RobustSpec};
use recutil::quadrature::QuadratureSpec;

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(48)
}

fn gaussian_op(beta: f64, alpha: f64) -> RobustOperator {
    let model = Model::GaussianVar1(common::robust_gaussian());
    let grid = common::grid_1d(common::robust_bounds(4.0), 41, Extrapolation::Clamp);
    RobustOperator::new(
        RobustSpec::with_alpha(beta, alpha).unwrap(),
        &model,
        &grid,
        &QuadratureSpec::gauss_hermite(21),
    )
    .unwrap()
}

fn function_on(grid: &StateGrid, coef: (f64, f64, f64, f64)) -> GridFunction {
    let (a, b, c, w) = coef;
    GridFunction::from_fn(grid, |x| a + b * x[0] + c * (w * x[0]).sin())
}

fn coef() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (-2.0..2.0f64, -3.0..3.0f64, -1.0..1.0f64, 0.5..6.0f64)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-11 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn robust_shift_identity(beta in 0.5..0.99f64, alpha in -3.0..-0.01f64, c in coef(), k in -10.0..10.0f64) {
        let op = gaussian_op(beta, alpha);
        let f = function_on(op.grid(), c);
        let tf = op.apply(&f).unwrap();
        let ts = op.apply(&f.map(|v| v + k)).unwrap();
        for (a, b) in ts.values.iter().zip(&tf.values) {
            prop_assert!(close(*a, b + beta * k));
        }
    }

    #[test]
    fn robust_monotone_and_convex(c1 in coef(), c2 in coef(), tau in 0.0..1.0f64) {
        let op = gaussian_op(0.95, -1.0);
        let f = function_on(op.grid(), c1);
        let g = function_on(op.grid(), c2);
        let hi = f.zip_with(&g, |a, b| a.max(b));
        let (tf, tg, th) = (op.apply(&f).unwrap(), op.apply(&g).unwrap(), op.apply(&hi).unwrap());
        let mix = op.apply(&f.zip_with(&g, |a, b| tau * a + (1.0 - tau) * b)).unwrap();
        for i in 0..tf.values.len() {
            prop_assert!(tf.values[i].max(tg.values[i]) <= th.values[i] + 1e-11 * (1.0 + th.values[i].abs()));
            let rhs = tau * tf.values[i] + (1.0 - tau) * tg.values[i];
            prop_assert!(mix.values[i] <= rhs + 1e-11 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn robust_jensen_and_subgradient(c1 in coef(), c2 in coef()) {
        let op = gaussian_op(0.9, -2.0);
        let f = function_on(op.grid(), c1);
        let g = function_on(op.grid(), c2);
        let tf = op.apply(&f).unwrap();
        let tg = op.apply(&g).unwrap();
        let jl = op.jensen_lower(&f).unwrap();
        let d = op.worst_case(&f).unwrap();
        prop_assert!(d.normalization_error() < 1e-12);
        let sub = d.apply_subgradient(&g.zip_with(&f, |a, b| a - b)).unwrap();
        for i in 0..tf.values.len() {
            prop_assert!(tf.values[i] >= jl.values[i] - 1e-11 * (1.0 + jl.values[i].abs()));
            prop_assert!(tg.values[i] - tf.values[i] >= sub.values[i] - 1e-11 * (1.0 + tg.values[i].abs()));
        }
    }

    #[test]
    fn learning_shift_and_monotone(vartheta in 0.2..5.0f64, c in coef(), k in -5.0..5.0f64) {
        let hm = common::hidden_regime();
        let grid = belief_grid(2, 21).unwrap();
        let spec = LearningSpec::new(0.95, 1.0, Some(vartheta)).unwrap();
        let op = LearningOperator::regime(spec, &hm, &grid, &QuadratureSpec::gauss_hermite(15)).unwrap();
        let f = function_on(&grid, c);
        let tf = op.apply(&f).unwrap();
        let ts = op.apply(&f.map(|v| v + k)).unwrap();
        let tu = op.apply(&f.map(|v| v + k.abs())).unwrap();
        for i in 0..tf.values.len() {
            prop_assert!(close(ts.values[i], tf.values[i] + 0.95 * k));
            prop_assert!(tu.values[i] >= tf.values[i] - 1e-12);
        }
    }

    #[test]
    fn ez_operator_monotone(c in coef(), k in 0.0..2.0f64) {
        let m = common::ez_gaussian();
        let grid = common::ez_grid(31);
        let spec = EzSpec::new(0.96, 2.0, 0.5).unwrap();
        let pair = ez_eigenpair_closed_form(&m, spec.gamma, &grid).unwrap();
        let op = EzOperator::new(spec, pair, &Model::GaussianVar1(m), &QuadratureSpec::gauss_hermite(21)).unwrap();
        let f = function_on(&grid, c);
        let tf = op.apply(&f).unwrap();
        let tu = op.apply(&f.map(|v| v + k)).unwrap();
        for i in 0..tf.values.len() {
            prop_assert!(tu.values[i] >= tf.values[i] - 1e-12);
        }
    }

    #[test]
    fn filter_stays_on_simplex(p in 0.0..1.0f64, obs in -0.2..0.2f64) {
        let hm = common::hidden_regime();
        let post = hm.filter_update(&[p, 1.0 - p], &[obs]).unwrap();
        prop_assert!(post.iter().all(|q| *q >= 0.0 && *q <= 1.0));
        prop_assert!((post.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orlicz_homogeneity_and_embedding(seed in 0u64..1000, k in 0.05..20.0f64, sd in 0.1..4.0f64) {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let law = Normal::new(0.3, sd).unwrap();
        let xs: Vec<f64> = (0..2000).map(|_| law.sample(&mut rng)).collect();
        let n2 = orlicz_norm_samples(&xs, 2.0, 1e-10).unwrap().norm;
        let scaled: Vec<f64> = xs.iter().map(|x| k * x).collect();
        let kn2 = orlicz_norm_samples(&scaled, 2.0, 1e-10).unwrap().norm;
        prop_assert!((kn2 - k * n2).abs() <= 1e-7 * (1.0 + k * n2));
        for s in [1.0, 1.5] {
            let ns = orlicz_norm_samples(&xs, s, 1e-10).unwrap().norm;
            prop_assert!(ns <= embedding_constant(s, 2.0) * n2 + 1e-8);
        }
    }

    #[test]
    fn gaussian_affine_closed_form_residual(a in -0.95..0.95f64, s2 in 0.001..0.05f64, alpha in -2.0..-0.05f64) {
        let m = GaussianVar1Model::scalar(a, 0.01, s2, 1.0, 0.5).unwrap();
        let spec = RobustSpec::with_alpha(0.9, alpha).unwrap();
        let sol = recutil::solvers::affine_solve_gaussian_robust(&m, &spec, &QuadratureSpec::gauss_hermite(41)).unwrap();
        prop_assert!(sol.residual < 1e-8);
    }
}

#[test]
fn one_regime_filter_is_fixed() {
    let hm = HiddenRegimeModel::new(nalgebra::DMatrix::from_element(1, 1, 1.0), vec![0.0], vec![1.0]).unwrap();
    let post = hm.filter_update(&[1.0], &[3.0]).unwrap();
    assert_eq!(post.len(), 1);
    assert!((post[0] - 1.0).abs() < 1e-15);
}

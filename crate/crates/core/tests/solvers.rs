mod common;

use recutil::function_space::{Extrapolation, GridFunction};
use recutil::models::Model;
use recutil::operators::{ez_eigenpair_closed_form, EzOperator, RobustOperator};
use recutil::preferences::{EzSpec, RobustSpec};
use recutil::quadrature::QuadratureSpec;
use recutil::solvers::{
    affine_solve_gaussian_robust, contraction_solve, ez_envelope, monotone_solve, truncation_gap_check, Direction,
    MonotoneOptions, SolveStatus,
};

fn truncated_solution(k: f64) -> (GridFunction, RobustSpec, (f64, f64)) {
    let model = Model::GaussianVar1(common::robust_gaussian());
    let spec = RobustSpec::with_alpha(0.95, -1.0).unwrap();
    let c = common::robust_bounds(k);
    let grid = common::grid_1d(c, 121, Extrapolation::Linear);
    let quad = QuadratureSpec::truncated(8, vec![c]);
    let op = RobustOperator::truncated(spec, &model, &[c], &grid, &quad).unwrap();
    let r = contraction_solve(
        |f| op.apply(f),
        &GridFunction::constant(&grid, 0.0),
        spec.beta,
        1e-12,
        10_000,
    )
    .unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    (r.solution, spec, c)
}

#[test]
fn contraction_solve_independent_of_start() {
    let model = Model::GaussianVar1(common::robust_gaussian());
    let spec = RobustSpec::with_alpha(0.95, -1.0).unwrap();
    let c = common::robust_bounds(3.0);
    let grid = common::grid_1d(c, 61, Extrapolation::Linear);
    let quad = QuadratureSpec::truncated(8, vec![c]);
    let op = RobustOperator::truncated(spec, &model, &[c], &grid, &quad).unwrap();
    let a = contraction_solve(
        |f| op.apply(f),
        &GridFunction::constant(&grid, 0.0),
        0.95,
        1e-12,
        10_000,
    )
    .unwrap();
    let b = contraction_solve(
        |f| op.apply(f),
        &GridFunction::from_fn(&grid, |x| 50.0 - 30.0 * x[0]),
        0.95,
        1e-12,
        10_000,
    )
    .unwrap();
    assert!(a.solution.sup_diff(&b.solution) < 1e-8);
}

#[test]
fn widening_truncation_shrinks_the_gap() {
    let exact = affine_solve_gaussian_robust(
        &common::robust_gaussian(),
        &RobustSpec::with_alpha(0.95, -1.0).unwrap(),
        &QuadratureSpec::gauss_hermite(41),
    )
    .unwrap();
    let model = Model::GaussianVar1(common::robust_gaussian());
    let mut eps = Vec::new();
    for k in [2.0, 3.0, 4.0] {
        let (vc, spec, c) = truncated_solution(k);
        let v = GridFunction::from_fn(&vc.grid, |x| exact.eval(x));
        let rep =
            truncation_gap_check(spec.beta, &v, &vc, &model, &[c], &QuadratureSpec::truncated(8, vec![c])).unwrap();
        assert!(rep.bound_holds && rep.upper_holds);
        eps.push(rep.eps_c);
    }
    assert!(eps[0] > eps[1] && eps[1] > eps[2], "{eps:?}");
}

#[test]
fn monotone_solve_reports_bracket_order() {
    let model = Model::GaussianVar1(common::robust_gaussian());
    let spec = RobustSpec::with_alpha(0.95, -1.0).unwrap();
    let grid = common::grid_1d(common::robust_bounds(4.0), 81, Extrapolation::Linear);
    let quad = QuadratureSpec::gauss_hermite(41);
    let op = RobustOperator::new(spec, &model, &grid, &quad).unwrap();
    let start = GridFunction::constant(&grid, 1e3);
    let r = monotone_solve(
        |f| op.apply(f),
        &start,
        &MonotoneOptions::new(Direction::FromAbove, 1e-9, 10_000),
    )
    .unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    assert!(r.monotone);
}

#[test]
fn ez_envelope_tail_is_negligible() {
    let m = common::ez_gaussian();
    let grid = common::ez_grid(41);
    let spec = EzSpec::new(0.96, 2.0, 0.5).unwrap();
    let pair = ez_eigenpair_closed_form(&m, spec.gamma, &grid).unwrap();
    let op = EzOperator::new(spec, pair, &Model::GaussianVar1(m), &QuadratureSpec::gauss_hermite(21)).unwrap();
    let a = ez_envelope(&op, Some(400)).unwrap();
    let b = ez_envelope(&op, Some(410)).unwrap();
    assert!(a.upper.sup_diff(&b.upper) < 1e-6);
    for i in 0..grid.len() {
        assert!(a.lower.values[i] <= a.upper.values[i]);
    }
}

use recutil::function_space::{Extrapolation, GridFunction};
use recutil::models::MarkovModel;
use recutil::operators::RobustOperator;
use recutil::quadrature::QuadratureSpec;
use recutil::solvers::{affine_solve_gaussian_robust, contraction_solve, truncation_gap_check};

use super::as_finding;
use super::robust_gaussian::{default_model, default_spec, gaussian};
use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::report::{ExperimentReport, Table};

pub(super) fn resolve(mut c: ExperimentConfig) -> CliResult<ExperimentConfig> {
    c.model.get_or_insert_with(default_model);
    c.recursion.get_or_insert_with(default_spec);
    c.sweep.levels.get_or_insert_with(|| vec![2.0, 3.0, 4.0]);
    if c.grid.spacing.is_none() {
        c.grid.nodes.get_or_insert_with(|| vec![121]);
    }
    c.grid.extrapolation.get_or_insert(Extrapolation::Linear);
    c.quadrature.get_or_insert_with(|| QuadratureSpec::gauss_hermite(41));
    c.solver.tol.get_or_insert(1e-12);
    c.solver.max_iter.get_or_insert(20_000);
    Ok(c)
}

pub(super) fn run(c: &ExperimentConfig, report: &mut ExperimentReport) -> CliResult<()> {
    let m = gaussian(c)?;
    let model = c.model()?;
    let spec = c.robust()?;
    let quad = c.quadrature();
    let closed = affine_solve_gaussian_robust(m, &spec, &quad)?;
    let law = model.stationary_law()?;
    let marg = law.marginal(0).expect("gaussian marginal");
    let (mu, sd) = (marg.mean(), marg.variance().sqrt());
    if m.dim() != 1 {
        return Err(crate::error::config_err("truncation-bound sweeps scalar models only"));
    }
    let mut table = Table::new(
        "truncation",
        "truncated fixed point against the closed form on C = [mean - k sd, mean + k sd]",
        &[
            ("k", "half-width in stationary sds"),
            ("lo", "lower end of C"),
            ("hi", "upper end of C"),
            ("lhs", "inf over C of v - v_C"),
            ("rhs", "beta/(1-beta) inf over C of log Q(C|x)"),
            ("eps_c", "-rhs"),
            ("worst_upper_excess", "max over C of v_C - v - eps_C"),
            ("bound_holds", "lhs >= rhs"),
            ("upper_holds", "v_C <= v + eps_C"),
            ("iterations", "contraction iterations"),
        ],
    );
    let mut eps = Vec::new();
    let mut all_bound = true;
    let mut all_upper = true;
    for k in c.levels() {
        let cb = (mu - k * sd, mu + k * sd);
        let grid = c.build_grid(&[cb])?;
        let tquad = c.truncated_quadrature(&[cb], 8);
        let op = RobustOperator::truncated(spec, model, &[cb], &grid, &tquad)?;
        let start = GridFunction::constant(&grid, 0.0);
        let solved = as_finding(
            report,
            &format!("k = {k}"),
            contraction_solve(|f| op.apply(f), &start, spec.beta, c.tol(), c.max_iter()),
        )?;
        let Some(r) = solved else {
            all_bound = false;
            all_upper = false;
            continue;
        };
        let v = GridFunction::from_fn(&grid, |x| closed.eval(x));
        let g = truncation_gap_check(spec.beta, &v, &r.solution, model, &[cb], &tquad)?;
        all_bound &= g.bound_holds;
        all_upper &= g.upper_holds;
        eps.push(g.eps_c);
        table.push(vec![
            k.into(),
            cb.0.into(),
            cb.1.into(),
            g.lhs.into(),
            g.rhs.into(),
            g.eps_c.into(),
            g.worst_upper_excess.into(),
            g.bound_holds.into(),
            g.upper_holds.into(),
            r.iterations.into(),
        ]);
    }
    report.check(
        "lower gap bound at every level",
        all_bound,
        "inf_C(v - v_C) >= beta/(1-beta) inf_C log Q(C|x)",
    );
    report.check("upper gap bound at every level", all_upper, "v_C <= v + eps_C on C");
    let decreasing = eps.windows(2).all(|w| w[1] < w[0]);
    report.check("eps_C decreases as C widens", decreasing, format!("{eps:?}"));
    if let Some(last) = eps.last() {
        report.value("eps_c_widest", *last);
    }
    report.tables.push(table);
    Ok(())
}

use recutil::function_space::{Extrapolation, GridFunction};
use recutil::models::{GaussianVar1Model, Model};
use recutil::operators::RobustOperator;
use recutil::preferences::{RecursionSpec, RobustSpec};
use recutil::quadrature::QuadratureSpec;
use recutil::solvers::{
    affine_solve_gaussian_robust, contraction_solve, lower_envelope_robust, monotone_solve, upper_envelope_robust,
    Direction, FixedPointResult, MonotoneOptions, SolveStatus,
};

use super::as_finding;
use crate::config::ExperimentConfig;
use crate::error::{config_err, CliResult};
use crate::report::{Cell, ExperimentReport, Table};

pub(crate) const GAP_TOL: f64 = 1e-4;
const CLOSED_FORM_RESIDUAL_TOL: f64 = 1e-6;

pub(crate) fn default_model() -> Model {
    Model::GaussianVar1(GaussianVar1Model::scalar(0.9, 0.0, 0.01, 1.0, 0.0).expect("valid defaults"))
}

pub(crate) fn default_spec() -> RecursionSpec {
    RecursionSpec::Robust(RobustSpec::with_alpha(0.95, -1.0).expect("valid defaults"))
}

pub(crate) fn gaussian(c: &ExperimentConfig) -> CliResult<&GaussianVar1Model> {
    match c.model()? {
        Model::GaussianVar1(m) => Ok(m),
        other => Err(config_err(format!("needs a gaussian-var1 model, got {}", other.tag()))),
    }
}

pub(super) fn resolve(mut c: ExperimentConfig) -> CliResult<ExperimentConfig> {
    c.model.get_or_insert_with(default_model);
    c.recursion.get_or_insert_with(default_spec);
    c.grid.sd_multiple.get_or_insert(4.0);
    if c.grid.spacing.is_none() {
        c.grid.nodes.get_or_insert_with(|| vec![201]);
    }
    c.grid.extrapolation.get_or_insert(Extrapolation::Linear);
    c.quadrature.get_or_insert_with(|| QuadratureSpec::gauss_hermite(41));
    c.solver.tol.get_or_insert(1e-10);
    c.solver.max_iter.get_or_insert(20_000);
    Ok(c)
}

pub(crate) fn trace_rows(table: &mut Table, label: &str, r: &FixedPointResult) {
    for (k, d) in r.trace.sup_changes.iter().enumerate() {
        table.push(vec![label.into(), (k + 1).into(), Cell::Num(*d)]);
    }
}

pub(super) fn run(c: &ExperimentConfig, report: &mut ExperimentReport) -> CliResult<()> {
    let m = gaussian(c)?;
    let spec = c.robust()?;
    let quad = c.quadrature();
    let model = c.model()?;
    let closed = affine_solve_gaussian_robust(m, &spec, &quad)?;
    report.value("a", closed.a);
    for (i, b) in closed.b.iter().enumerate() {
        report.value(&format!("b{i}"), *b);
    }
    report.value("closed_form_residual", closed.residual);
    report.check(
        "closed-form residual",
        closed.residual < CLOSED_FORM_RESIDUAL_TOL,
        format!("{:.2e} on test points around the stationary mean", closed.residual),
    );

    let bounds = c.bounds()?;
    let grid = c.build_grid(&bounds)?;
    let op = RobustOperator::new(spec, model, &grid, &quad)?;
    let exact = GridFunction::from_fn(&grid, |x| closed.eval(x));
    let upper = upper_envelope_robust(&spec, model, &grid, None, &quad)?;
    let lower = lower_envelope_robust(&spec, model, &grid, &quad)?;
    if let Some(note) = &upper.note {
        report.finding(format!("upper envelope: {note}"));
    }

    let mut trace = Table::new(
        "convergence",
        "sup-norm change per iteration",
        &[
            ("solve", "from-above, from-below or truncated"),
            ("iteration", "1-based"),
            ("sup_change", "sup |T f - f|"),
        ],
    );
    let mut solved = Vec::new();
    for (name, start, dir) in [
        ("from-above", &upper.function, Direction::FromAbove),
        ("from-below", &lower.function, Direction::FromBelow),
    ] {
        if start.diverged {
            report.finding(format!("{name}: envelope is not finite, solve skipped"));
            report.check(&format!("monotone solve {name}"), false, "envelope diverged");
            solved.push(None);
            continue;
        }
        let opts = MonotoneOptions::new(dir, c.tol(), c.max_iter()).with_blowup(c.solver.blowup.unwrap_or(1e6));
        let r = as_finding(report, name, monotone_solve(|f| op.apply(f), start, &opts))?;
        if let Some(r) = r {
            let gap = r.solution.sup_diff(&exact);
            report.value(&format!("gap_{}", name.replace('-', "_")), gap);
            report.check(
                &format!("monotone solve {name}"),
                r.status == SolveStatus::Converged && gap < GAP_TOL,
                format!(
                    "{:?} after {} iterations, sup gap to closed form {gap:.3e}, monotone {}",
                    r.status, r.iterations, r.monotone
                ),
            );
            trace_rows(&mut trace, name, &r);
            solved.push(Some(r.solution));
        } else {
            report.check(&format!("monotone solve {name}"), false, "solve diverged");
            solved.push(None);
        }
    }

    let tquad = c.truncated_quadrature(&bounds, 8);
    let top = RobustOperator::truncated(spec, model, &bounds, &grid, &tquad)?;
    let truncated = as_finding(
        report,
        "truncated",
        contraction_solve(
            |f| top.apply(f),
            &GridFunction::constant(&grid, 0.0),
            spec.beta,
            c.tol(),
            c.max_iter(),
        ),
    )?;
    if let Some(r) = &truncated {
        trace_rows(&mut trace, "truncated", r);
        report.value("gap_truncated", r.solution.sup_diff(&exact));
    }

    let mut table = Table::new(
        "solution",
        "value functions on the grid",
        &[
            ("x", "first state coordinate"),
            ("closed_form", "affine fixed point"),
            ("from_above", "monotone solve from the upper envelope"),
            ("from_below", "monotone solve from the lower envelope"),
            (
                "truncated",
                "contraction solve of the truncated operator on the grid box",
            ),
            ("upper_envelope", "upper envelope"),
            ("lower_envelope", "lower envelope"),
        ],
    );
    let pick = |f: &Option<GridFunction>, k: usize| f.as_ref().map_or(Cell::Num(f64::NAN), |g| Cell::Num(g.values[k]));
    let tsol = truncated.map(|r| r.solution);
    for k in 0..grid.len() {
        table.push(vec![
            grid.node(k)[0].into(),
            exact.values[k].into(),
            pick(&solved[0], k),
            pick(&solved[1], k),
            pick(&tsol, k),
            upper.function.values[k].into(),
            lower.function.values[k].into(),
        ]);
    }
    report.tables.push(table);
    report.tables.push(trace);
    Ok(())
}

use recutil::function_space::Extrapolation;
use recutil::models::{GaussianVar1Model, Model};
use recutil::operators::{eigenvalue_condition, ez_eigenpair, EigenMethod, EzOperator};
use recutil::preferences::{EzSpec, RecursionSpec};
use recutil::quadrature::QuadratureSpec;
use recutil::solvers::{ez_envelope, monotone_solve, Direction, MonotoneOptions, SolveStatus};

use super::as_finding;
use super::robust_gaussian::trace_rows;
use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::report::{Cell, ExperimentReport, Table};

const EIGEN_AGREEMENT_TOL: f64 = 1e-6;
const SQUEEZE_TOL: f64 = 2e-5;
const RECURSION_RESIDUAL_TOL: f64 = 1e-6;

pub(super) fn resolve(mut c: ExperimentConfig) -> CliResult<ExperimentConfig> {
    c.model.get_or_insert_with(|| {
        Model::GaussianVar1(GaussianVar1Model::scalar(0.5, 0.0, 0.04, 0.0, 1.0).expect("valid defaults"))
    });
    c.recursion
        .get_or_insert_with(|| RecursionSpec::EpsteinZin(EzSpec::new(0.96, 2.0, 0.5).expect("valid defaults")));
    c.grid.sd_multiple.get_or_insert(4.0);
    if c.grid.spacing.is_none() {
        c.grid.nodes.get_or_insert_with(|| vec![101]);
    }
    c.grid.extrapolation.get_or_insert(Extrapolation::Linear);
    c.quadrature.get_or_insert_with(|| QuadratureSpec::gauss_hermite(41));
    c.solver.tol.get_or_insert(1e-11);
    c.solver.max_iter.get_or_insert(20_000);
    Ok(c)
}

pub(super) fn run(c: &ExperimentConfig, report: &mut ExperimentReport) -> CliResult<()> {
    let model = c.model()?;
    let spec = c.epstein_zin()?;
    let quad = c.quadrature();
    let grid = c.build_grid(&c.bounds()?)?;
    report.value("kappa", spec.kappa());

    let power = ez_eigenpair(model, spec.gamma, &grid, EigenMethod::PowerIteration, &quad)?;
    report.value("lambda_power", power.lambda);
    let pair = if matches!(model, Model::GaussianVar1(_)) {
        let closed = ez_eigenpair(model, spec.gamma, &grid, EigenMethod::ClosedForm, &quad)?;
        report.value("lambda_closed_form", closed.lambda);
        if let Some(b) = &closed.coefficient {
            for (i, v) in b.iter().enumerate() {
                report.value(&format!("log_iota_coefficient{i}"), *v);
            }
        }
        let reference = (0..grid.len())
            .find(|&k| power.log_iota.values[k] == 0.0)
            .unwrap_or(grid.len() / 2);
        let rescaled = closed.normalized_at(reference);
        let d = power.log_iota.sup_diff(&rescaled.log_iota);
        let dl = (power.lambda - closed.lambda).abs();
        report.check(
            "power iteration matches closed form",
            d < EIGEN_AGREEMENT_TOL && dl < EIGEN_AGREEMENT_TOL,
            format!("sup log-iota gap {d:.3e}, lambda gap {dl:.3e}"),
        );
        closed
    } else {
        report.finding("no closed-form eigenpair for this model; the power-iteration pair is used");
        power
    };

    let cond = eigenvalue_condition(spec.beta, pair.lambda, spec.kappa())?;
    report.value("eigenvalue_condition", cond.value);
    report.check(
        "eigenvalue condition beta lambda^(1/kappa) < 1",
        cond.pass,
        format!("value {:.15}, margin {:.3e}", cond.value, cond.margin),
    );
    if !cond.pass {
        report.finding("eigenvalue condition fails; envelopes and solves skipped");
        return Ok(());
    }

    let op = EzOperator::new(spec, pair, model, &quad)?;
    let env = ez_envelope(&op, None)?;
    report.value("envelope_terms", env.terms as f64);
    let mut trace = Table::new(
        "convergence",
        "sup-norm change per iteration",
        &[
            ("solve", "from-above or from-below"),
            ("iteration", "1-based"),
            ("sup_change", "sup |T f - f|"),
        ],
    );
    let mut sols = Vec::new();
    for (name, start, dir) in [
        ("from-above", &env.upper, Direction::FromAbove),
        ("from-below", &env.lower, Direction::FromBelow),
    ] {
        let opts = MonotoneOptions::new(dir, c.tol(), c.max_iter());
        let r = as_finding(report, name, monotone_solve(|f| op.apply(f), start, &opts))?;
        if let Some(r) = &r {
            trace_rows(&mut trace, name, r);
            report.check(
                &format!("monotone solve {name}"),
                r.status == SolveStatus::Converged,
                format!(
                    "{:?} after {} iterations, monotone {}",
                    r.status, r.iterations, r.monotone
                ),
            );
        } else {
            report.check(&format!("monotone solve {name}"), false, "solve diverged");
        }
        sols.push(r.map(|r| r.solution));
    }
    let mut v = None;
    if let (Some(a), Some(b)) = (&sols[0], &sols[1]) {
        let gap = a.sup_diff(b);
        report.value("squeeze_gap", gap);
        report.check(
            "envelope squeeze",
            gap < SQUEEZE_TOL,
            format!("sup gap between the two solves {gap:.3e}"),
        );
        let rec = op.recover(a);
        let res = op.recursion_residual(&rec)?;
        report.value("recursion_residual", res);
        report.check(
            "recovered v solves the recursion",
            res < RECURSION_RESIDUAL_TOL,
            format!("{res:.3e}"),
        );
        v = Some(rec);
    }

    let mut table = Table::new(
        "solution",
        "Epstein-Zin fixed point on the grid",
        &[
            ("x", "first state coordinate"),
            ("log_iota", "log eigenfunction"),
            ("upper_envelope", "upper envelope of the transformed recursion"),
            ("lower_envelope", "lower envelope of the transformed recursion"),
            ("from_above", "monotone solve from the upper envelope"),
            ("from_below", "monotone solve from the lower envelope"),
            ("v", "recovered value function"),
        ],
    );
    let pick =
        |f: Option<&recutil::function_space::GridFunction>, k: usize| Cell::Num(f.map_or(f64::NAN, |g| g.values[k]));
    for k in 0..grid.len() {
        table.push(vec![
            grid.node(k)[0].into(),
            op.pair().log_iota.values[k].into(),
            env.upper.values[k].into(),
            env.lower.values[k].into(),
            pick(sols[0].as_ref(), k),
            pick(sols[1].as_ref(), k),
            pick(v.as_ref(), k),
        ]);
    }
    report.tables.push(table);
    report.tables.push(trace);
    Ok(())
}

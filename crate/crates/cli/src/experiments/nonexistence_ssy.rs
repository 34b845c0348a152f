use recutil::function_space::{thin_tail_check, Extrapolation, GridFunction, StateGrid, Verdict as TailVerdict};
use recutil::models::{Model, SsyVolModel};
use recutil::operators::RobustOperator;
use recutil::preferences::{RecursionSpec, RobustSpec};
use recutil::quadrature::QuadratureSpec;
use recutil::solvers::{contraction_solve, upper_envelope_robust};

use super::as_finding;
use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::report::{Cell, ExperimentReport, Table, Verdict};

pub(super) fn resolve(mut c: ExperimentConfig) -> CliResult<ExperimentConfig> {
    c.model
        .get_or_insert_with(|| Model::SsyVol(SsyVolModel::new(0.0, -0.1, 0.9, 0.1).expect("valid defaults")));
    c.recursion
        .get_or_insert_with(|| RecursionSpec::Robust(RobustSpec::with_alpha(0.95, -1.0).expect("valid defaults")));
    c.sweep.levels.get_or_insert_with(|| vec![2.0, 4.0, 6.0, 8.0]);
    c.sweep.samples.get_or_insert(10_000);
    if c.grid.nodes.is_none() {
        c.grid.spacing.get_or_insert(0.05);
    }
    c.grid.extrapolation.get_or_insert(Extrapolation::Linear);
    c.quadrature.get_or_insert_with(|| QuadratureSpec::gauss_hermite(41));
    c.solver.tol.get_or_insert(1e-12);
    c.solver.max_iter.get_or_insert(20_000);
    Ok(c)
}

pub(super) fn run(c: &ExperimentConfig, report: &mut ExperimentReport) -> CliResult<()> {
    let model = c.model()?;
    let spec = c.robust()?;
    let quad = c.quadrature();
    let n = c.sweep.samples.expect("resolved");

    let tt = thin_tail_check(model, None, 1.0, None, n, c.seed)?;
    let verdict = match tt.overall {
        TailVerdict::Fail => Verdict::Pass,
        TailVerdict::Pass => Verdict::Fail,
        TailVerdict::Inconclusive => Verdict::Inconclusive,
    };
    report.verdict(
        "thin-tail condition fails for u",
        verdict,
        format!("overall {:?} by {:?} check, seed {}", tt.overall, tt.method, c.seed),
    );
    let mut tail = Table::new(
        "thin_tail",
        "exponential moment E exp(|u|/c) per scale c",
        &[
            ("c", "scale"),
            ("verdict", "finiteness verdict at c"),
            ("log_expectation", "log E exp(|u|/c) when finite"),
        ],
    );
    for p in &tt.per_c {
        tail.push(vec![
            p.c.into(),
            format!("{:?}", p.verdict).to_lowercase().into(),
            Cell::Num(p.log_expectation.unwrap_or(f64::NAN)),
        ]);
    }

    let mut table = Table::new(
        "levels",
        "truncated fixed points on C_H = [-H, H]",
        &[
            ("H", "half-width of the box"),
            ("nodes", "grid nodes"),
            ("v_at_0", "truncated fixed point at 0"),
            ("increment", "v_at_0 minus its value at the previous H"),
            ("iterations", "contraction iterations"),
        ],
    );
    let mut values = Vec::new();
    for h in c.levels() {
        let cb = (-h, h);
        let grid = c.build_grid(&[cb])?;
        let tquad = c.truncated_quadrature(&[cb], 6);
        let op = RobustOperator::truncated(spec, model, &[cb], &grid, &tquad)?;
        let r = as_finding(
            report,
            &format!("H = {h}"),
            contraction_solve(
                |f| op.apply(f),
                &GridFunction::constant(&grid, 0.0),
                spec.beta,
                c.tol(),
                c.max_iter(),
            ),
        )?;
        let Some(r) = r else { continue };
        let v0 = r.solution.eval(&[0.0])?;
        let inc = values.last().map_or(f64::NAN, |p| v0 - p);
        table.push(vec![
            h.into(),
            grid.len().into(),
            v0.into(),
            Cell::Num(inc),
            r.iterations.into(),
        ]);
        values.push(v0);
    }
    let incs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let solved_all = values.len() == c.levels().len();
    report.check(
        "v_C(0) strictly increasing in H",
        solved_all && values.len() >= 2 && incs.iter().all(|d| *d > 0.0),
        format!("{values:?}"),
    );
    report.check(
        "increments grow",
        incs.len() >= 2 && incs.last() > incs.first(),
        format!("{incs:?}"),
    );

    let first = c.levels()[0];
    let egrid = StateGrid::build(&[(-first, first)], &[21], Extrapolation::Linear)?;
    let env = upper_envelope_robust(&spec, model, &egrid, None, &quad)?;
    report.check(
        "upper envelope diverges",
        env.diverged,
        env.note.clone().unwrap_or_else(|| "envelope series converged".into()),
    );
    let evidence = report.checks.iter().filter(|c| c.verdict == Verdict::Pass).count();
    report.finding(format!(
        "divergence verdict: {} of 4 diagnostics indicate no fixed point with thin tails",
        evidence
    ));
    if let Some(v) = values.last() {
        report.value("v_at_0_widest", *v);
    }
    report.tables.push(table);
    report.tables.push(tail);
    Ok(())
}

use recutil::models::Model;
use recutil::preferences::RecursionSpec;
use recutil::solvers::{affine_map_iterate, affine_solve_disaster, BasinLabel, DisasterAffineParams};

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::report::{Cell, ExperimentReport, Table};

const ROOT_RESIDUAL_TOL: f64 = 1e-8;

pub(super) fn resolve(mut c: ExperimentConfig) -> CliResult<ExperimentConfig> {
    if c.affine.is_none() {
        c.affine = Some(match (&c.model, &c.recursion) {
            (Some(Model::DisasterArg(m)), Some(RecursionSpec::Robust(s))) => DisasterAffineParams::from_model(m, s)?,
            _ => DisasterAffineParams {
                a_const: 0.0,
                b_const: 0.1,
                beta: 0.9,
                c: 0.2,
                phi: 0.8,
                delta: 1.0,
            },
        });
    }
    c.sweep
        .basin_starts
        .get_or_insert_with(|| vec![0.0, 0.25, 0.49, 0.75, 0.99, 1.01, 1.2, 2.0]);
    c.sweep.basin_steps.get_or_insert(500);
    c.solver.tol.get_or_insert(1e-8);
    c.solver.max_iter.get_or_insert(100_000);
    Ok(c)
}

fn label_name(l: BasinLabel) -> &'static str {
    match l {
        BasinLabel::ConvergeToSmallest => "converge-to-smallest",
        BasinLabel::AtUnstable => "at-unstable",
        BasinLabel::Diverge => "diverge",
        BasinLabel::Undetermined => "undetermined",
    }
}

pub(super) fn run(c: &ExperimentConfig, report: &mut ExperimentReport) -> CliResult<()> {
    let p = c.affine.expect("resolved");
    let roots = affine_solve_disaster(&p)?;
    report.value("q", roots.q);
    report.value("discriminant", roots.discriminant);
    let mut rt = Table::new(
        "roots",
        "affine fixed points v(h) = a + b h",
        &[
            ("root", "1 for the smaller b, 2 for the larger"),
            ("a", "intercept"),
            ("b", "slope"),
            ("residual", "sup operator residual over the test points"),
            ("one_minus_bc", "1 - b c, positive when the Laplace transform is finite"),
        ],
    );
    let Some((s1, s2)) = roots.roots else {
        report.finding(format!("no affine fixed point: {}", roots.note));
        report.check("two affine roots", false, roots.note.clone());
        report.tables.push(rt);
        return Ok(());
    };
    for (i, s) in [(1usize, &s1), (2, &s2)] {
        report.value(&format!("a{i}"), s.a);
        report.value(&format!("b{i}"), s.b[0]);
        report.value(&format!("residual{i}"), s.residual);
        rt.push(vec![
            i.into(),
            s.a.into(),
            s.b[0].into(),
            s.residual.into(),
            (1.0 - s.b[0] * p.c).into(),
        ]);
    }
    report.check(
        "two affine roots",
        true,
        format!("b1 = {:.15}, b2 = {:.15}", s1.b[0], s2.b[0]),
    );
    report.check(
        "root residuals",
        s1.residual < ROOT_RESIDUAL_TOL && s2.residual < ROOT_RESIDUAL_TOL,
        format!("{:.2e}, {:.2e}", s1.residual, s2.residual),
    );
    report.tables.push(rt);

    let mut bt = Table::new(
        "basins",
        "coefficient iteration from (0, b0)",
        &[
            ("b0", "initial slope"),
            ("label", "converge-to-smallest, at-unstable, diverge or undetermined"),
            ("steps", "map applications performed"),
            ("a_final", "last intercept"),
            ("b_final", "last slope"),
            ("expected", "label implied by the position of b0 relative to b2"),
        ],
    );
    let (b1, b2) = (s1.b[0], s2.b[0]);
    let steps_cap = c.sweep.basin_steps.expect("resolved");
    let mut agree = 0;
    let starts = c.sweep.basin_starts.clone().expect("resolved");
    for &b0 in &starts {
        let expected = if (b0 - b2).abs() <= 1e-12 * b2.abs().max(1.0) {
            BasinLabel::AtUnstable
        } else if b0 < b2 {
            BasinLabel::ConvergeToSmallest
        } else {
            BasinLabel::Diverge
        };
        let cap = if expected == BasinLabel::Diverge {
            steps_cap
        } else {
            c.max_iter()
        };
        let it = affine_map_iterate(&p, 0.0, b0, cap, c.tol())?;
        let (a, b) = it.path.last().copied().unwrap_or((0.0, b0));
        if it.label == expected {
            agree += 1;
        }
        bt.push(vec![
            b0.into(),
            label_name(it.label).into(),
            it.steps.into(),
            Cell::Num(a),
            Cell::Num(b),
            label_name(expected).into(),
        ]);
    }
    report.check(
        "basin labels",
        agree == starts.len(),
        format!(
            "{agree}/{} starts labeled as predicted (below b2 converge to b1 = {b1:.6}, above diverge)",
            starts.len()
        ),
    );
    report.tables.push(bt);
    Ok(())
}

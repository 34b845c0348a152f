use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use recutil::function_space::{GridFunction, StateGrid};
use recutil::models::{HiddenRegimeModel, Model};
use recutil::operators::{belief_grid, LearningOperator};
use recutil::preferences::{LearningSpec, RecursionSpec};
use recutil::quadrature::QuadratureSpec;
use recutil::solvers::{learning_envelopes, monotone_solve, Direction, MonotoneOptions, SolveStatus};

use super::as_finding;
use super::robust_gaussian::trace_rows;
use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::report::{Cell, ExperimentReport, Table};

const RESIDUAL_TOL: f64 = 1e-6;
const SQUEEZE_TOL: f64 = 1e-6;
const PROPERTY_SLACK: f64 = 1e-11;

pub(super) fn resolve(mut c: ExperimentConfig) -> CliResult<ExperimentConfig> {
    c.model.get_or_insert_with(|| {
        Model::HiddenRegime(
            HiddenRegimeModel::new(
                DMatrix::from_row_slice(2, 2, &[0.97, 0.1, 0.03, 0.9]),
                vec![0.02, -0.01],
                vec![0.0004, 0.0004],
            )
            .expect("valid defaults"),
        )
    });
    c.recursion.get_or_insert_with(|| {
        RecursionSpec::Learning(LearningSpec::new(0.95, 1.0, Some(0.5)).expect("valid defaults"))
    });
    if c.grid.spacing.is_none() {
        c.grid.nodes.get_or_insert_with(|| vec![101]);
    }
    c.quadrature.get_or_insert_with(|| QuadratureSpec::gauss_hermite(41));
    c.solver.tol.get_or_insert(1e-11);
    c.solver.max_iter.get_or_insert(20_000);
    c.sweep.property_cases.get_or_insert(50);
    Ok(c)
}

fn grid_for(c: &ExperimentConfig) -> CliResult<StateGrid> {
    match c.model()? {
        Model::HiddenRegime(m) => {
            let n = c.grid.nodes.as_ref().and_then(|v| v.first().copied()).unwrap_or(101);
            Ok(belief_grid(m.regimes(), n)?)
        }
        _ => c.build_grid(&c.bounds()?),
    }
}

fn random_function(grid: &StateGrid, rng: &mut ChaCha8Rng) -> GridFunction {
    let a: f64 = rng.random_range(-2.0..2.0);
    let b: f64 = rng.random_range(-3.0..3.0);
    let w: f64 = rng.random_range(1.0..8.0);
    GridFunction::from_fn(grid, |x| {
        let s: f64 = x.iter().sum();
        a + b * s + 0.5 * (w * s).sin()
    })
}

pub(super) fn run(c: &ExperimentConfig, report: &mut ExperimentReport) -> CliResult<()> {
    let model = c.model()?;
    let spec = c.learning()?;
    let quad = c.quadrature();
    let grid = grid_for(c)?;
    let op = LearningOperator::new(spec, model, &grid, &quad)?;
    let (hi, lo) = learning_envelopes(&op)?;
    report.value("upper_envelope", hi.values[0]);
    report.value("lower_envelope", lo.values[0]);

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
        ("from-above", &hi, Direction::FromAbove),
        ("from-below", &lo, Direction::FromBelow),
    ] {
        let opts = MonotoneOptions::new(dir, c.tol(), c.max_iter());
        if let Some(r) = as_finding(report, name, monotone_solve(|f| op.apply(f), start, &opts))? {
            let res = op.residual(&r.solution)?;
            report.check(
                &format!("fixed point {name}"),
                r.status == SolveStatus::Converged && res < RESIDUAL_TOL,
                format!("{:?} after {} iterations, residual {res:.3e}", r.status, r.iterations),
            );
            trace_rows(&mut trace, name, &r);
            sols.push(Some(r.solution));
        } else {
            report.check(&format!("fixed point {name}"), false, "solve diverged");
            sols.push(None);
        }
    }
    if let (Some(a), Some(b)) = (&sols[0], &sols[1]) {
        let gap = a.sup_diff(b);
        report.value("squeeze_gap", gap);
        report.check(
            "envelope squeeze",
            gap < SQUEEZE_TOL,
            format!("sup gap between the two solves {gap:.3e}"),
        );
    }

    let cases = c.sweep.property_cases.expect("resolved");
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let (mut mono, mut shift, mut convex) = (0, 0, 0);
    for _ in 0..cases {
        let f = random_function(&grid, &mut rng);
        let g = random_function(&grid, &mut rng);
        let tf = op.apply(&f)?;
        let tg = op.apply(&g)?;
        let k: f64 = rng.random_range(-5.0..5.0);
        let tau: f64 = rng.random_range(0.0..1.0);
        let tmax = op.apply(&f.zip_with(&g, f64::max))?;
        let ts = op.apply(&f.map(|v| v + k))?;
        let tm = op.apply(&f.zip_with(&g, |a, b| tau * a + (1.0 - tau) * b))?;
        let slack = |v: f64| PROPERTY_SLACK * (1.0 + v.abs());
        let n = grid.len();
        if (0..n).all(|i| tf.values[i].max(tg.values[i]) <= tmax.values[i] + slack(tmax.values[i])) {
            mono += 1;
        }
        if (0..n).all(|i| (ts.values[i] - tf.values[i] - spec.beta * k).abs() <= slack(tf.values[i])) {
            shift += 1;
        }
        if (0..n).all(|i| {
            let rhs = tau * tf.values[i] + (1.0 - tau) * tg.values[i];
            tm.values[i] <= rhs + slack(rhs)
        }) {
            convex += 1;
        }
    }
    for (name, count) in [
        ("monotonicity", mono),
        ("discounted shift", shift),
        ("convexity", convex),
    ] {
        report.check(
            &format!("property {name}"),
            count == cases,
            format!("{count}/{cases} random pairs"),
        );
    }

    let dim = grid.dim();
    let coord_names: Vec<String> = (0..dim).map(|i| format!("z{i}")).collect();
    let mut cols: Vec<(&str, &str)> = coord_names.iter().map(|n| (n.as_str(), "grid coordinate")).collect();
    cols.push(("from_above", "monotone solve from the upper envelope"));
    cols.push(("from_below", "monotone solve from the lower envelope"));
    let mut table = Table::new(
        "solution",
        "learning fixed point; for regime beliefs z_i is the probability of regime i",
        &cols,
    );
    for k in 0..grid.len() {
        let mut row: Vec<Cell> = grid.node(k).into_iter().map(Cell::Num).collect();
        for s in &sols {
            row.push(Cell::Num(s.as_ref().map_or(f64::NAN, |f| f.values[k])));
        }
        table.push(row);
    }
    report.tables.push(table);
    report.tables.push(trace);
    Ok(())
}

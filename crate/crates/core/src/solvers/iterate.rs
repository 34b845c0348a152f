//! Monotone and contraction fixed-point iteration on grid functions.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_space::GridFunction;

/// Side from which a monotone iteration is started.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    FromAbove,
    FromBelow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    Diverged,
    /// Neither the tolerance nor the blow-up threshold was reached.
    Inconclusive,
}

/// Basin of an iteration started at an affine guess.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasinLabel {
    ConvergeToSmallest,
    AtUnstable,
    Diverge,
    Undetermined,
}

/// Per-iteration record of a solve.
#[derive(Debug, Clone, Default, Serialize)]
pub struct IterationTrace {
    pub sup_changes: Vec<f64>,
    /// Flat grid indices whose values are recorded.
    pub tracked_nodes: Vec<usize>,
    /// `node_values[k][i]`: value at `tracked_nodes[i]` after iteration `k`.
    pub node_values: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basin: Option<BasinLabel>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointResult {
    pub solution: GridFunction,
    pub status: SolveStatus,
    /// Operator applications before the one that met the tolerance.
    pub iterations: usize,
    /// Sup-norm change of the last application.
    pub residual: f64,
    /// True when every iterate moved in the declared direction.
    pub monotone: bool,
    pub diverged: bool,
    pub wall_time_s: f64,
    pub trace: IterationTrace,
}

/// Default blow-up threshold on node magnitudes.
pub const DEFAULT_BLOWUP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneOptions {
    pub direction: Direction,
    pub tol: f64,
    pub max_iter: usize,
    pub blowup: f64,
}

impl MonotoneOptions {
    pub fn new(direction: Direction, tol: f64, max_iter: usize) -> Self {
        Self {
            direction,
            tol,
            max_iter,
            blowup: DEFAULT_BLOWUP,
        }
    }

    pub fn with_blowup(mut self, blowup: f64) -> Self {
        self.blowup = blowup;
        self
    }
}

fn tracked(n: usize) -> Vec<usize> {
    let mut v = vec![0, n / 2, n.saturating_sub(1)];
    v.dedup();
    v
}

/// Slack for the pointwise monotonicity check, relative to the value scale.
const MONOTONE_SLACK: f64 = 1e-12;

/// Iterates `op` from `start` until the sup-change falls below `tol`, a node
/// exceeds `blowup` in magnitude, or `max_iter` applications are used.
pub fn monotone_solve<F>(op: F, start: &GridFunction, opts: &MonotoneOptions) -> Result<FixedPointResult>
where
    F: Fn(&GridFunction) -> Result<GridFunction>,
{
    if start.diverged {
        return Err(Error::invalid("monotone iteration needs a finite start"));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::invalid("tol must be positive and max_iter at least 1"));
    }
    let t0 = Instant::now();
    let nodes = tracked(start.values.len());
    let mut trace = IterationTrace {
        tracked_nodes: nodes.clone(),
        ..Default::default()
    };
    let mut f = start.clone();
    let mut monotone = true;
    let mut status = SolveStatus::Inconclusive;
    let mut residual = f64::INFINITY;
    let mut iterations = opts.max_iter;
    for it in 0..opts.max_iter {
        let g = op(&f)?;
        let blown = g.diverged || g.values.iter().any(|v| v.abs() > opts.blowup);
        if !blown {
            for (a, b) in g.values.iter().zip(&f.values) {
                let slack = MONOTONE_SLACK * (1.0 + b.abs());
                let ok = match opts.direction {
                    Direction::FromAbove => *a <= b + slack,
                    Direction::FromBelow => *a >= b - slack,
                };
                monotone &= ok;
            }
        }
        residual = if g.diverged { f64::INFINITY } else { g.sup_diff(&f) };
        trace.sup_changes.push(residual);
        trace.node_values.push(nodes.iter().map(|&k| g.values[k]).collect());
        f = g;
        if blown {
            status = SolveStatus::Diverged;
            iterations = it + 1;
            break;
        }
        if residual < opts.tol {
            status = SolveStatus::Converged;
            iterations = it;
            break;
        }
    }
    let diverged = status == SolveStatus::Diverged;
    Ok(FixedPointResult {
        solution: f,
        status,
        iterations,
        residual,
        monotone,
        diverged,
        wall_time_s: t0.elapsed().as_secs_f64(),
        trace,
    })
}

/// Allowed excess of the observed change ratio over `β`.
pub const CONTRACTION_SLACK: f64 = 1e-6;

/// Iterates a sup-norm contraction with modulus `beta`. Stops when the change
/// is below `tol · max(1, ‖f‖_∞)`; errors if a change ratio exceeds
/// `beta + 1e-6` while changes are above roundoff.
pub fn contraction_solve<F>(
    op: F,
    start: &GridFunction,
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointResult>
where
    F: Fn(&GridFunction) -> Result<GridFunction>,
{
    if start.diverged {
        return Err(Error::invalid("contraction iteration needs a finite start"));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::invalid("tol must be positive and max_iter at least 1"));
    }
    let t0 = Instant::now();
    let nodes = tracked(start.values.len());
    let mut trace = IterationTrace {
        tracked_nodes: nodes.clone(),
        ..Default::default()
    };
    let mut f = start.clone();
    let mut prev_change = f64::NAN;
    let mut status = SolveStatus::Inconclusive;
    let mut residual = f64::INFINITY;
    let mut iterations = max_iter;
    for it in 0..max_iter {
        let g = op(&f)?;
        if g.diverged {
            return Err(Error::Divergence(
                "truncated operator produced a non-finite value".into(),
            ));
        }
        let change = g.sup_diff(&f);
        let scale = g.sup_norm().max(1.0);
        if prev_change.is_finite() && prev_change > 1e-9 * scale && change > (beta + CONTRACTION_SLACK) * prev_change {
            return Err(Error::Consistency(format!(
                "change ratio {} exceeds the modulus {beta} at iteration {it}",
                change / prev_change
            )));
        }
        trace.sup_changes.push(change);
        trace.node_values.push(nodes.iter().map(|&k| g.values[k]).collect());
        prev_change = change;
        residual = change;
        f = g;
        if change < tol * scale {
            status = SolveStatus::Converged;
            iterations = it;
            break;
        }
    }
    Ok(FixedPointResult {
        solution: f,
        status,
        iterations,
        residual,
        monotone: false,
        diverged: false,
        wall_time_s: t0.elapsed().as_secs_f64(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_space::{Extrapolation, StateGrid};

    fn grid() -> StateGrid {
        StateGrid::build(&[(0.0, 1.0)], &[5], Extrapolation::Linear).unwrap()
    }

    #[test]
    fn affine_contraction_converges_from_both_sides() {
        let op = |f: &GridFunction| Ok(f.map(|v| 0.5 * v + 1.0));
        let g = grid();
        let up = monotone_solve(
            op,
            &GridFunction::constant(&g, 10.0),
            &MonotoneOptions::new(Direction::FromAbove, 1e-12, 1000),
        )
        .unwrap();
        let down = monotone_solve(
            op,
            &GridFunction::constant(&g, 0.0),
            &MonotoneOptions::new(Direction::FromBelow, 1e-12, 1000),
        )
        .unwrap();
        assert_eq!(up.status, SolveStatus::Converged);
        assert!(up.monotone && down.monotone);
        assert!(up.solution.sup_diff(&down.solution) < 1e-11);
        let c = contraction_solve(op, &GridFunction::constant(&g, -3.0), 0.5, 1e-12, 1000).unwrap();
        assert!((c.solution.values[0] - 2.0).abs() < 1e-11);
    }

    #[test]
    fn exact_start_needs_no_iterations() {
        let op = |f: &GridFunction| Ok(f.map(|v| 0.5 * v + 1.0));
        let r = monotone_solve(
            op,
            &GridFunction::constant(&grid(), 2.0),
            &MonotoneOptions::new(Direction::FromAbove, 1e-12, 10),
        )
        .unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.status, SolveStatus::Converged);
    }

    #[test]
    fn blowup_and_modulus_violation() {
        let grow = |f: &GridFunction| Ok(f.map(|v| 2.0 * v + 1.0));
        let r = monotone_solve(
            grow,
            &GridFunction::constant(&grid(), 0.0),
            &MonotoneOptions::new(Direction::FromBelow, 1e-12, 1000),
        )
        .unwrap();
        assert_eq!(r.status, SolveStatus::Diverged);
        assert!(contraction_solve(grow, &GridFunction::constant(&grid(), 0.0), 0.5, 1e-12, 100).is_err());
        let slow = |f: &GridFunction| Ok(f.map(|v| v + 1e-3));
        let r = monotone_solve(
            slow,
            &GridFunction::constant(&grid(), 0.0),
            &MonotoneOptions::new(Direction::FromBelow, 1e-12, 50),
        )
        .unwrap();
        assert_eq!(r.status, SolveStatus::Inconclusive);
    }
}

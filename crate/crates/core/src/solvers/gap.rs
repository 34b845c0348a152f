//! Comparison of the truncated fixed point with the untruncated one.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::function_space::GridFunction;
use crate::models::{Model, ValueKernel};
use crate::quadrature::QuadratureSpec;

/// Slack for floating-point comparisons in the gap report.
pub const GAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    /// Nodes of `v_C`'s grid lying in `C`.
    pub nodes: Vec<Vec<f64>>,
    pub v: Vec<f64>,
    pub v_c: Vec<f64>,
    pub log_q: Vec<f64>,
    /// `inf_C (v − v_C)`.
    pub lhs: f64,
    /// `β/(1−β) · inf_C log Q(C|x)`.
    pub rhs: f64,
    /// `−rhs`.
    pub eps_c: f64,
    pub bound_holds: bool,
    /// `v_C ≤ v + ε_C` at every node.
    pub upper_holds: bool,
    /// Largest `v_C − v − ε_C`.
    pub worst_upper_excess: f64,
}

/// Report from values already on shared nodes.
pub fn gap_report(beta: f64, nodes: Vec<Vec<f64>>, v: Vec<f64>, v_c: Vec<f64>, log_q: Vec<f64>) -> Result<GapReport> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("beta must lie in (0, 1)"));
    }
    if nodes.is_empty() || v.len() != nodes.len() || v_c.len() != nodes.len() || log_q.len() != nodes.len() {
        return Err(Error::invalid("gap report needs equally long non-empty node tables"));
    }
    if let Some(k) = log_q.iter().position(|l| !l.is_finite()) {
        return Err(Error::Domain(format!("Q(C|x) = 0 at x = {:?}", nodes[k])));
    }
    let lhs = v.iter().zip(&v_c).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
    let inf_log_q = log_q.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0);
    let rhs = beta / (1.0 - beta) * inf_log_q;
    let eps_c = -rhs;
    let worst_upper_excess = v_c
        .iter()
        .zip(&v)
        .map(|(c, a)| c - a - eps_c)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GapReport {
        nodes,
        v,
        v_c,
        log_q,
        lhs,
        rhs,
        eps_c,
        bound_holds: lhs >= rhs - GAP_TOL,
        upper_holds: worst_upper_excess <= GAP_TOL,
        worst_upper_excess,
    })
}

/// Evaluates `v` and `log Q(C|x)` at the nodes of `v_c` inside the box `c`
/// and checks `inf_C(v − v_C) ≥ β/(1−β) inf_C log Q(C|x)`.
pub fn truncation_gap_check(
    beta: f64,
    v: &GridFunction,
    v_c: &GridFunction,
    model: &Model,
    c: &[(f64, f64)],
    quad: &QuadratureSpec,
) -> Result<GapReport> {
    truncation_gap_check_kernel(beta, v, v_c, model.value_kernel()?, c, quad)
}

pub fn truncation_gap_check_kernel(
    beta: f64,
    v: &GridFunction,
    v_c: &GridFunction,
    kernel: &dyn ValueKernel,
    c: &[(f64, f64)],
    quad: &QuadratureSpec,
) -> Result<GapReport> {
    if v_c.diverged || v.diverged {
        return Err(Error::Divergence("gap check needs finite value functions".into()));
    }
    let grid = &v_c.grid;
    let mut nodes = Vec::new();
    let mut vs = Vec::new();
    let mut vcs = Vec::new();
    let mut lq = Vec::new();
    for k in 0..grid.len() {
        let x = grid.node(k);
        let inside = x
            .iter()
            .zip(c)
            .all(|(xi, (lo, hi))| *xi >= lo - 1e-12 && *xi <= hi + 1e-12);
        if !inside {
            continue;
        }
        let log_mass = kernel.truncated_value_nodes(&x, 0.0, c, quad)?.log_mass;
        vs.push(v.eval(&x)?);
        vcs.push(v_c.values[k]);
        lq.push(log_mass.min(0.0));
        nodes.push(x);
    }
    gap_report(beta, nodes, vs, vcs, lq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_truncation_gives_zero_bound() {
        let r = gap_report(
            0.9,
            vec![vec![0.0], vec![1.0]],
            vec![1.0, 2.0],
            vec![1.0, 2.0],
            vec![0.0, 0.0],
        )
        .unwrap();
        assert_eq!(r.eps_c, 0.0);
        assert!(r.bound_holds && r.upper_holds);
    }

    #[test]
    fn zero_mass_is_an_error() {
        assert!(gap_report(0.9, vec![vec![0.0]], vec![1.0], vec![1.0], vec![f64::NEG_INFINITY]).is_err());
    }
}

//! Grid discretization of a value kernel: for every grid node, the quadrature
//! nodes of the next value state with their interpolation stencils.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::function_space::{Extrapolation, GridFunction, StateGrid};
use crate::models::{TransitionNode, ValueKernel};
use crate::numerics::LogSumExp;
use crate::quadrature::QuadratureSpec;

/// Next-state nodes of one grid node, with stencils stored in CSR form.
#[derive(Debug, Clone)]
pub struct KernelRow {
    pub log_weights: Vec<f64>,
    /// log E[exp(t·u) | x, x'] for the tilt the transition was built with.
    pub log_tilts: Vec<f64>,
    pub utility_means: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    stencil_ptr: Vec<usize>,
    stencil_idx: Vec<usize>,
    stencil_w: Vec<f64>,
    /// log Q(C | x) for truncated rows, zero otherwise.
    pub log_mass: f64,
}

impl KernelRow {
    fn from_nodes(grid: &StateGrid, nodes: Vec<TransitionNode>, log_mass: f64, policy: Extrapolation) -> Self {
        let n = nodes.len();
        let mut row = KernelRow {
            log_weights: Vec::with_capacity(n),
            log_tilts: Vec::with_capacity(n),
            utility_means: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            stencil_ptr: Vec::new(),
            stencil_idx: Vec::new(),
            stencil_w: Vec::new(),
            log_mass,
        };
        for node in nodes {
            row.log_weights.push(node.log_weight);
            row.log_tilts.push(node.log_tilt);
            row.utility_means.push(node.utility_mean);
            row.states.push(node.state);
        }
        row.set_stencils(grid, policy);
        row
    }

    fn set_stencils(&mut self, grid: &StateGrid, policy: Extrapolation) {
        self.stencil_ptr = Vec::with_capacity(self.states.len() + 1);
        self.stencil_idx.clear();
        self.stencil_w.clear();
        self.stencil_ptr.push(0);
        for s in &self.states {
            for (k, w) in grid.stencil_with(s, policy) {
                self.stencil_idx.push(k);
                self.stencil_w.push(w);
            }
            self.stencil_ptr.push(self.stencil_idx.len());
        }
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    /// Interpolated value of `values` at next-state node `j`.
    #[inline]
    pub fn eval(&self, j: usize, values: &[f64]) -> f64 {
        let (a, b) = (self.stencil_ptr[j], self.stencil_ptr[j + 1]);
        let mut s = 0.0;
        for t in a..b {
            s += self.stencil_w[t] * values[self.stencil_idx[t]];
        }
        s
    }

    /// Stencil entries of node `j`.
    pub fn stencil(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.stencil_ptr[j], self.stencil_ptr[j + 1]);
        (a..b).map(move |t| (self.stencil_idx[t], self.stencil_w[t]))
    }

    /// `log Σ_j w_j exp(scale·f(x'_j) + log_tilt_j)`.
    pub fn log_expect_exp(&self, values: &[f64], scale: f64) -> f64 {
        let mut acc = LogSumExp::new();
        for j in 0..self.len() {
            acc.push(self.log_weights[j] + scale * self.eval(j, values) + self.log_tilts[j]);
        }
        acc.value()
    }
}

/// Discretized kernel of a model on a grid, built for one utility tilt.
#[derive(Debug, Clone)]
pub struct DiscreteTransition {
    grid: StateGrid,
    tilt: f64,
    truncation: Option<Vec<(f64, f64)>>,
    rows: Arc<Vec<KernelRow>>,
}

fn check_grid(kernel: &dyn ValueKernel, grid: &StateGrid) -> Result<()> {
    if kernel.value_dim() != grid.dim() {
        return Err(Error::invalid(format!(
            "grid has {} dimensions, value state has {}",
            grid.dim(),
            kernel.value_dim()
        )));
    }
    Ok(())
}

impl DiscreteTransition {
    /// Untruncated kernel with quadrature `quad` at every grid node.
    pub fn build(kernel: &dyn ValueKernel, grid: &StateGrid, tilt: f64, quad: &QuadratureSpec) -> Result<Self> {
        check_grid(kernel, grid)?;
        quad.validate()?;
        let rows: Vec<KernelRow> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let nodes = kernel.value_nodes(&grid.node(k), tilt, quad)?;
                Ok(KernelRow::from_nodes(grid, nodes, 0.0, grid.policy))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            grid: grid.clone(),
            tilt,
            truncation: None,
            rows: Arc::new(rows),
        })
    }

    /// Kernel truncated to the box `bounds` and renormalized by Q(C|x).
    pub fn build_truncated(
        kernel: &dyn ValueKernel,
        grid: &StateGrid,
        tilt: f64,
        bounds: &[(f64, f64)],
        quad: &QuadratureSpec,
    ) -> Result<Self> {
        check_grid(kernel, grid)?;
        if quad.n == 0 {
            return Err(Error::invalid("quadrature needs at least one node"));
        }
        let rows: Vec<KernelRow> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let t = kernel.truncated_value_nodes(&grid.node(k), tilt, bounds, quad)?;
                Ok(KernelRow::from_nodes(grid, t.nodes, t.log_mass, grid.policy))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            grid: grid.clone(),
            tilt,
            truncation: Some(bounds.to_vec()),
            rows: Arc::new(rows),
        })
    }

    /// Same nodes with stencils recomputed under `policy`.
    pub fn restencil(&self, policy: Extrapolation) -> Self {
        let grid = self.grid.with_policy(policy);
        let rows: Vec<KernelRow> = self
            .rows
            .par_iter()
            .map(|r| {
                let mut r = r.clone();
                r.set_stencils(&grid, policy);
                r
            })
            .collect();
        Self {
            grid,
            tilt: self.tilt,
            truncation: self.truncation.clone(),
            rows: Arc::new(rows),
        }
    }

    pub fn grid(&self) -> &StateGrid {
        &self.grid
    }

    pub fn tilt(&self) -> f64 {
        self.tilt
    }

    pub fn truncation(&self) -> Option<&[(f64, f64)]> {
        self.truncation.as_deref()
    }

    pub fn rows(&self) -> &[KernelRow] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &KernelRow {
        &self.rows[i]
    }

    /// log Q(C|x) at every node (zeros when untruncated).
    pub fn log_masses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.log_mass).collect()
    }

    /// Drops the utility tilt, leaving the plain conditional law.
    pub(crate) fn zero_tilts(&mut self) {
        let rows: Vec<KernelRow> = self
            .rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.log_tilts.iter_mut().for_each(|t| *t = 0.0);
                r
            })
            .collect();
        self.rows = Arc::new(rows);
        self.tilt = 0.0;
    }

    pub(crate) fn check_function(&self, f: &GridFunction) -> Result<()> {
        if f.grid.dim() != self.grid.dim() || f.values.len() != self.grid.len() {
            return Err(Error::invalid("function grid does not match the operator grid"));
        }
        if f.diverged {
            return Err(Error::Divergence("input function carries the divergence flag".into()));
        }
        Ok(())
    }

    /// `log E[exp(scale·f(X') + t·u) | x]` at every node.
    pub fn log_expect_exp(&self, f: &GridFunction, scale: f64) -> Result<Vec<f64>> {
        self.check_function(f)?;
        Ok(self
            .rows
            .par_iter()
            .map(|r| r.log_expect_exp(&f.values, scale))
            .collect())
    }

    /// `E[f(X') + coef·u | x]` at every node.
    pub fn expect_linear(&self, f: &GridFunction, coef: f64) -> Result<Vec<f64>> {
        self.check_function(f)?;
        Ok(self
            .rows
            .par_iter()
            .map(|r| {
                let mut s = 0.0;
                let mut mass = 0.0;
                for j in 0..r.len() {
                    let w = r.log_weights[j].exp();
                    mass += w;
                    s += w * (r.eval(j, &f.values) + coef * r.utility_means[j]);
                }
                s / mass
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::GaussianVar1Model;

    #[test]
    fn rows_are_probability_measures() {
        let m = GaussianVar1Model::scalar(0.9, 0.0, 0.01, 1.0, 0.0).unwrap();
        let g = StateGrid::build(&[(-0.9, 0.9)], &[21], Extrapolation::Linear).unwrap();
        let t = DiscreteTransition::build(&m, &g, 0.0, &QuadratureSpec::default()).unwrap();
        let zero = GridFunction::constant(&g, 0.0);
        for v in t.log_expect_exp(&zero, 1.0).unwrap() {
            assert!(v.abs() < 1e-13);
        }
        let lin = GridFunction::from_fn(&g, |x| x[0]);
        let mean = t.expect_linear(&lin, 0.0).unwrap();
        for (k, v) in mean.iter().enumerate() {
            assert!((v - 0.9 * g.node(k)[0]).abs() < 1e-13);
        }
    }
}

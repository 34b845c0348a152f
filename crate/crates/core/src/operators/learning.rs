//! Learning operator on the belief statistic:
//! `Tf(ξ̂) = β log E^Π[ E^Q[exp(r(f(Ξ) + α u))]^{1/r} ]` with `r = θ/ϑ`, and
//! `β log E^Π[exp(E^Q[f(Ξ) + α u])]` in the `ϑ = ∞` limit.

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::function_space::{Extrapolation, GridFunction, StateGrid};
use crate::linalg::psd_factor;
use crate::models::kernel::gaussian_nodes;
use crate::models::{kalman_steady_state, GaussianStateSpaceModel, HiddenRegimeModel, Model, SteadyFilter};
use crate::numerics::{logsumexp, LogSumExp};
use crate::preferences::LearningSpec;
use crate::quadrature::{QuadratureScheme, QuadratureSpec};

/// Tolerance of the Riccati solve used when the operator builds its own
/// steady-state filter.
pub const STEADY_FILTER_TOL: f64 = 1e-13;

/// Default number of belief-grid nodes per simplex coordinate.
pub const DEFAULT_BELIEF_NODES: usize = 101;

/// Outer layer: hidden states with posterior weights. Inner layer: next
/// observations with their updated belief stencils.
#[derive(Debug, Clone)]
struct NestedRow {
    outer_log_weights: Vec<f64>,
    inner_ptr: Vec<usize>,
    inner_log_weights: Vec<f64>,
    utilities: Vec<f64>,
    stencils: Vec<Vec<(usize, f64)>>,
}

impl NestedRow {
    fn eval(&self, j: usize, values: &[f64]) -> f64 {
        self.stencils[j].iter().map(|(k, w)| w * values[*k]).sum()
    }

    fn apply(&self, values: &[f64], beta: f64, alpha: f64, ratio: f64) -> f64 {
        let mut outer = LogSumExp::new();
        for (k, lpi) in self.outer_log_weights.iter().enumerate() {
            let range = self.inner_ptr[k]..self.inner_ptr[k + 1];
            let inner = if ratio > 0.0 {
                let mut acc = LogSumExp::new();
                for j in range {
                    acc.push(self.inner_log_weights[j] + ratio * (self.eval(j, values) + alpha * self.utilities[j]));
                }
                acc.value() / ratio
            } else {
                let lws = &self.inner_log_weights[range.clone()];
                let norm = logsumexp(lws);
                range
                    .map(|j| {
                        (self.inner_log_weights[j] - norm).exp() * (self.eval(j, values) + alpha * self.utilities[j])
                    })
                    .sum()
            };
            outer.push(lpi + inner);
        }
        beta * outer.value()
    }
}

/// Which filter generates the belief statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeliefKind {
    Regime,
    Kalman,
}

/// The learning operator discretized on a belief grid.
#[derive(Debug, Clone)]
pub struct LearningOperator {
    spec: LearningSpec,
    grid: StateGrid,
    kind: BeliefKind,
    rows: Arc<Vec<NestedRow>>,
}

/// Grid on the first `N−1` simplex coordinates, `nodes` points on `[0, 1]`
/// each. One regime gives a zero-dimensional grid.
pub fn belief_grid(regimes: usize, nodes: usize) -> Result<StateGrid> {
    if regimes == 0 {
        return Err(Error::invalid("at least one regime is required"));
    }
    let dims = regimes - 1;
    StateGrid::build(&vec![(0.0, 1.0); dims], &vec![nodes; dims], Extrapolation::Clamp)
}

/// Belief vector from grid coordinates. Points outside the simplex are
/// projected by clipping and rescaling.
pub fn belief_from_coords(coords: &[f64]) -> Vec<f64> {
    let mut b: Vec<f64> = coords.iter().map(|c| c.clamp(0.0, 1.0)).collect();
    let s: f64 = b.iter().sum();
    if s > 1.0 {
        b.iter_mut().for_each(|v| *v /= s);
        b.push(0.0);
    } else {
        b.push(1.0 - s);
    }
    b
}

impl LearningOperator {
    /// Operator for a hidden-regime model on `grid` (coordinates are the
    /// first `N−1` beliefs).
    pub fn regime(
        spec: LearningSpec,
        model: &HiddenRegimeModel,
        grid: &StateGrid,
        quad: &QuadratureSpec,
    ) -> Result<Self> {
        spec.validate()?;
        use crate::models::MarkovModel;
        model.validate()?;
        quad.validate()?;
        let n = model.regimes();
        if grid.dim() + 1 != n {
            return Err(Error::invalid(format!(
                "belief grid has {} dimensions, {n} regimes need {}",
                grid.dim(),
                n - 1
            )));
        }
        if quad.scheme == QuadratureScheme::MonteCarlo {
            return Err(Error::Unsupported(
                "the regime learning kernel uses Gauss-Hermite nodes".into(),
            ));
        }
        let rule = crate::quadrature::gauss_hermite(quad.n);
        let rows: Vec<NestedRow> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let belief = belief_from_coords(&grid.node(i));
                let log_belief: Vec<f64> = belief.iter().map(|b| b.ln()).collect();
                let mut row = NestedRow {
                    outer_log_weights: Vec::new(),
                    inner_ptr: vec![0],
                    inner_log_weights: Vec::new(),
                    utilities: Vec::new(),
                    stencils: Vec::new(),
                };
                for k in 0..n {
                    if belief[k] <= 0.0 {
                        continue;
                    }
                    row.outer_log_weights.push(log_belief[k]);
                    let sd = model.variances[k].sqrt();
                    for (z, w) in rule.nodes.iter().zip(&rule.weights) {
                        let phi = model.means[k] + sd * z;
                        let post_log: Vec<f64> = model
                            .log_likelihoods(phi)
                            .iter()
                            .zip(&log_belief)
                            .map(|(a, b)| a + b)
                            .collect();
                        let norm = logsumexp(&post_log);
                        let post = DVector::from_iterator(n, post_log.iter().map(|l| (l - norm).exp()));
                        let next = &model.lambda * post;
                        let coords: Vec<f64> = next.iter().take(n - 1).copied().collect();
                        row.inner_log_weights.push(w.ln());
                        row.utilities.push(phi);
                        row.stencils.push(grid.stencil(&coords));
                    }
                    row.inner_ptr.push(row.inner_log_weights.len());
                }
                row
            })
            .collect();
        Ok(Self {
            spec,
            grid: grid.clone(),
            kind: BeliefKind::Regime,
            rows: Arc::new(rows),
        })
    }

    /// Operator for a linear-Gaussian state space under the steady-state
    /// Kalman filter; `grid` lives on the posterior mean `ξ̂`.
    pub fn kalman(
        spec: LearningSpec,
        model: &GaussianStateSpaceModel,
        filter: &SteadyFilter,
        grid: &StateGrid,
        quad: &QuadratureSpec,
    ) -> Result<Self> {
        spec.validate()?;
        quad.validate()?;
        if grid.dim() != model.hidden_dim() {
            return Err(Error::invalid("belief grid must match the hidden-state dimension"));
        }
        let outer_factor = psd_factor(&filter.sigma_bar)?;
        let inner_factor = psd_factor(&model.sigma_u)?;
        let loading = model.loading();
        let rows: Vec<NestedRow> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let xi_hat = grid.node(i);
                let xi_hat_v = DVector::from_column_slice(&xi_hat);
                let mut row = NestedRow {
                    outer_log_weights: Vec::new(),
                    inner_ptr: vec![0],
                    inner_log_weights: Vec::new(),
                    utilities: Vec::new(),
                    stencils: Vec::new(),
                };
                for (xi, lw_outer) in gaussian_nodes(&xi_hat_v, &outer_factor, quad) {
                    row.outer_log_weights.push(lw_outer);
                    let mean = &model.a * DVector::from_column_slice(&xi);
                    for (phi, lw) in gaussian_nodes(&mean, &inner_factor, quad) {
                        let next = filter.update(model, &xi_hat, &phi);
                        row.inner_log_weights.push(lw);
                        row.utilities.push(loading.dot(&DVector::from_column_slice(&phi)));
                        row.stencils.push(grid.stencil(next.as_slice()));
                    }
                    row.inner_ptr.push(row.inner_log_weights.len());
                }
                row
            })
            .collect();
        Ok(Self {
            spec,
            grid: grid.clone(),
            kind: BeliefKind::Kalman,
            rows: Arc::new(rows),
        })
    }

    /// Dispatches on the model; the Kalman case solves for the steady filter.
    pub fn new(spec: LearningSpec, model: &Model, grid: &StateGrid, quad: &QuadratureSpec) -> Result<Self> {
        match model {
            Model::HiddenRegime(m) => Self::regime(spec, m, grid, quad),
            Model::GaussianStateSpace(m) => {
                let filter = kalman_steady_state(m, STEADY_FILTER_TOL)?;
                Self::kalman(spec, m, &filter, grid, quad)
            }
            other => Err(Error::Unsupported(format!(
                "the learning operator needs a hidden-state model, got {}",
                other.tag()
            ))),
        }
    }

    /// Same kernel with different preference parameters.
    pub fn with_spec(&self, spec: LearningSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, ..self.clone() })
    }

    pub fn spec(&self) -> &LearningSpec {
        &self.spec
    }

    pub fn grid(&self) -> &StateGrid {
        &self.grid
    }

    pub fn kind(&self) -> BeliefKind {
        self.kind
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.values.len() != self.grid.len() || f.grid.dim() != self.grid.dim() {
            return Err(Error::invalid("function grid does not match the belief grid"));
        }
        if f.diverged {
            return Err(Error::Divergence("input function carries the divergence flag".into()));
        }
        let (beta, alpha, ratio) = (self.spec.beta, self.spec.alpha(), self.spec.ratio());
        let values: Vec<f64> = self
            .rows
            .par_iter()
            .map(|r| r.apply(&f.values, beta, alpha, ratio))
            .collect();
        Ok(f.with_values(values))
    }

    /// `sup |Tf − f|`.
    pub fn residual(&self, f: &GridFunction) -> Result<f64> {
        Ok(self.apply(f)?.sup_diff(f))
    }
}

/// One application of the learning operator on `f`'s grid.
pub fn apply_learning(
    spec: &LearningSpec,
    model: &Model,
    f: &GridFunction,
    quad: &QuadratureSpec,
) -> Result<GridFunction> {
    LearningOperator::new(*spec, model, &f.grid, quad)?.apply(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn two_regime() -> HiddenRegimeModel {
        HiddenRegimeModel::new(
            DMatrix::from_row_slice(2, 2, &[0.97, 0.1, 0.03, 0.9]),
            vec![0.02, -0.01],
            vec![0.0004, 0.0004],
        )
        .unwrap()
    }

    #[test]
    fn belief_projection() {
        assert_eq!(belief_from_coords(&[0.25]), vec![0.25, 0.75]);
        assert_eq!(belief_from_coords(&[]), vec![1.0]);
        let b = belief_from_coords(&[0.8, 0.6]);
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shift_identity_and_finiteness() {
        let m = two_regime();
        let g = belief_grid(2, 21).unwrap();
        let spec = LearningSpec::new(0.95, 1.0, Some(2.0)).unwrap();
        let op = LearningOperator::regime(spec, &m, &g, &QuadratureSpec::default()).unwrap();
        let f = GridFunction::from_fn(&g, |x| x[0]);
        let a = op.apply(&f).unwrap();
        let b = op.apply(&f.map(|v| v + 1.0)).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((y - x - 0.95).abs() < 1e-12);
        }
    }

    #[test]
    fn kalman_operator_builds() {
        let m = GaussianStateSpaceModel::scalar(1.0, 0.5, 1.0, 1.0).unwrap();
        let g = StateGrid::build(&[(-3.0, 3.0)], &[11], Extrapolation::Linear).unwrap();
        let spec = LearningSpec::new(0.95, 100.0, None).unwrap();
        let out = apply_learning(
            &spec,
            &Model::GaussianStateSpace(m),
            &GridFunction::constant(&g, 0.0),
            &QuadratureSpec::gauss_hermite(11),
        )
        .unwrap();
        assert!(out.values.iter().all(|v| v.is_finite()));
    }
}

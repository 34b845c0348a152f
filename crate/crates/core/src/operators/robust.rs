//! Risk-sensitive operator `Tf = β log E[exp(f(X') + α u) | x]` and its
//! truncated version.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::function_space::{GridFunction, StateGrid};
use crate::models::{Model, ValueKernel};
use crate::operators::distorted::DistortedKernel;
use crate::operators::transition::DiscreteTransition;
use crate::preferences::RobustSpec;
use crate::quadrature::QuadratureSpec;

/// The robust operator discretized on a grid. Kernels are built once and can
/// be applied repeatedly.
#[derive(Debug, Clone)]
pub struct RobustOperator {
    spec: RobustSpec,
    transition: DiscreteTransition,
}

/// Pointwise output of one application, for reports.
#[derive(Debug, Clone, Serialize)]
pub struct Application {
    pub values: Vec<f64>,
    pub diverged: bool,
}

impl RobustOperator {
    pub fn new(spec: RobustSpec, model: &Model, grid: &StateGrid, quad: &QuadratureSpec) -> Result<Self> {
        Self::from_kernel(spec, model.value_kernel()?, grid, quad)
    }

    pub fn from_kernel(
        spec: RobustSpec,
        kernel: &dyn ValueKernel,
        grid: &StateGrid,
        quad: &QuadratureSpec,
    ) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            transition: DiscreteTransition::build(kernel, grid, spec.alpha, quad)?,
        })
    }

    /// `T_C`: next states restricted to the box `bounds`, kernel renormalized
    /// by `Q(C|x)`.
    pub fn truncated(
        spec: RobustSpec,
        model: &Model,
        bounds: &[(f64, f64)],
        grid: &StateGrid,
        quad: &QuadratureSpec,
    ) -> Result<Self> {
        Self::truncated_from_kernel(spec, model.value_kernel()?, bounds, grid, quad)
    }

    pub fn truncated_from_kernel(
        spec: RobustSpec,
        kernel: &dyn ValueKernel,
        bounds: &[(f64, f64)],
        grid: &StateGrid,
        quad: &QuadratureSpec,
    ) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            transition: DiscreteTransition::build_truncated(kernel, grid, spec.alpha, bounds, quad)?,
        })
    }

    pub fn spec(&self) -> &RobustSpec {
        &self.spec
    }

    pub fn grid(&self) -> &StateGrid {
        self.transition.grid()
    }

    pub fn transition(&self) -> &DiscreteTransition {
        &self.transition
    }

    pub fn is_truncated(&self) -> bool {
        self.transition.truncation().is_some()
    }

    /// log Q(C|x) at the grid nodes (zeros when untruncated).
    pub fn log_masses(&self) -> Vec<f64> {
        self.transition.log_masses()
    }

    /// Applies the operator. Overflow shows up as the divergence flag on the
    /// returned function rather than an error.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        let beta = self.spec.beta;
        let logs = self.transition.log_expect_exp(f, 1.0)?;
        Ok(f.with_values(logs.into_iter().map(|l| beta * l).collect()))
    }

    /// Jensen lower bound `β E[f(X') + α u | x]`.
    pub fn jensen_lower(&self, f: &GridFunction) -> Result<GridFunction> {
        let beta = self.spec.beta;
        let m = self.transition.expect_linear(f, self.spec.alpha)?;
        Ok(f.with_values(m.into_iter().map(|v| beta * v).collect()))
    }

    /// Worst-case change of measure `m_v` at `v`.
    pub fn worst_case(&self, v: &GridFunction) -> Result<DistortedKernel> {
        DistortedKernel::tilted(&self.transition, self.spec.beta, v, 1.0)
    }

    /// `sup |Tf − f|` over the grid.
    pub fn residual(&self, f: &GridFunction) -> Result<f64> {
        let tf = self.apply(f)?;
        Ok(tf
            .values
            .par_iter()
            .zip(&f.values)
            .map(|(a, b)| (a - b).abs())
            .reduce(|| 0.0, f64::max))
    }
}

/// One application of the robust operator on `f`'s grid.
pub fn apply_robust(spec: &RobustSpec, model: &Model, f: &GridFunction, quad: &QuadratureSpec) -> Result<GridFunction> {
    RobustOperator::new(*spec, model, &f.grid, quad)?.apply(f)
}

/// One application of the truncated operator `T_C` on `f`'s grid.
pub fn apply_truncated(
    spec: &RobustSpec,
    model: &Model,
    bounds: &[(f64, f64)],
    f: &GridFunction,
    quad: &QuadratureSpec,
) -> Result<GridFunction> {
    RobustOperator::truncated(*spec, model, bounds, &f.grid, quad)?.apply(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_space::Extrapolation;
    use crate::models::GaussianVar1Model;

    fn setup() -> (Model, StateGrid) {
        let m = Model::GaussianVar1(GaussianVar1Model::scalar(0.9, 0.0, 0.01, 1.0, 0.0).unwrap());
        let sd = (0.01f64 / 0.19).sqrt();
        let g = StateGrid::build(&[(-4.0 * sd, 4.0 * sd)], &[41], Extrapolation::Linear).unwrap();
        (m, g)
    }

    #[test]
    fn zero_alpha_zero_function() {
        let (m, g) = setup();
        let spec = RobustSpec::with_alpha(0.95, 0.0).unwrap();
        let out = apply_robust(&spec, &m, &GridFunction::constant(&g, 0.0), &QuadratureSpec::default()).unwrap();
        assert!(out.sup_norm() < 1e-14);
    }

    #[test]
    fn shift_identity() {
        let (m, g) = setup();
        let spec = RobustSpec::with_alpha(0.95, -1.0).unwrap();
        let op = RobustOperator::new(spec, &m, &g, &QuadratureSpec::default()).unwrap();
        let f = GridFunction::from_fn(&g, |x| (3.0 * x[0]).sin());
        let a = op.apply(&f).unwrap();
        let b = op.apply(&f.map(|v| v + 2.5)).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((y - x - 0.95 * 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn wide_truncation_matches_untruncated() {
        let (m, g) = setup();
        let spec = RobustSpec::with_alpha(0.95, -1.0).unwrap();
        let f = GridFunction::from_fn(&g, |x| -6.0 * x[0]);
        let full = apply_robust(&spec, &m, &f, &QuadratureSpec::default()).unwrap();
        let sd = (0.01f64 / 0.19).sqrt();
        let wide = StateGrid::build(&[(-10.0 * sd, 10.0 * sd)], &[101], Extrapolation::Linear).unwrap();
        let fw = GridFunction::from_fn(&wide, |x| -6.0 * x[0]);
        let tr = apply_truncated(&spec, &m, &wide.bounds(), &fw, &QuadratureSpec::default()).unwrap();
        for x in [-0.1, 0.0, 0.1] {
            assert!((full.eval(&[x]).unwrap() - tr.eval(&[x]).unwrap()).abs() < 1e-6);
        }
    }
}

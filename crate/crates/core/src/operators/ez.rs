//! Epstein–Zin recursion through the Perron–Frobenius eigenpair of the
//! kernel `f ↦ E[f(X') exp((1−γ) g(x, X'))]`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function_space::{GridFunction, StateGrid};
use crate::linalg::inverse;
use crate::models::{GaussianVar1Model, Model, ValueKernel};
use crate::numerics::{log_add_exp, logsumexp, sup_diff};
use crate::operators::distorted::DistortedKernel;
use crate::operators::transition::DiscreteTransition;
use crate::preferences::EzSpec;
use crate::quadrature::QuadratureSpec;

/// Iteration cap and tolerance for the eigenfunction power iteration.
pub const EIGEN_MAX_ITER: usize = 20_000;
pub const EIGEN_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenMethod {
    ClosedForm,
    PowerIteration,
}

/// `(ι, λ)` with `λ ι(x) = E[ι(X') exp((1−γ) g(x, X'))]`. The function is
/// stored in logs.
#[derive(Debug, Clone, Serialize)]
pub struct EzEigenpair {
    pub log_iota: GridFunction,
    pub lambda: f64,
    pub gamma: f64,
    pub method: EigenMethod,
    /// How the scale of `ι` was fixed.
    pub normalization: String,
    /// `log ι(x) = coefficient'x` for the closed form.
    pub coefficient: Option<Vec<f64>>,
    pub iterations: usize,
    /// Sup-norm of `log λ + log ι − log K ι` over the grid.
    pub log_residual: f64,
}

impl EzEigenpair {
    pub fn iota(&self) -> GridFunction {
        self.log_iota.map(f64::exp)
    }

    pub fn log_lambda(&self) -> f64 {
        self.lambda.ln()
    }

    /// Same pair rescaled so that `ι(node k) = 1`.
    pub fn normalized_at(&self, k: usize) -> Self {
        let shift = self.log_iota.values[k];
        Self {
            log_iota: self.log_iota.map(|v| v - shift),
            normalization: format!("iota(node {k}) = 1"),
            ..self.clone()
        }
    }
}

/// Closed-form pair for a Gaussian VAR(1) with `g = λ0'x + λ1'x'`:
/// `log ι = b'x` with `b = (1−γ)(I−A')⁻¹(λ0 + A'λ1)` and
/// `log λ = c'ν + ½c'Σc`, `c = b + (1−γ)λ1`.
pub fn ez_eigenpair_closed_form(model: &GaussianVar1Model, gamma: f64, grid: &StateGrid) -> Result<EzEigenpair> {
    if grid.dim() != model.dim() {
        return Err(Error::invalid("grid dimension differs from the VAR dimension"));
    }
    let d = model.dim();
    let k = 1.0 - gamma;
    let (l0, l1) = (model.lambda0(), model.lambda1());
    let i_at = nalgebra::DMatrix::<f64>::identity(d, d) - model.a.transpose();
    let b = inverse(&i_at)? * (&l0 + model.a.transpose() * &l1) * k;
    let c = &b + &l1 * k;
    let log_lambda = c.dot(&model.nu) + 0.5 * (c.transpose() * &model.sigma * &c)[(0, 0)];
    let coef = b.as_slice().to_vec();
    let log_iota = GridFunction::from_fn(grid, |x| coef.iter().zip(x).map(|(a, v)| a * v).sum());
    Ok(EzEigenpair {
        log_iota,
        lambda: log_lambda.exp(),
        gamma,
        method: EigenMethod::ClosedForm,
        normalization: "iota(0) = 1".into(),
        coefficient: Some(coef),
        iterations: 0,
        log_residual: 0.0,
    })
}

/// Power iteration in logs: `L ← log K e^L`, renormalized at `reference`.
pub fn ez_eigenpair_power(
    kernel: &dyn ValueKernel,
    gamma: f64,
    grid: &StateGrid,
    reference: usize,
    quad: &QuadratureSpec,
) -> Result<EzEigenpair> {
    let transition = DiscreteTransition::build(kernel, grid, 1.0 - gamma, quad)?;
    power_iterate(&transition, gamma, reference)
}

fn power_iterate(transition: &DiscreteTransition, gamma: f64, reference: usize) -> Result<EzEigenpair> {
    let grid = transition.grid();
    if reference >= grid.len() {
        return Err(Error::invalid("reference node is outside the grid"));
    }
    let mut l = GridFunction::constant(grid, 0.0);
    let mut change = f64::INFINITY;
    for it in 1..=EIGEN_MAX_ITER {
        let next = transition.log_expect_exp(&l, 1.0)?;
        let log_lambda = next[reference];
        if !log_lambda.is_finite() || next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence("eigenfunction iteration overflowed".into()));
        }
        let next = l.with_values(next.into_iter().map(|v| v - log_lambda).collect());
        change = next.sup_diff(&l);
        l = next;
        if change < EIGEN_TOL {
            let mut pair = EzEigenpair {
                log_iota: l,
                lambda: log_lambda.exp(),
                gamma,
                method: EigenMethod::PowerIteration,
                normalization: format!("iota(node {reference}) = 1"),
                coefficient: None,
                iterations: it,
                log_residual: 0.0,
            };
            pair.log_residual = log_eigen_residual(&pair, transition)?;
            return Ok(pair);
        }
    }
    Err(Error::NonConvergence {
        context: "eigenfunction power iteration".into(),
        iterations: EIGEN_MAX_ITER,
        last_change: change,
    })
}

/// Grid node closest to `point`.
pub fn nearest_node(grid: &StateGrid, point: &[f64]) -> usize {
    (0..grid.len())
        .map(|k| {
            let d: f64 = grid.node(k).iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum();
            (k, d)
        })
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc })
        .0
}

/// Eigenpair by the requested method. The power iteration is normalized at
/// the node nearest the stationary mean of the value state.
pub fn ez_eigenpair(
    model: &Model,
    gamma: f64,
    grid: &StateGrid,
    method: EigenMethod,
    quad: &QuadratureSpec,
) -> Result<EzEigenpair> {
    match method {
        EigenMethod::ClosedForm => match model {
            Model::GaussianVar1(m) => ez_eigenpair_closed_form(m, gamma, grid),
            _ => Err(Error::Unsupported(
                "closed-form eigenpairs exist for the Gaussian VAR only".into(),
            )),
        },
        EigenMethod::PowerIteration => {
            let kernel = model.value_kernel()?;
            let law = kernel.value_law()?;
            let mean: Vec<f64> = law.mean.iter().copied().collect();
            ez_eigenpair_power(kernel, gamma, grid, nearest_node(grid, &mean), quad)
        }
    }
}

/// `sup |log λ + log ι(x) − log E[ι(X') e^{(1−γ)g}]|` over grid nodes.
pub fn log_eigen_residual(pair: &EzEigenpair, transition: &DiscreteTransition) -> Result<f64> {
    let k = transition.log_expect_exp(&pair.log_iota, 1.0)?;
    let lhs: Vec<f64> = pair.log_iota.values.iter().map(|v| v + pair.log_lambda()).collect();
    Ok(sup_diff(&lhs, &k))
}

/// `sup |λ ι(x) − E[ι(X') e^{(1−γ)g}]|` over grid nodes, in levels.
pub fn eigen_residual(pair: &EzEigenpair, transition: &DiscreteTransition) -> Result<f64> {
    let k = transition.log_expect_exp(&pair.log_iota, 1.0)?;
    Ok(pair
        .log_iota
        .values
        .iter()
        .zip(&k)
        .map(|(l, kv)| (pair.lambda * l.exp() - kv.exp()).abs())
        .fold(0.0, f64::max))
}

/// Value and verdict of `βλ^{1/κ} < 1`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EigenvalueCondition {
    pub value: f64,
    /// `1 − βλ^{1/κ}`.
    pub margin: f64,
    pub pass: bool,
}

pub fn eigenvalue_condition(beta: f64, lambda: f64, kappa: f64) -> Result<EigenvalueCondition> {
    if !(lambda > 0.0) || kappa == 0.0 || !kappa.is_finite() {
        return Err(Error::invalid("lambda must be positive and kappa nonzero"));
    }
    let value = beta * (lambda.ln() / kappa).exp();
    Ok(EigenvalueCondition {
        value,
        margin: 1.0 - value,
        pass: value < 1.0,
    })
}

/// `Tf = log((1−β) ι^{−1/κ} + β λ^{1/κ} Ẽ[e^{κf}]^{1/κ})` on a grid.
#[derive(Debug, Clone)]
pub struct EzOperator {
    spec: EzSpec,
    pair: EzEigenpair,
    transition: DiscreteTransition,
    distorted: DistortedKernel,
}

impl EzOperator {
    pub fn new(spec: EzSpec, pair: EzEigenpair, model: &Model, quad: &QuadratureSpec) -> Result<Self> {
        Self::from_kernel(spec, pair, model.value_kernel()?, quad)
    }

    pub fn from_kernel(
        spec: EzSpec,
        pair: EzEigenpair,
        kernel: &dyn ValueKernel,
        quad: &QuadratureSpec,
    ) -> Result<Self> {
        spec.validate()?;
        if (pair.gamma - spec.gamma).abs() > 0.0 {
            return Err(Error::invalid("eigenpair was computed for a different gamma"));
        }
        let transition = DiscreteTransition::build(kernel, &pair.log_iota.grid, 1.0 - spec.gamma, quad)?;
        let distorted = DistortedKernel::tilted(&transition, 1.0, &pair.log_iota, 1.0)?;
        Ok(Self {
            spec,
            pair,
            transition,
            distorted,
        })
    }

    pub fn spec(&self) -> &EzSpec {
        &self.spec
    }

    pub fn pair(&self) -> &EzEigenpair {
        &self.pair
    }

    pub fn grid(&self) -> &StateGrid {
        self.transition.grid()
    }

    /// The discretized kernel with tilt `1−γ`.
    pub fn transition(&self) -> &DiscreteTransition {
        &self.transition
    }

    /// `Ẽ` as a kernel (with unit discount).
    pub fn distorted(&self) -> &DistortedKernel {
        &self.distorted
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        let kappa = self.spec.kappa();
        let beta = self.spec.beta;
        let inner = self.distorted.log_expect_exp(f, kappa)?;
        let log_lambda = self.pair.log_lambda();
        let values: Vec<f64> = inner
            .par_iter()
            .zip(&self.pair.log_iota.values)
            .map(|(le, li)| {
                let a = (1.0 - beta).ln() - li / kappa;
                let b = beta.ln() + log_lambda / kappa + le / kappa;
                log_add_exp(a, b)
            })
            .collect();
        Ok(f.with_values(values))
    }

    /// `log(1−β) − κ⁻¹ log ι`, a subsolution.
    pub fn lower_envelope(&self) -> GridFunction {
        let kappa = self.spec.kappa();
        let c = (1.0 - self.spec.beta).ln();
        self.pair.log_iota.map(|li| c - li / kappa)
    }

    /// Solution of the original recursion from a fixed point of `T`:
    /// `v = f + κ⁻¹ log ι`.
    pub fn recover(&self, f: &GridFunction) -> GridFunction {
        let kappa = self.spec.kappa();
        f.zip_with(&self.pair.log_iota, |a, li| a + li / kappa)
    }

    /// Pointwise residual of
    /// `v = log((1−β) + β E[e^{κ v' + (1−γ) g}]^{1/κ})` on the grid.
    pub fn recursion_residual(&self, v: &GridFunction) -> Result<f64> {
        let kappa = self.spec.kappa();
        let beta = self.spec.beta;
        let logs = self.transition.log_expect_exp(v, kappa)?;
        let rhs: Vec<f64> = logs
            .iter()
            .map(|l| log_add_exp((1.0 - beta).ln(), beta.ln() + l / kappa))
            .collect();
        Ok(sup_diff(&rhs, &v.values))
    }

    pub fn residual(&self, f: &GridFunction) -> Result<f64> {
        Ok(self.apply(f)?.sup_diff(f))
    }
}

/// One application of the Epstein–Zin operator on the eigenpair's grid.
pub fn apply_ez(
    spec: &EzSpec,
    pair: &EzEigenpair,
    model: &Model,
    f: &GridFunction,
    quad: &QuadratureSpec,
) -> Result<GridFunction> {
    EzOperator::new(*spec, pair.clone(), model, quad)?.apply(f)
}

/// Stochastic discount factor
/// `β e^{−ρg} [e^{κ v(x') + (1−γ) g} / E[e^{κ v(X') + (1−γ) g} | x]]^{(ρ−γ)/(1−γ)}`
/// where `v` solves the original recursion.
pub fn sdf_evaluate(
    spec: &EzSpec,
    v: &GridFunction,
    model: &Model,
    x: &[f64],
    x_next: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    spec.validate_parameters()?;
    let kernel = model.value_kernel()?;
    let g = kernel
        .pointwise_utility(x, x_next)
        .ok_or_else(|| Error::Unsupported(format!("{} does not define g(x, x') pointwise", model.tag())))?;
    let log_norm = sdf_log_normalizer(spec, v, kernel, x, quad)?;
    let kappa = spec.kappa();
    let bracket = kappa * v.eval(x_next)? + (1.0 - spec.gamma) * g - log_norm;
    let expo = (spec.rho - spec.gamma) / (1.0 - spec.gamma);
    let out = (spec.beta.ln() - spec.rho * g + expo * bracket).exp();
    if !out.is_finite() {
        return Err(Error::Divergence("stochastic discount factor overflows".into()));
    }
    Ok(out)
}

/// `log E[e^{κ v(X') + (1−γ) g} | x]` by quadrature.
pub fn sdf_log_normalizer(
    spec: &EzSpec,
    v: &GridFunction,
    kernel: &dyn ValueKernel,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    let nodes = kernel.value_nodes(x, 1.0 - spec.gamma, quad)?;
    let mut z = Vec::with_capacity(nodes.len());
    for n in &nodes {
        z.push(n.log_weight + n.log_tilt + spec.kappa() * v.eval(&n.state)?);
    }
    let out = logsumexp(&z);
    if !out.is_finite() {
        return Err(Error::Divergence("SDF normalizer overflows".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_space::Extrapolation;

    fn model() -> GaussianVar1Model {
        GaussianVar1Model::scalar(0.5, 0.0, 0.04, 0.0, 1.0).unwrap()
    }

    fn grid() -> StateGrid {
        let sd = (0.04f64 / 0.75).sqrt();
        StateGrid::build(&[(-4.0 * sd, 4.0 * sd)], &[101], Extrapolation::Linear).unwrap()
    }

    #[test]
    fn closed_form_values() {
        let p = ez_eigenpair_closed_form(&model(), 2.0, &grid()).unwrap();
        assert!((p.coefficient.as_ref().unwrap()[0] + 1.0).abs() < 1e-14);
        assert!((p.lambda - 1.083_287_067_674_958_6).abs() < 1e-12);
        let c = eigenvalue_condition(0.96, p.lambda, -2.0).unwrap();
        assert!((c.value - 0.922_357_861_586_230_3).abs() < 1e-12 && c.pass);
    }

    #[test]
    fn power_iteration_matches_closed_form() {
        let m = Model::GaussianVar1(model());
        let g = grid();
        let q = QuadratureSpec::default();
        let cf = ez_eigenpair(&m, 2.0, &g, EigenMethod::ClosedForm, &q).unwrap();
        let pi = ez_eigenpair(&m, 2.0, &g, EigenMethod::PowerIteration, &q).unwrap();
        assert!((cf.lambda - pi.lambda).abs() < 1e-10);
        let k = 50;
        let a = cf.normalized_at(k);
        let b = pi.normalized_at(k);
        assert!(a.log_iota.sup_diff(&b.log_iota) < 1e-8);
    }

    #[test]
    fn crra_sdf_when_rho_equals_gamma() {
        let m = Model::GaussianVar1(model());
        let spec = EzSpec {
            beta: 0.96,
            gamma: 2.0,
            rho: 2.0,
        };
        let v = GridFunction::from_fn(&grid(), |x| x[0].sin());
        let s = sdf_evaluate(&spec, &v, &m, &[0.05], &[0.1], &QuadratureSpec::default()).unwrap();
        assert!((s - 0.96 * (-0.2f64).exp()).abs() < 1e-14);
    }
}

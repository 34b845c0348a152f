#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use recutil::function_space::{Extrapolation, StateGrid};
use recutil::models::{GaussianVar1Model, HiddenRegimeModel, Model, RegimeSwitchVarModel, SsyVolModel};
use recutil::solvers::DisasterAffineParams;

/// Scalar VAR with `A = 0.9`, `ν = 0`, `Σ = 0.01`, `u = x`.
pub fn robust_gaussian() -> GaussianVar1Model {
    GaussianVar1Model::scalar(0.9, 0.0, 0.01, 1.0, 0.0).unwrap()
}

pub fn stationary_sd(a: f64, sigma2: f64) -> f64 {
    (sigma2 / (1.0 - a * a)).sqrt()
}

/// `[μ − kσ, μ + kσ]` for the scalar robust model.
pub fn robust_bounds(k: f64) -> (f64, f64) {
    let sd = stationary_sd(0.9, 0.01);
    (-k * sd, k * sd)
}

pub fn grid_1d(bounds: (f64, f64), n: usize, policy: Extrapolation) -> StateGrid {
    StateGrid::build(&[bounds], &[n], policy).unwrap()
}

/// Two-regime scalar VAR with regime-dependent drift, persistence and
/// volatility, `u = x`.
pub fn regime_var() -> RegimeSwitchVarModel {
    let v = |x: f64| DVector::from_element(1, x);
    let m = |x: f64| DMatrix::from_element(1, 1, x);
    RegimeSwitchVarModel {
        nu: vec![v(0.01), v(-0.01)],
        a: vec![m(0.9), m(0.8)],
        sigma: vec![m(0.01), m(0.02)],
        lambda: DMatrix::from_row_slice(2, 2, &[0.95, 0.1, 0.05, 0.9]),
        lambda0: v(1.0),
        lambda1: v(0.0),
    }
}

/// Grid over `x ∈ [−1, 1]` and the two regime labels.
pub fn regime_var_grid(n: usize, policy: Extrapolation) -> StateGrid {
    StateGrid::build(&[(-1.0, 1.0), (0.0, 1.0)], &[n, 2], policy).unwrap()
}

/// Scalar VAR with `A = 0.5`, `ν = 0`, `Σ = 0.04`, `g = x'`.
pub fn ez_gaussian() -> GaussianVar1Model {
    GaussianVar1Model::scalar(0.5, 0.0, 0.04, 0.0, 1.0).unwrap()
}

pub fn ez_grid(n: usize) -> StateGrid {
    let sd = stationary_sd(0.5, 0.04);
    grid_1d((-4.0 * sd, 4.0 * sd), n, Extrapolation::Linear)
}

pub fn hidden_regime() -> HiddenRegimeModel {
    HiddenRegimeModel::new(
        DMatrix::from_row_slice(2, 2, &[0.97, 0.1, 0.03, 0.9]),
        vec![0.02, -0.01],
        vec![0.0004, 0.0004],
    )
    .unwrap()
}

pub fn ssy() -> Model {
    Model::SsyVol(SsyVolModel::new(0.0, -0.1, 0.9, 0.1).unwrap())
}

pub fn disaster_params() -> DisasterAffineParams {
    DisasterAffineParams {
        a_const: 0.0,
        b_const: 0.1,
        beta: 0.9,
        c: 0.2,
        phi: 0.8,
        delta: 1.0,
    }
}

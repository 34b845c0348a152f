use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_psd, discrete_lyapunov, inverse, psd_factor, serde_matrix, spectral_radius};
use crate::models::kernel::gaussian_nodes;
use crate::models::law::{gaussian_draw, StationaryLaw};
use crate::models::MarkovModel;
use crate::quadrature::QuadratureSpec;

/// Iteration cap for the Riccati recursion.
pub const RICCATI_MAX_ITER: usize = 100_000;

/// Linear-Gaussian state space `φ' = A ξ + u_φ`, `ξ' = B ξ + u_ξ`, with
/// `u_φ ~ N(0, Σ_u)`, `u_ξ ~ N(0, Σ_w)`. Full state `[φ..., ξ...]`.
///
/// Utility growth is `ℓ'φ'`; `utility_loading` defaults to the first unit
/// vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianStateSpaceModel {
    #[serde(rename = "A", with = "serde_matrix")]
    pub a: DMatrix<f64>,
    #[serde(rename = "B", with = "serde_matrix")]
    pub b: DMatrix<f64>,
    #[serde(rename = "Sigma_u", with = "serde_matrix")]
    pub sigma_u: DMatrix<f64>,
    #[serde(rename = "Sigma_w", with = "serde_matrix")]
    pub sigma_w: DMatrix<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility_loading: Option<Vec<f64>>,
}

impl GaussianStateSpaceModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, sigma_u: DMatrix<f64>, sigma_w: DMatrix<f64>) -> Result<Self> {
        let m = Self {
            a,
            b,
            sigma_u,
            sigma_w,
            utility_loading: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn scalar(a: f64, b: f64, sigma_u: f64, sigma_w: f64) -> Result<Self> {
        let s = |v| DMatrix::from_element(1, 1, v);
        Self::new(s(a), s(b), s(sigma_u), s(sigma_w))
    }

    pub fn obs_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn loading(&self) -> DVector<f64> {
        match &self.utility_loading {
            Some(l) => DVector::from_column_slice(l),
            None => {
                let mut e = DVector::zeros(self.obs_dim());
                e[0] = 1.0;
                e
            }
        }
    }

    fn joint_factor(&self) -> Result<DMatrix<f64>> {
        let (p, k) = (self.obs_dim(), self.hidden_dim());
        let lu = psd_factor(&self.sigma_u)?;
        let lw = psd_factor(&self.sigma_w)?;
        let mut f = DMatrix::zeros(p + k, lu.ncols() + lw.ncols());
        f.view_mut((0, 0), (p, lu.ncols())).copy_from(&lu);
        f.view_mut((p, lu.ncols()), (k, lw.ncols())).copy_from(&lw);
        Ok(f)
    }

    fn joint_mean(&self, x: &[f64]) -> DVector<f64> {
        let p = self.obs_dim();
        let xi = DVector::from_column_slice(&x[p..]);
        let mut m = DVector::zeros(p + self.hidden_dim());
        m.rows_mut(0, p).copy_from(&(&self.a * &xi));
        m.rows_mut(p, self.hidden_dim()).copy_from(&(&self.b * &xi));
        m
    }

    /// One step of the prediction-form Riccati recursion.
    pub fn riccati_step(&self, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let s = &self.a * sigma * self.a.transpose() + &self.sigma_u;
        let s_inv = inverse(&s)?;
        let inner = sigma - sigma * self.a.transpose() * s_inv * &self.a * sigma;
        let next = &self.b * inner * self.b.transpose() + &self.sigma_w;
        Ok((&next + next.transpose()) * 0.5)
    }
}

impl MarkovModel for GaussianStateSpaceModel {
    fn validate(&self) -> Result<()> {
        let (p, k) = (self.obs_dim(), self.hidden_dim());
        if p == 0 || k == 0 {
            return Err(Error::invalid("state-space dimensions must be positive"));
        }
        if self.a.ncols() != k
            || self.b.ncols() != k
            || self.sigma_u.shape() != (p, p)
            || self.sigma_w.shape() != (k, k)
        {
            return Err(Error::invalid("A must be p×k, B k×k, Sigma_u p×p and Sigma_w k×k"));
        }
        check_psd("Sigma_u", &self.sigma_u)?;
        check_psd("Sigma_w", &self.sigma_w)?;
        if self.sigma_u.clone().cholesky().is_none() {
            return Err(Error::invalid("Sigma_u must be invertible"));
        }
        if let Some(l) = &self.utility_loading {
            if l.len() != p {
                return Err(Error::invalid("utility_loading must match the observation dimension"));
            }
        }
        let rho = spectral_radius(&self.b);
        if rho >= 1.0 {
            return Err(Error::NonStationary(format!("spectral radius of B is {rho:.6}")));
        }
        Ok(())
    }

    fn state_dim(&self) -> usize {
        self.obs_dim() + self.hidden_dim()
    }

    fn stationary_law(&self) -> Result<StationaryLaw> {
        self.validate()?;
        let (p, k) = (self.obs_dim(), self.hidden_dim());
        let pxi = discrete_lyapunov(&self.b, &self.sigma_w)?;
        let mut cov = DMatrix::zeros(p + k, p + k);
        let phiphi = &self.a * &pxi * self.a.transpose() + &self.sigma_u;
        let phixi = &self.a * &pxi * self.b.transpose();
        cov.view_mut((0, 0), (p, p)).copy_from(&phiphi);
        cov.view_mut((0, p), (p, k)).copy_from(&phixi);
        cov.view_mut((p, 0), (k, p)).copy_from(&phixi.transpose());
        cov.view_mut((p, p), (k, k)).copy_from(&pxi);
        Ok(StationaryLaw::gaussian(DVector::zeros(p + k), cov))
    }

    fn next_state_nodes(&self, x: &[f64], quad: &QuadratureSpec) -> Result<Vec<(Vec<f64>, f64)>> {
        Ok(gaussian_nodes(&self.joint_mean(x), &self.joint_factor()?, quad))
    }

    fn sample_next(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let f = self.joint_factor().expect("validated covariances");
        gaussian_draw(&self.joint_mean(x), &f, rng)
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![0.0; self.state_dim()]
    }

    fn utility(&self, _x: &[f64], x_next: &[f64]) -> f64 {
        self.loading().as_slice().iter().zip(x_next).map(|(l, v)| l * v).sum()
    }
}

/// Steady-state Kalman filter: `ξ ~ N(ξ̂, Σ̄)` given the observed history.
#[derive(Debug, Clone, Serialize)]
pub struct SteadyFilter {
    #[serde(with = "serde_matrix")]
    pub sigma_bar: DMatrix<f64>,
    /// `K = B Σ̄ A' (A Σ̄ A' + Σ_u)⁻¹`.
    #[serde(with = "serde_matrix")]
    pub gain: DMatrix<f64>,
    /// Predictive covariance of the next observation, `A Σ̄ A' + Σ_u`.
    #[serde(with = "serde_matrix")]
    pub innovation_cov: DMatrix<f64>,
    pub iterations: usize,
    /// Sup-norm of one Riccati step at `sigma_bar`.
    pub residual: f64,
}

impl SteadyFilter {
    /// `ξ̂' = B ξ̂ + K (φ' − A ξ̂)`.
    pub fn update(&self, model: &GaussianStateSpaceModel, xi_hat: &[f64], phi_next: &[f64]) -> DVector<f64> {
        let xi = DVector::from_column_slice(xi_hat);
        let innov = DVector::from_column_slice(phi_next) - &model.a * &xi;
        &model.b * xi + &self.gain * innov
    }
}

/// Iterates the Riccati recursion from `Σ_w` until one step moves by less
/// than `tol` in sup-norm.
pub fn kalman_steady_state(model: &GaussianStateSpaceModel, tol: f64) -> Result<SteadyFilter> {
    model.validate()?;
    if !(tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    let mut sigma = model.sigma_w.clone();
    let mut change = f64::INFINITY;
    for it in 1..=RICCATI_MAX_ITER {
        let next = model.riccati_step(&sigma)?;
        change = (&next - &sigma).amax();
        sigma = next;
        if change < tol {
            let residual = (model.riccati_step(&sigma)? - &sigma).amax();
            let s = &model.a * &sigma * model.a.transpose() + &model.sigma_u;
            let gain = &model.b * &sigma * model.a.transpose() * inverse(&s)?;
            return Ok(SteadyFilter {
                sigma_bar: sigma,
                gain,
                innovation_cov: s,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        context: "steady-state Riccati recursion".into(),
        iterations: RICCATI_MAX_ITER,
        last_change: change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_riccati_root() {
        let m = GaussianStateSpaceModel::scalar(1.0, 0.5, 1.0, 1.0).unwrap();
        let f = kalman_steady_state(&m, 1e-14).unwrap();
        assert!((f.sigma_bar[(0, 0)] - 1.132_782_218_537_318_7).abs() < 1e-12);
    }

    #[test]
    fn no_persistence_gives_hidden_noise() {
        let m = GaussianStateSpaceModel::scalar(1.0, 0.0, 1.0, 0.7).unwrap();
        let f = kalman_steady_state(&m, 1e-14).unwrap();
        assert_eq!(f.sigma_bar[(0, 0)], 0.7);
    }

    #[test]
    fn no_hidden_noise_gives_zero() {
        let m = GaussianStateSpaceModel::scalar(1.0, 0.6, 1.0, 0.0).unwrap();
        let f = kalman_steady_state(&m, 1e-14).unwrap();
        assert_eq!(f.sigma_bar[(0, 0)], 0.0);
    }
}

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_psd, discrete_lyapunov, inverse, psd_factor, serde_matrix, serde_vector, spectral_radius};
use crate::models::kernel::{
    check_bounds_len, gaussian_nodes, log_normal_interval, normalize_truncated, panel_nodes, TransitionNode,
    TruncatedNodes, ValueKernel,
};
use crate::models::law::{gaussian_draw, StationaryLaw};
use crate::models::MarkovModel;
use crate::quadrature::QuadratureSpec;

fn empty() -> DVector<f64> {
    DVector::zeros(0)
}

/// Gaussian VAR(1) `X' = ν + A X + ε`, `ε ~ N(0, Σ)`, with utility growth
/// `u(x, x') = λ0'x + λ1'x'`. Empty loadings are read as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianVar1Model {
    #[serde(with = "serde_vector")]
    pub nu: DVector<f64>,
    #[serde(rename = "A", with = "serde_matrix")]
    pub a: DMatrix<f64>,
    #[serde(rename = "Sigma", with = "serde_matrix")]
    pub sigma: DMatrix<f64>,
    #[serde(default = "empty", with = "serde_vector")]
    pub lambda0: DVector<f64>,
    #[serde(default = "empty", with = "serde_vector")]
    pub lambda1: DVector<f64>,
}

impl GaussianVar1Model {
    pub fn new(
        nu: DVector<f64>,
        a: DMatrix<f64>,
        sigma: DMatrix<f64>,
        lambda0: DVector<f64>,
        lambda1: DVector<f64>,
    ) -> Result<Self> {
        let m = Self {
            nu,
            a,
            sigma,
            lambda0,
            lambda1,
        };
        m.validate()?;
        Ok(m)
    }

    /// Scalar model with `Σ = sigma2`.
    pub fn scalar(a: f64, nu: f64, sigma2: f64, lambda0: f64, lambda1: f64) -> Result<Self> {
        Self::new(
            DVector::from_element(1, nu),
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, sigma2),
            DVector::from_element(1, lambda0),
            DVector::from_element(1, lambda1),
        )
    }

    pub fn dim(&self) -> usize {
        self.nu.len()
    }

    pub fn lambda0(&self) -> DVector<f64> {
        if self.lambda0.is_empty() {
            DVector::zeros(self.dim())
        } else {
            self.lambda0.clone()
        }
    }

    pub fn lambda1(&self) -> DVector<f64> {
        if self.lambda1.is_empty() {
            DVector::zeros(self.dim())
        } else {
            self.lambda1.clone()
        }
    }

    pub fn cond_mean(&self, x: &[f64]) -> DVector<f64> {
        &self.nu + &self.a * DVector::from_column_slice(x)
    }

    pub fn stationary_mean(&self) -> Result<DVector<f64>> {
        let d = self.dim();
        Ok(inverse(&(DMatrix::identity(d, d) - &self.a))? * &self.nu)
    }

    pub fn stationary_cov(&self) -> Result<DMatrix<f64>> {
        discrete_lyapunov(&self.a, &self.sigma)
    }

    pub fn utility_at(&self, x: &[f64], x_next: &[f64]) -> f64 {
        let l0 = self.lambda0();
        let l1 = self.lambda1();
        l0.as_slice().iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            + l1.as_slice().iter().zip(x_next).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `log E[exp(b'X') | X = x] = b'(ν + A x) + ½ b'Σb`.
    pub fn log_mgf(&self, x: &[f64], b: &DVector<f64>) -> f64 {
        b.dot(&self.cond_mean(x)) + 0.5 * (b.transpose() * &self.sigma * b)[(0, 0)]
    }
}

impl MarkovModel for GaussianVar1Model {
    fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::invalid("VAR dimension must be at least 1"));
        }
        if self.a.shape() != (d, d) || self.sigma.shape() != (d, d) {
            return Err(Error::invalid("A and Sigma must be square with the dimension of nu"));
        }
        for (name, l) in [("lambda0", &self.lambda0), ("lambda1", &self.lambda1)] {
            if !l.is_empty() && l.len() != d {
                return Err(Error::invalid(format!("{name} must have the dimension of nu")));
            }
        }
        check_psd("Sigma", &self.sigma)?;
        let rho = spectral_radius(&self.a);
        if rho >= 1.0 {
            return Err(Error::NonStationary(format!(
                "spectral radius of A is {rho:.6} (must be < 1)"
            )));
        }
        Ok(())
    }

    fn state_dim(&self) -> usize {
        self.dim()
    }

    fn stationary_law(&self) -> Result<StationaryLaw> {
        self.validate()?;
        Ok(StationaryLaw::gaussian(self.stationary_mean()?, self.stationary_cov()?))
    }

    fn next_state_nodes(&self, x: &[f64], quad: &QuadratureSpec) -> Result<Vec<(Vec<f64>, f64)>> {
        let l = psd_factor(&self.sigma)?;
        Ok(gaussian_nodes(&self.cond_mean(x), &l, quad))
    }

    fn sample_next(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let l = psd_factor(&self.sigma).expect("validated covariance");
        gaussian_draw(&self.cond_mean(x), &l, rng)
    }

    fn initial_state(&self) -> Vec<f64> {
        self.stationary_mean()
            .map(|m| m.as_slice().to_vec())
            .unwrap_or_else(|_| vec![0.0; self.dim()])
    }

    fn utility(&self, x: &[f64], x_next: &[f64]) -> f64 {
        self.utility_at(x, x_next)
    }
}

impl ValueKernel for GaussianVar1Model {
    fn value_dim(&self) -> usize {
        self.dim()
    }

    fn value_nodes(&self, y: &[f64], tilt: f64, quad: &QuadratureSpec) -> Result<Vec<TransitionNode>> {
        Ok(self
            .next_state_nodes(y, quad)?
            .into_iter()
            .map(|(state, log_weight)| {
                let u = self.utility_at(y, &state);
                TransitionNode {
                    state,
                    log_weight,
                    utility_mean: u,
                    log_tilt: tilt * u,
                }
            })
            .collect())
    }

    fn truncated_value_nodes(
        &self,
        y: &[f64],
        tilt: f64,
        bounds: &[(f64, f64)],
        quad: &QuadratureSpec,
    ) -> Result<TruncatedNodes> {
        let d = self.dim();
        check_bounds_len(bounds, d)?;
        let mean = self.cond_mean(y);
        let prec = self
            .sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Unsupported("truncated kernel needs a nonsingular shock covariance".into()))?;
        let log_det: f64 = 2.0 * prec.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let sigma_inv = prec.inverse();
        let norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);

        let axes: Vec<Vec<(f64, f64)>> = (0..d)
            .map(|i| {
                let sd = self.sigma[(i, i)].sqrt();
                let (lo, hi) = bounds[i];
                panel_nodes(lo, hi, (0.5 * sd).min((hi - lo) / 8.0), quad.n)
            })
            .collect();

        let mut nodes = Vec::new();
        let mut idx = vec![0usize; d];
        loop {
            let point: Vec<f64> = (0..d).map(|i| axes[i][idx[i]].0).collect();
            let lw_len: f64 = (0..d).map(|i| axes[i][idx[i]].1).sum();
            let diff = DVector::from_column_slice(&point) - &mean;
            let quad_form = (diff.transpose() * &sigma_inv * &diff)[(0, 0)];
            let u = self.utility_at(y, &point);
            nodes.push(TransitionNode {
                state: point,
                log_weight: lw_len + norm - 0.5 * quad_form,
                utility_mean: u,
                log_tilt: tilt * u,
            });
            let mut k = 0;
            while k < d {
                idx[k] += 1;
                if idx[k] < axes[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == d {
                break;
            }
        }
        let (nodes, numeric_mass) = normalize_truncated(nodes, &format!("{y:?}"))?;
        let log_mass = if d == 1 {
            let sd = self.sigma[(0, 0)].sqrt();
            log_normal_interval((bounds[0].0 - mean[0]) / sd, (bounds[0].1 - mean[0]) / sd)
        } else {
            numeric_mass
        };
        if log_mass == f64::NEG_INFINITY {
            return Err(Error::Domain(format!("Q(C|x) is numerically zero at {y:?}")));
        }
        Ok(TruncatedNodes { nodes, log_mass })
    }

    fn pointwise_utility(&self, y: &[f64], y_next: &[f64]) -> Option<f64> {
        Some(self.utility_at(y, y_next))
    }

    fn value_law(&self) -> Result<StationaryLaw> {
        self.stationary_law()
    }
}

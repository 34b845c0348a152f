//! Finite-state Markov chains: the regime-switching VAR and the hidden-regime
//! observation model, plus the regime filter.
//!
//! Transition matrices are column-stochastic: `Lambda[(i, j)] = P(next = i |
//! current = j)`, so a column probability vector `p` evolves as `Λ p`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    check_psd, psd_factor, serde_matrices, serde_matrix, serde_vector, serde_vectors, solve, spectral_radius,
};
use crate::models::kernel::{
    check_bounds_len, gaussian_nodes, normalize_truncated, panel_nodes, TransitionNode, TruncatedNodes, ValueKernel,
};
use crate::models::law::{categorical, gaussian_draw, StationaryLaw, DEFAULT_BURN_IN, DEFAULT_LAW_SEED};
use crate::models::{MarkovModel, Model};
use crate::numerics::log_normal_pdf;
use crate::quadrature::{gauss_hermite, QuadratureScheme, QuadratureSpec};

const STOCHASTIC_TOL: f64 = 1e-10;

pub fn validate_transition_matrix(lambda: &DMatrix<f64>) -> Result<()> {
    let n = lambda.nrows();
    if n == 0 || lambda.ncols() != n {
        return Err(Error::invalid("Lambda must be a non-empty square matrix"));
    }
    if lambda.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::invalid("Lambda entries must be finite and non-negative"));
    }
    for j in 0..n {
        let s = lambda.column(j).sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::invalid(format!(
                "column {j} of Lambda sums to {s}; columns must be probability vectors"
            )));
        }
    }
    Ok(())
}

/// Stationary distribution `π = Λ π` of a column-stochastic matrix.
pub fn stationary_distribution(lambda: &DMatrix<f64>) -> Result<DVector<f64>> {
    validate_transition_matrix(lambda)?;
    let n = lambda.nrows();
    let mut m = lambda - DMatrix::identity(n, n);
    let mut rhs = DVector::zeros(n);
    for j in 0..n {
        m[(n - 1, j)] = 1.0;
    }
    rhs[n - 1] = 1.0;
    let pi =
        solve(&m, &rhs).map_err(|_| Error::NonStationary("Lambda has no unique stationary distribution".into()))?;
    if pi.iter().any(|p| *p < -1e-12) {
        return Err(Error::NonStationary(
            "Lambda has no unique stationary distribution".into(),
        ));
    }
    let pi = pi.map(|p| p.max(0.0));
    let s = pi.sum();
    Ok(pi / s)
}

/// One step of the regime filter given observation likelihoods `q`:
/// `Λ (q ⊙ p) / 1'(q ⊙ p)`.
pub fn filter_update_with_likelihoods(lambda: &DMatrix<f64>, beliefs: &[f64], q: &[f64]) -> Result<DVector<f64>> {
    let n = lambda.nrows();
    if beliefs.len() != n || q.len() != n {
        return Err(Error::invalid("beliefs and likelihoods must have one entry per regime"));
    }
    if beliefs.iter().any(|b| *b < 0.0 || !b.is_finite()) || (beliefs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("beliefs must lie on the probability simplex"));
    }
    if q.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::invalid("likelihoods must be finite and non-negative"));
    }
    let joint = DVector::from_iterator(n, beliefs.iter().zip(q).map(|(b, l)| b * l));
    let total = joint.sum();
    if total <= 0.0 {
        return Err(Error::Domain(
            "all likelihoods vanish at the observation; posterior undefined".into(),
        ));
    }
    let out = lambda * (joint / total);
    let s = out.sum();
    Ok(out.map(|p| p.max(0.0)) / s)
}

fn empty() -> DVector<f64> {
    DVector::zeros(0)
}

/// VAR whose intercept, persistence and shock covariance depend on an
/// exogenous regime `s`: `X' = ν_s + A_s X + ε`, `ε ~ N(0, Σ_s)`.
/// Full state `[x..., s]` with `s` stored as a regime index. Utility growth
/// `λ0'x + λ1'x'` as in the Gaussian VAR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSwitchVarModel {
    #[serde(with = "serde_vectors")]
    pub nu: Vec<DVector<f64>>,
    #[serde(rename = "A", with = "serde_matrices")]
    pub a: Vec<DMatrix<f64>>,
    #[serde(rename = "Sigma", with = "serde_matrices")]
    pub sigma: Vec<DMatrix<f64>>,
    #[serde(rename = "Lambda", with = "serde_matrix")]
    pub lambda: DMatrix<f64>,
    #[serde(default = "empty", with = "serde_vector")]
    pub lambda0: DVector<f64>,
    #[serde(default = "empty", with = "serde_vector")]
    pub lambda1: DVector<f64>,
}

impl RegimeSwitchVarModel {
    pub fn regimes(&self) -> usize {
        self.nu.len()
    }

    pub fn dim(&self) -> usize {
        self.nu.first().map_or(0, DVector::len)
    }

    fn loading(&self, l: &DVector<f64>) -> DVector<f64> {
        if l.is_empty() {
            DVector::zeros(self.dim())
        } else {
            l.clone()
        }
    }

    pub fn utility_at(&self, x: &[f64], x_next: &[f64]) -> f64 {
        let d = self.dim();
        let l0 = self.loading(&self.lambda0);
        let l1 = self.loading(&self.lambda1);
        (0..d).map(|i| l0[i] * x[i] + l1[i] * x_next[i]).sum()
    }

    fn regime_of(&self, x: &[f64]) -> usize {
        (x[self.dim()].round().max(0.0) as usize).min(self.regimes() - 1)
    }

    fn cond_mean(&self, x: &[f64], s: usize) -> DVector<f64> {
        &self.nu[s] + &self.a[s] * DVector::from_column_slice(&x[..self.dim()])
    }
}

impl MarkovModel for RegimeSwitchVarModel {
    fn validate(&self) -> Result<()> {
        let n = self.regimes();
        let d = self.dim();
        if n == 0 || d == 0 {
            return Err(Error::invalid("need at least one regime and one state dimension"));
        }
        if self.a.len() != n || self.sigma.len() != n || self.lambda.nrows() != n {
            return Err(Error::invalid(
                "nu, A, Sigma and Lambda must agree on the number of regimes",
            ));
        }
        validate_transition_matrix(&self.lambda)?;
        for s in 0..n {
            if self.nu[s].len() != d || self.a[s].shape() != (d, d) || self.sigma[s].shape() != (d, d) {
                return Err(Error::invalid(format!("regime {s} has inconsistent dimensions")));
            }
            check_psd(&format!("Sigma[{s}]"), &self.sigma[s])?;
            let rho = spectral_radius(&self.a[s]);
            if rho >= 1.0 {
                return Err(Error::NonStationary(format!("spectral radius of A[{s}] is {rho:.6}")));
            }
        }
        for l in [&self.lambda0, &self.lambda1] {
            if !l.is_empty() && l.len() != d {
                return Err(Error::invalid("utility loadings must match the state dimension"));
            }
        }
        Ok(())
    }

    fn state_dim(&self) -> usize {
        self.dim() + 1
    }

    fn stationary_law(&self) -> Result<StationaryLaw> {
        self.validate()?;
        Ok(StationaryLaw::simulated(
            Model::RegimeSwitchVar(self.clone()),
            DEFAULT_BURN_IN,
            DEFAULT_LAW_SEED,
            None,
            vec![None; self.state_dim()],
        ))
    }

    fn next_state_nodes(&self, x: &[f64], quad: &QuadratureSpec) -> Result<Vec<(Vec<f64>, f64)>> {
        if quad.scheme == QuadratureScheme::MonteCarlo {
            return Ok(crate::models::monte_carlo_nodes(self, x, quad));
        }
        let s = self.regime_of(x);
        let l = psd_factor(&self.sigma[s])?;
        let xs = gaussian_nodes(&self.cond_mean(x, s), &l, quad);
        let mut out = Vec::new();
        for sn in 0..self.regimes() {
            let p = self.lambda[(sn, s)];
            if p <= 0.0 {
                continue;
            }
            for (xn, lw) in &xs {
                let mut st = xn.clone();
                st.push(sn as f64);
                out.push((st, lw + p.ln()));
            }
        }
        Ok(out)
    }

    fn sample_next(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let s = self.regime_of(x);
        let l = psd_factor(&self.sigma[s]).expect("validated covariance");
        let mut xn = gaussian_draw(&self.cond_mean(x, s), &l, rng);
        let col: Vec<f64> = self.lambda.column(s).iter().copied().collect();
        xn.push(categorical(&col, rng) as f64);
        xn
    }

    fn initial_state(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        x.push(0.0);
        x
    }

    fn utility(&self, x: &[f64], x_next: &[f64]) -> f64 {
        self.utility_at(x, x_next)
    }
}

impl ValueKernel for RegimeSwitchVarModel {
    fn value_dim(&self) -> usize {
        self.state_dim()
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
        check_bounds_len(bounds, d + 1)?;
        if d != 1 {
            return Err(Error::Unsupported(
                "truncated regime-switching kernels are implemented for scalar VARs".into(),
            ));
        }
        let s = self.regime_of(y);
        let m = self.cond_mean(y, s)[0];
        let sd = self.sigma[s][(0, 0)].sqrt();
        if sd == 0.0 {
            return Err(Error::Unsupported(
                "truncated kernel needs a nonsingular shock variance".into(),
            ));
        }
        let (lo, hi) = bounds[0];
        let panels = panel_nodes(lo, hi, (0.5 * sd).min((hi - lo) / 8.0), quad.n);
        let mut nodes = Vec::new();
        for sn in 0..self.regimes() {
            let p = self.lambda[(sn, s)];
            if p <= 0.0 || (sn as f64) < bounds[1].0 || (sn as f64) > bounds[1].1 {
                continue;
            }
            for &(z, lw) in &panels {
                let state = vec![z, sn as f64];
                let u = self.utility_at(y, &state);
                nodes.push(TransitionNode {
                    state,
                    log_weight: lw + p.ln() + log_normal_pdf((z - m) / sd) - sd.ln(),
                    utility_mean: u,
                    log_tilt: tilt * u,
                });
            }
        }
        let (nodes, log_mass) = normalize_truncated(nodes, &format!("{y:?}"))?;
        Ok(TruncatedNodes {
            nodes,
            log_mass: log_mass.min(0.0),
        })
    }

    fn pointwise_utility(&self, y: &[f64], y_next: &[f64]) -> Option<f64> {
        Some(self.utility_at(y, y_next))
    }

    fn value_law(&self) -> Result<StationaryLaw> {
        self.stationary_law()
    }
}

/// Hidden regime `ξ` with column-stochastic transition `Λ`; the observable
/// `φ'` is drawn from `N(means[ξ], variances[ξ])` given today's regime.
/// Full state `[φ, ξ]`; utility growth is `φ'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenRegimeModel {
    #[serde(rename = "Lambda", with = "serde_matrix")]
    pub lambda: DMatrix<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl HiddenRegimeModel {
    pub fn new(lambda: DMatrix<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let m = Self {
            lambda,
            means,
            variances,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn regimes(&self) -> usize {
        self.means.len()
    }

    /// Observation densities `q(obs | ξ)` for each regime.
    pub fn likelihoods(&self, obs: f64) -> Vec<f64> {
        self.log_likelihoods(obs).into_iter().map(f64::exp).collect()
    }

    pub fn log_likelihoods(&self, obs: f64) -> Vec<f64> {
        self.means
            .iter()
            .zip(&self.variances)
            .map(|(m, v)| {
                let sd = v.sqrt();
                log_normal_pdf((obs - m) / sd) - sd.ln()
            })
            .collect()
    }

    pub fn filter_update(&self, beliefs: &[f64], obs: &[f64]) -> Result<DVector<f64>> {
        if obs.len() != 1 {
            return Err(Error::invalid("hidden-regime observations are scalar"));
        }
        filter_update_with_likelihoods(&self.lambda, beliefs, &self.likelihoods(obs[0]))
    }

    fn regime_of(&self, x: &[f64]) -> usize {
        (x[1].round().max(0.0) as usize).min(self.regimes() - 1)
    }
}

impl MarkovModel for HiddenRegimeModel {
    fn validate(&self) -> Result<()> {
        let n = self.regimes();
        if n == 0 || self.variances.len() != n || self.lambda.nrows() != n {
            return Err(Error::invalid(
                "Lambda, means and variances must agree on the number of regimes",
            ));
        }
        validate_transition_matrix(&self.lambda)?;
        if self.variances.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.means.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid(
                "observation variances must be positive and means finite",
            ));
        }
        Ok(())
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn stationary_law(&self) -> Result<StationaryLaw> {
        self.validate()?;
        let pi = stationary_distribution(&self.lambda)?;
        let n = self.regimes();
        let (mut weights, mut means, mut covs) = (Vec::new(), Vec::new(), Vec::new());
        for k in 0..n {
            for l in 0..n {
                let w = pi[k] * self.lambda[(l, k)];
                if w <= 0.0 {
                    continue;
                }
                weights.push(w);
                means.push(DVector::from_vec(vec![self.means[k], l as f64]));
                covs.push(DMatrix::from_diagonal(&DVector::from_vec(vec![self.variances[k], 0.0])));
            }
        }
        Ok(StationaryLaw::gaussian_mixture(weights, means, covs))
    }

    fn next_state_nodes(&self, x: &[f64], quad: &QuadratureSpec) -> Result<Vec<(Vec<f64>, f64)>> {
        if quad.scheme == QuadratureScheme::MonteCarlo {
            return Ok(crate::models::monte_carlo_nodes(self, x, quad));
        }
        let k = self.regime_of(x);
        let rule = gauss_hermite(quad.n);
        let sd = self.variances[k].sqrt();
        let mut out = Vec::new();
        for l in 0..self.regimes() {
            let p = self.lambda[(l, k)];
            if p <= 0.0 {
                continue;
            }
            for (z, w) in rule.nodes.iter().zip(&rule.weights) {
                out.push((vec![self.means[k] + sd * z, l as f64], p.ln() + w.ln()));
            }
        }
        Ok(out)
    }

    fn sample_next(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let k = self.regime_of(x);
        let z: f64 = rng.sample(StandardNormal);
        let col: Vec<f64> = self.lambda.column(k).iter().copied().collect();
        let l = categorical(&col, rng);
        vec![self.means[k] + self.variances[k].sqrt() * z, l as f64]
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![self.means[0], 0.0]
    }

    fn utility(&self, _x: &[f64], x_next: &[f64]) -> f64 {
        x_next[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_reference_value() {
        let lambda = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]);
        let out = filter_update_with_likelihoods(&lambda, &[0.5, 0.5], &[2.0, 1.0]).unwrap();
        assert!((out[0] - 19.0 / 30.0).abs() < 1e-15);
        assert!((out[1] - 11.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn zero_likelihoods_rejected() {
        let lambda = DMatrix::identity(2, 2);
        assert!(filter_update_with_likelihoods(&lambda, &[0.5, 0.5], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn symmetric_chain_is_uniform() {
        let lambda = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]);
        let pi = stationary_distribution(&lambda).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-15 && (pi[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn row_stochastic_matrix_rejected() {
        let lambda = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.5, 0.5]);
        assert!(validate_transition_matrix(&lambda).is_err());
    }
}

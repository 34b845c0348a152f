use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::kernel::{
    check_bounds_len, gaussian_nodes, log_normal_interval, normalize_truncated, panel_nodes, TransitionNode,
    TruncatedNodes, ValueKernel,
};
use crate::models::law::{Marginal, StationaryLaw, DEFAULT_BURN_IN, DEFAULT_LAW_SEED};
use crate::models::{MarkovModel, Model};
use crate::numerics::log_normal_pdf;
use crate::quadrature::QuadratureSpec;

/// Stochastic-volatility growth model
/// `g' = ν_g + exp(h) η_g`, `h' = ν_h + ρ h + σ η_h`, state `[g, h]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsyVolModel {
    pub nu_g: f64,
    pub nu_h: f64,
    pub rho: f64,
    pub sigma: f64,
}

impl SsyVolModel {
    pub fn new(nu_g: f64, nu_h: f64, rho: f64, sigma: f64) -> Result<Self> {
        let m = Self { nu_g, nu_h, rho, sigma };
        m.validate()?;
        Ok(m)
    }

    /// Stationary mean and standard deviation of `h`.
    pub fn h_moments(&self) -> (f64, f64) {
        (
            self.nu_h / (1.0 - self.rho),
            self.sigma / (1.0 - self.rho * self.rho).sqrt(),
        )
    }

    /// `log E[exp(t g') | h] = t ν_g + ½ t² e^{2h}`.
    pub fn log_mgf_g(&self, t: f64, h: f64) -> f64 {
        t * self.nu_g + 0.5 * t * t * (2.0 * h).exp()
    }

    pub fn h_cond_mean(&self, h: f64) -> f64 {
        self.nu_h + self.rho * h
    }
}

impl MarkovModel for SsyVolModel {
    fn validate(&self) -> Result<()> {
        if !(self.nu_g.is_finite() && self.nu_h.is_finite()) {
            return Err(Error::invalid("drifts must be finite"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("sigma must be positive"));
        }
        if self.rho.abs() >= 1.0 || !self.rho.is_finite() {
            return Err(Error::NonStationary(format!("|rho| = {} must be < 1", self.rho.abs())));
        }
        Ok(())
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn stationary_law(&self) -> Result<StationaryLaw> {
        self.validate()?;
        let (mh, sh) = self.h_moments();
        let mean = DVector::from_vec(vec![self.nu_g, mh]);
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![(2.0 * mh + 2.0 * sh * sh).exp(), sh * sh]));
        Ok(StationaryLaw::simulated(
            Model::SsyVol(self.clone()),
            DEFAULT_BURN_IN,
            DEFAULT_LAW_SEED,
            Some((mean, cov)),
            vec![None, Some(Marginal::Gaussian { mean: mh, sd: sh })],
        ))
    }

    fn next_state_nodes(&self, x: &[f64], quad: &QuadratureSpec) -> Result<Vec<(Vec<f64>, f64)>> {
        let h = x[1];
        let mean = DVector::from_vec(vec![self.nu_g, self.h_cond_mean(h)]);
        let factor = DMatrix::from_diagonal(&DVector::from_vec(vec![h.exp(), self.sigma]));
        Ok(gaussian_nodes(&mean, &factor, quad))
    }

    fn sample_next(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let h = x[1];
        let eg: f64 = rng.sample(StandardNormal);
        let eh: f64 = rng.sample(StandardNormal);
        vec![self.nu_g + h.exp() * eg, self.h_cond_mean(h) + self.sigma * eh]
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![self.nu_g, self.h_moments().0]
    }

    fn utility(&self, _x: &[f64], x_next: &[f64]) -> f64 {
        x_next[0]
    }
}

impl ValueKernel for SsyVolModel {
    fn value_dim(&self) -> usize {
        1
    }

    fn value_nodes(&self, y: &[f64], tilt: f64, quad: &QuadratureSpec) -> Result<Vec<TransitionNode>> {
        let h = y[0];
        let log_tilt = self.log_mgf_g(tilt, h);
        let mean = DVector::from_element(1, self.h_cond_mean(h));
        let factor = DMatrix::from_element(1, 1, self.sigma);
        Ok(gaussian_nodes(&mean, &factor, quad)
            .into_iter()
            .map(|(state, log_weight)| TransitionNode {
                state,
                log_weight,
                utility_mean: self.nu_g,
                log_tilt,
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
        check_bounds_len(bounds, 1)?;
        let h = y[0];
        let (lo, hi) = bounds[0];
        let m = self.h_cond_mean(h);
        let s = self.sigma;
        let log_tilt = self.log_mgf_g(tilt, h);
        let nodes: Vec<TransitionNode> = panel_nodes(lo, hi, (0.5 * s).min((hi - lo) / 8.0), quad.n)
            .into_iter()
            .map(|(z, lw)| TransitionNode {
                state: vec![z],
                log_weight: lw + log_normal_pdf((z - m) / s) - s.ln(),
                utility_mean: self.nu_g,
                log_tilt,
            })
            .collect();
        let (nodes, _) = normalize_truncated(nodes, &format!("h = {h}"))?;
        let log_mass = log_normal_interval((lo - m) / s, (hi - m) / s);
        if log_mass == f64::NEG_INFINITY {
            return Err(Error::Domain(format!("Q(C|h) is numerically zero at h = {h}")));
        }
        Ok(TruncatedNodes { nodes, log_mass })
    }

    fn value_law(&self) -> Result<StationaryLaw> {
        self.validate()?;
        let (mh, sh) = self.h_moments();
        Ok(StationaryLaw::gaussian(
            DVector::from_element(1, mh),
            DMatrix::from_element(1, 1, sh * sh),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tilt_matches_lognormal_mgf() {
        let m = SsyVolModel::new(0.01, -0.1, 0.9, 0.1).unwrap();
        let nodes = m
            .next_state_nodes(&[0.0, -0.5], &QuadratureSpec::gauss_hermite(41))
            .unwrap();
        let e: f64 = nodes.iter().map(|(x, lw)| (lw + -1.0 * x[0]).exp()).sum();
        assert!((e.ln() - m.log_mgf_g(-1.0, -0.5)).abs() < 1e-12);
    }

    #[test]
    fn rejects_unit_root() {
        assert!(SsyVolModel::new(0.0, 0.0, 1.0, 0.1).is_err());
        assert!(SsyVolModel::new(0.0, 0.0, 0.5, 0.0).is_err());
    }
}

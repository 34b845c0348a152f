use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::kernel::{
    check_bounds_len, normalize_truncated, panel_nodes, TransitionNode, TruncatedNodes, ValueKernel,
};
use crate::models::law::{Marginal, StationaryLaw, DEFAULT_BURN_IN, DEFAULT_LAW_SEED};
use crate::models::{MarkovModel, Model};
use crate::numerics::{ln_gamma_pdf, ln_poisson_pmf, LogSumExp};
use crate::quadrature::{gauss_hermite, gauss_laguerre, QuadratureScheme, QuadratureSpec};

fn one() -> f64 {
    1.0
}

/// Node cap for the product rules of the full `(g, h)` transition.
const JOINT_NODE_CAP: usize = 20;
/// Node cap for the Gauss–Laguerre rules of the intensity transition.
const LAGUERRE_NODE_CAP: usize = 48;

/// Rare-disaster growth model with an autoregressive-gamma jump intensity.
///
/// `g' = ν_g + σ η + w_z`, `j' | h ~ Poisson(h)`,
/// `w_z | j' ~ N(ν_j j', σ_j² j')` when `varsigma = 1` and
/// `w_z | j' ~ N(ν_j j'^ς, σ_j²)` otherwise; the intensity follows
/// `k ~ Poisson(φ h / c)`, `h' ~ Gamma(δ + k, c)`. State `[g, h]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisasterArgModel {
    pub nu_g: f64,
    pub sigma: f64,
    pub nu_j: f64,
    pub sigma_j: f64,
    pub phi: f64,
    pub c: f64,
    pub delta: f64,
    #[serde(default = "one")]
    pub varsigma: f64,
}

impl DisasterArgModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        nu_g: f64,
        sigma: f64,
        nu_j: f64,
        sigma_j: f64,
        phi: f64,
        c: f64,
        delta: f64,
        varsigma: f64,
    ) -> Result<Self> {
        let m = Self {
            nu_g,
            sigma,
            nu_j,
            sigma_j,
            phi,
            c,
            delta,
            varsigma,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn is_original(&self) -> bool {
        self.varsigma == 1.0
    }

    /// Stationary law of the intensity, `Gamma(δ, c/(1−φ))`.
    pub fn intensity_law(&self) -> StationaryLaw {
        StationaryLaw::gamma(self.delta, self.c / (1.0 - self.phi))
    }

    /// Conditional Laplace transform `E[exp(u h') | h]`.
    pub fn laplace(&self, u: f64, h: f64) -> Result<f64> {
        Ok(self.log_laplace(u, h)?.exp())
    }

    pub fn log_laplace(&self, u: f64, h: f64) -> Result<f64> {
        let uc = u * self.c;
        if uc >= 1.0 {
            return Err(Error::Domain(format!(
                "Laplace transform undefined for u·c = {uc} >= 1"
            )));
        }
        Ok(self.phi * u * h / (1.0 - uc) - self.delta * (1.0 - uc).ln())
    }

    /// `log E[exp(t w_z) | h]`.
    pub fn log_mgf_jump(&self, t: f64, h: f64) -> f64 {
        let h = h.max(0.0);
        if self.is_original() {
            h * ((t * self.nu_j + 0.5 * t * t * self.sigma_j * self.sigma_j).exp() - 1.0)
        } else {
            let mut acc = LogSumExp::new();
            for (j, lp) in poisson_support(h) {
                acc.push(lp + t * self.nu_j * (j as f64).powf(self.varsigma));
            }
            acc.value() + 0.5 * t * t * self.sigma_j * self.sigma_j
        }
    }

    /// `log E[exp(t g') | h]`.
    pub fn log_mgf_g(&self, t: f64, h: f64) -> f64 {
        t * self.nu_g + 0.5 * t * t * self.sigma * self.sigma + self.log_mgf_jump(t, h)
    }

    /// `E[g' | h]`.
    pub fn g_cond_mean(&self, h: f64) -> f64 {
        let h = h.max(0.0);
        if self.is_original() {
            self.nu_g + self.nu_j * h
        } else {
            let ej: f64 = poisson_support(h)
                .into_iter()
                .map(|(j, lp)| lp.exp() * (j as f64).powf(self.varsigma))
                .sum();
            self.nu_g + self.nu_j * ej
        }
    }

    fn jump_moments(&self, j: usize) -> (f64, f64) {
        let jf = j as f64;
        if self.is_original() {
            (self.nu_j * jf, self.sigma_j * self.sigma_j * jf)
        } else {
            (self.nu_j * jf.powf(self.varsigma), self.sigma_j * self.sigma_j)
        }
    }

    /// Nodes `(h', log weight)` of the intensity transition from `h`.
    pub fn intensity_nodes(&self, h: f64, n: usize) -> Vec<(f64, f64)> {
        let n = n.clamp(1, LAGUERRE_NODE_CAP);
        let mut out = Vec::new();
        for (k, lp) in poisson_support(self.phi * h.max(0.0) / self.c) {
            let rule = gauss_laguerre(self.delta + k as f64, n);
            for (z, w) in rule.nodes.iter().zip(&rule.weights) {
                if *w > 0.0 {
                    out.push((self.c * z, lp + w.ln()));
                }
            }
        }
        out
    }

    /// Log density of `h'` given `h`.
    pub fn ln_intensity_density(&self, h: f64, z: f64) -> f64 {
        let mut acc = LogSumExp::new();
        for (k, lp) in poisson_support(self.phi * h.max(0.0) / self.c) {
            acc.push(lp + ln_gamma_pdf(z, self.delta + k as f64, self.c));
        }
        acc.value()
    }

    fn stationary_moments(&self) -> (DVector<f64>, DMatrix<f64>) {
        let mh = self.delta * self.c / (1.0 - self.phi);
        let vh = self.delta * self.c * self.c / ((1.0 - self.phi) * (1.0 - self.phi));
        let nj2 = self.nu_j * self.nu_j;
        let vg = self.sigma * self.sigma + self.sigma_j * self.sigma_j * mh + nj2 * (mh + vh);
        let cgh = self.nu_j * self.phi * vh;
        (
            DVector::from_vec(vec![self.nu_g + self.nu_j * mh, mh]),
            DMatrix::from_row_slice(2, 2, &[vg, cgh, cgh, vh]),
        )
    }
}

/// Poisson support points carrying non-negligible mass, with log pmf.
pub(crate) fn poisson_support(mean: f64) -> Vec<(usize, f64)> {
    if mean <= 0.0 {
        return vec![(0, 0.0)];
    }
    let spread = 12.0 * mean.sqrt() + 12.0;
    let lo = (mean - spread).floor().max(0.0) as usize;
    let hi = (mean + spread).ceil() as usize;
    let mode = mean.floor() as usize;
    let peak = ln_poisson_pmf(mode, mean);
    (lo..=hi)
        .map(|k| (k, ln_poisson_pmf(k, mean)))
        .filter(|(_, lp)| *lp > peak - 80.0)
        .collect()
}

impl MarkovModel for DisasterArgModel {
    fn validate(&self) -> Result<()> {
        let finite = [
            self.nu_g,
            self.sigma,
            self.nu_j,
            self.sigma_j,
            self.phi,
            self.c,
            self.delta,
            self.varsigma,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("disaster parameters must be finite"));
        }
        if self.sigma <= 0.0 || self.sigma_j <= 0.0 {
            return Err(Error::invalid("sigma and sigma_j must be positive"));
        }
        if self.nu_j >= 0.0 {
            return Err(Error::invalid("nu_j must be negative"));
        }
        if self.c <= 0.0 || self.delta <= 0.0 {
            return Err(Error::invalid("c and delta must be positive"));
        }
        if !(self.phi > 0.0 && self.phi < 1.0) {
            return Err(Error::NonStationary(format!("phi = {} must lie in (0, 1)", self.phi)));
        }
        if !(0.5..=1.0).contains(&self.varsigma) {
            return Err(Error::invalid("varsigma must lie in [1/2, 1]"));
        }
        Ok(())
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn stationary_law(&self) -> Result<StationaryLaw> {
        self.validate()?;
        let moments = self.is_original().then(|| self.stationary_moments());
        let hl = self.c / (1.0 - self.phi);
        Ok(StationaryLaw::simulated(
            Model::DisasterArg(self.clone()),
            DEFAULT_BURN_IN,
            DEFAULT_LAW_SEED,
            moments,
            vec![
                None,
                Some(Marginal::Gamma {
                    shape: self.delta,
                    scale: hl,
                }),
            ],
        ))
    }

    fn next_state_nodes(&self, x: &[f64], quad: &QuadratureSpec) -> Result<Vec<(Vec<f64>, f64)>> {
        let h = x[1].max(0.0);
        if quad.scheme == QuadratureScheme::MonteCarlo {
            return Ok(crate::models::monte_carlo_nodes(self, x, quad));
        }
        let n = quad.n.min(JOINT_NODE_CAP);
        let gh = gauss_hermite(n);
        let mut g_nodes = Vec::new();
        for (j, lp) in poisson_support(h) {
            let (mj, vj) = self.jump_moments(j);
            let sd = (self.sigma * self.sigma + vj).sqrt();
            for (z, w) in gh.nodes.iter().zip(&gh.weights) {
                g_nodes.push((self.nu_g + mj + sd * z, lp + w.ln()));
            }
        }
        let h_nodes = self.intensity_nodes(h, n);
        let mut out = Vec::with_capacity(g_nodes.len() * h_nodes.len());
        for &(g, lg) in &g_nodes {
            for &(hn, lh) in &h_nodes {
                out.push((vec![g, hn], lg + lh));
            }
        }
        Ok(out)
    }

    fn sample_next(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let h = x[1].max(0.0);
        let j = if h > 0.0 {
            Poisson::new(h).expect("positive intensity").sample(rng) as usize
        } else {
            0
        };
        let (mj, vj) = self.jump_moments(j);
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        let g = self.nu_g + self.sigma * e1 + mj + vj.sqrt() * e2;
        let lam = self.phi * h / self.c;
        let k = if lam > 0.0 {
            Poisson::new(lam).expect("positive mean").sample(rng)
        } else {
            0.0
        };
        let hn = Gamma::new(self.delta + k, self.c).expect("valid gamma").sample(rng);
        vec![g, hn]
    }

    fn initial_state(&self) -> Vec<f64> {
        let mh = self.delta * self.c / (1.0 - self.phi);
        vec![self.nu_g + self.nu_j * mh, mh]
    }

    fn utility(&self, _x: &[f64], x_next: &[f64]) -> f64 {
        x_next[0]
    }
}

impl ValueKernel for DisasterArgModel {
    fn value_dim(&self) -> usize {
        1
    }

    fn value_nodes(&self, y: &[f64], tilt: f64, quad: &QuadratureSpec) -> Result<Vec<TransitionNode>> {
        let h = y[0];
        let log_tilt = self.log_mgf_g(tilt, h);
        let utility_mean = self.g_cond_mean(h);
        Ok(self
            .intensity_nodes(h, quad.n)
            .into_iter()
            .map(|(z, log_weight)| TransitionNode {
                state: vec![z],
                log_weight,
                utility_mean,
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
        let (lo, hi) = (bounds[0].0.max(0.0), bounds[0].1);
        if lo >= hi {
            return Err(Error::invalid("truncation set misses the positive half-line"));
        }
        let lam = self.phi * h.max(0.0) / self.c;
        let sd = self.c * (self.delta + 2.0 * lam).sqrt();
        let log_tilt = self.log_mgf_g(tilt, h);
        let utility_mean = self.g_cond_mean(h);
        let nodes: Vec<TransitionNode> = panel_nodes(lo, hi, (0.5 * sd).min((hi - lo) / 16.0), quad.n)
            .into_iter()
            .map(|(z, lw)| TransitionNode {
                state: vec![z],
                log_weight: lw + self.ln_intensity_density(h, z),
                utility_mean,
                log_tilt,
            })
            .collect();
        let (nodes, log_mass) = normalize_truncated(nodes, &format!("h = {h}"))?;
        // Numerical mass can slightly exceed one when C covers the support.
        Ok(TruncatedNodes {
            nodes,
            log_mass: log_mass.min(0.0),
        })
    }

    fn value_law(&self) -> Result<StationaryLaw> {
        self.validate()?;
        Ok(self.intensity_law())
    }
}

/// Sum of log weights, for checks that a node set is a probability measure.
#[cfg(test)]
fn total_log_weight(nodes: &[(f64, f64)]) -> f64 {
    crate::numerics::logsumexp(&nodes.iter().map(|(_, lw)| *lw).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::logsumexp;

    fn model() -> DisasterArgModel {
        DisasterArgModel::new(0.02, 0.02, -0.1, 0.1, 0.8, 0.2, 1.0, 1.0).unwrap()
    }

    #[test]
    fn laplace_reference_value() {
        let v = model().laplace(1.0, 1.0).unwrap();
        assert!((v - 3.397_852_285_573_806_5).abs() < 1e-12);
        assert!(matches!(model().laplace(5.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn intensity_nodes_reproduce_laplace() {
        let m = model();
        for &h in &[0.0, 0.3, 1.0, 4.0] {
            let nodes = m.intensity_nodes(h, 48);
            assert!(total_log_weight(&nodes).abs() < 1e-12);
            let lse = logsumexp(&nodes.iter().map(|(z, lw)| lw + 2.0 * z).collect::<Vec<_>>());
            assert!(
                (lse - m.log_laplace(2.0, h).unwrap()).abs() < 1e-9,
                "h = {h}: {lse} vs {}",
                m.log_laplace(2.0, h).unwrap()
            );
        }
    }

    #[test]
    fn jump_mgf_reduces_for_unit_exponent() {
        let mut m = model();
        let exact = m.log_mgf_jump(-3.0, 1.5);
        m.varsigma = 1.0 - 1e-13;
        // The modified form has unscaled variance, so only the mean term matches.
        let approx = m.log_mgf_jump(-3.0, 1.5) - 0.5 * 9.0 * m.sigma_j * m.sigma_j;
        let mean_only = 1.5 * ((-3.0 * m.nu_j).exp() - 1.0);
        assert!((approx - mean_only).abs() < 1e-9);
        assert!(exact > mean_only);
    }
}

//! Preference parameters for the three recursions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid(format!("beta = {beta} must lie in (0, 1)")));
    }
    Ok(())
}

/// Robust (risk-sensitive) recursion `Tf = β log E[exp(f(X') + α u)]`.
///
/// `alpha` is stored explicitly so that experiments may set `α > 0`; when
/// built from `theta` it equals `−1/(θ(1−β))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustSpec {
    pub beta: f64,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

impl RobustSpec {
    pub fn from_theta(beta: f64, theta: f64) -> Result<Self> {
        check_beta(beta)?;
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::invalid("theta must be positive and finite"));
        }
        Ok(Self {
            beta,
            alpha: -1.0 / (theta * (1.0 - beta)),
            theta: Some(theta),
        })
    }

    pub fn with_alpha(beta: f64, alpha: f64) -> Result<Self> {
        let s = Self {
            beta,
            alpha,
            theta: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        if !self.alpha.is_finite() {
            return Err(Error::invalid("alpha must be finite"));
        }
        if let Some(theta) = self.theta {
            let derived = -1.0 / (theta * (1.0 - self.beta));
            if !(theta > 0.0) || (derived - self.alpha).abs() > 1e-12 * derived.abs().max(1.0) {
                return Err(Error::invalid("alpha is inconsistent with theta and beta"));
            }
        }
        Ok(())
    }
}

/// Learning recursion with model-misspecification parameter `vartheta`
/// (`None` selects the `ϑ = ∞` limit) and belief-robustness `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningSpec {
    pub beta: f64,
    pub theta: f64,
    #[serde(default)]
    pub vartheta: Option<f64>,
}

impl LearningSpec {
    pub fn new(beta: f64, theta: f64, vartheta: Option<f64>) -> Result<Self> {
        let s = Self { beta, theta, vartheta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::invalid("theta must be positive and finite"));
        }
        if let Some(v) = self.vartheta {
            if !(v > 0.0) {
                return Err(Error::invalid("vartheta must be positive"));
            }
        }
        Ok(())
    }

    /// `α = −1/(θ(1−β))`.
    pub fn alpha(&self) -> f64 {
        -1.0 / (self.theta * (1.0 - self.beta))
    }

    /// `θ/ϑ`, zero in the `ϑ = ∞` limit.
    pub fn ratio(&self) -> f64 {
        match self.vartheta {
            Some(v) if v.is_finite() => self.theta / v,
            _ => 0.0,
        }
    }
}

/// Epstein–Zin recursion with risk aversion `gamma` and inverse IES `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EzSpec {
    pub beta: f64,
    pub gamma: f64,
    pub rho: f64,
}

impl EzSpec {
    pub fn new(beta: f64, gamma: f64, rho: f64) -> Result<Self> {
        let s = Self { beta, gamma, rho };
        s.validate()?;
        Ok(s)
    }

    /// Checks the parameter ranges without the sign restriction on `κ`.
    pub fn validate_parameters(&self) -> Result<()> {
        check_beta(self.beta)?;
        if !(self.gamma > 0.0) || self.gamma == 1.0 || !(self.rho > 0.0) || self.rho == 1.0 {
            return Err(Error::invalid("gamma and rho must be positive and different from 1"));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_parameters()?;
        let kappa = self.kappa();
        if kappa >= 0.0 {
            return Err(Error::Unsupported(format!(
                "kappa = {kappa} >= 0; only kappa < 0 is supported"
            )));
        }
        Ok(())
    }

    /// `κ = (1−γ)/(1−ρ)`.
    pub fn kappa(&self) -> f64 {
        (1.0 - self.gamma) / (1.0 - self.rho)
    }
}

/// Any of the three preference specifications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "recursion", rename_all = "kebab-case")]
pub enum RecursionSpec {
    Robust(RobustSpec),
    Learning(LearningSpec),
    EpsteinZin(EzSpec),
}

impl RecursionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            RecursionSpec::Robust(s) => s.validate(),
            RecursionSpec::Learning(s) => s.validate(),
            RecursionSpec::EpsteinZin(s) => s.validate(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_from_theta() {
        let s = RobustSpec::from_theta(0.95, 20.0).unwrap();
        assert!((s.alpha + 1.0).abs() < 1e-12);
        s.validate().unwrap();
    }

    #[test]
    fn kappa_sign_enforced() {
        assert_eq!(EzSpec::new(0.96, 2.0, 0.5).unwrap().kappa(), -2.0);
        assert!(EzSpec::new(0.96, 2.0, 1.5).is_err());
    }
}

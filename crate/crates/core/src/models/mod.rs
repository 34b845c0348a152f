//! Markov environments: state processes, their stationary laws, conditional
//! expectations, samplers and filters.

pub mod disaster;
pub mod kernel;
pub mod law;
pub mod regime;
pub mod ssy;
pub mod state_space;
pub mod var;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::logsumexp;
use crate::quadrature::QuadratureSpec;

pub use disaster::DisasterArgModel;
pub use kernel::{TransitionNode, TruncatedNodes, ValueKernel};
pub use law::{LawKind, Marginal, StationaryLaw};
pub use regime::{
    filter_update_with_likelihoods, stationary_distribution, validate_transition_matrix, HiddenRegimeModel,
    RegimeSwitchVarModel,
};
pub use ssy::SsyVolModel;
pub use state_space::{kalman_steady_state, GaussianStateSpaceModel, SteadyFilter};
pub use var::GaussianVar1Model;

/// A parameterized state process with transition kernel `Q`.
pub trait MarkovModel {
    fn validate(&self) -> Result<()>;
    fn state_dim(&self) -> usize;
    fn stationary_law(&self) -> Result<StationaryLaw>;
    /// Quadrature nodes `(x', log weight)` for the law of the next state.
    fn next_state_nodes(&self, x: &[f64], quad: &QuadratureSpec) -> Result<Vec<(Vec<f64>, f64)>>;
    fn sample_next(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64>;
    /// Start state for simulations; burn-in removes its influence.
    fn initial_state(&self) -> Vec<f64>;
    /// Growth in per-period utility `u(x, x')`.
    fn utility(&self, x: &[f64], x_next: &[f64]) -> f64;
}

/// Any supported environment, as loaded from a JSON config of the form
/// `{"model": "<tag>", "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params", rename_all = "kebab-case")]
pub enum Model {
    GaussianVar1(GaussianVar1Model),
    SsyVol(SsyVolModel),
    DisasterArg(DisasterArgModel),
    RegimeSwitchVar(RegimeSwitchVarModel),
    HiddenRegime(HiddenRegimeModel),
    GaussianStateSpace(GaussianStateSpaceModel),
}

macro_rules! dispatch {
    ($self:expr, $m:ident => $body:expr) => {
        match $self {
            Model::GaussianVar1($m) => $body,
            Model::SsyVol($m) => $body,
            Model::DisasterArg($m) => $body,
            Model::RegimeSwitchVar($m) => $body,
            Model::HiddenRegime($m) => $body,
            Model::GaussianStateSpace($m) => $body,
        }
    };
}

impl Model {
    /// Parses and validates a JSON model document.
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Model = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Model::GaussianVar1(_) => "gaussian-var1",
            Model::SsyVol(_) => "ssy-vol",
            Model::DisasterArg(_) => "disaster-arg",
            Model::RegimeSwitchVar(_) => "regime-switch-var",
            Model::HiddenRegime(_) => "hidden-regime",
            Model::GaussianStateSpace(_) => "gaussian-state-space",
        }
    }

    /// The value-state kernel, for models whose recursion is observed.
    /// Learning environments use the nested kernels of the learning operator.
    pub fn value_kernel(&self) -> Result<&dyn ValueKernel> {
        match self {
            Model::GaussianVar1(m) => Ok(m),
            Model::SsyVol(m) => Ok(m),
            Model::DisasterArg(m) => Ok(m),
            Model::RegimeSwitchVar(m) => Ok(m),
            Model::HiddenRegime(_) | Model::GaussianStateSpace(_) => Err(Error::Unsupported(format!(
                "{} has a hidden state; use the learning operator",
                self.tag()
            ))),
        }
    }
}

impl MarkovModel for Model {
    fn validate(&self) -> Result<()> {
        dispatch!(self, m => m.validate())
    }
    fn state_dim(&self) -> usize {
        dispatch!(self, m => m.state_dim())
    }
    fn stationary_law(&self) -> Result<StationaryLaw> {
        dispatch!(self, m => m.stationary_law())
    }
    fn next_state_nodes(&self, x: &[f64], quad: &QuadratureSpec) -> Result<Vec<(Vec<f64>, f64)>> {
        dispatch!(self, m => m.next_state_nodes(x, quad))
    }
    fn sample_next(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        dispatch!(self, m => m.sample_next(x, rng))
    }
    fn initial_state(&self) -> Vec<f64> {
        dispatch!(self, m => m.initial_state())
    }
    fn utility(&self, x: &[f64], x_next: &[f64]) -> f64 {
        dispatch!(self, m => m.utility(x, x_next))
    }
}

/// Equally weighted simulated nodes at the seed carried by `quad`.
pub(crate) fn monte_carlo_nodes<M: MarkovModel + ?Sized>(
    model: &M,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Vec<(Vec<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(quad.seed);
    let lw = -(quad.n as f64).ln();
    (0..quad.n).map(|_| (model.sample_next(x, &mut rng), lw)).collect()
}

fn check_state<M: MarkovModel + ?Sized>(model: &M, x: &[f64]) -> Result<()> {
    if x.len() != model.state_dim() {
        return Err(Error::invalid(format!(
            "state has {} coordinates, model expects {}",
            x.len(),
            model.state_dim()
        )));
    }
    Ok(())
}

/// `E[f(X') | X = x]`. A non-finite result is reported as divergence.
pub fn cond_expect<M: MarkovModel + ?Sized>(
    model: &M,
    f: impl Fn(&[f64]) -> f64,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    quad.validate()?;
    check_state(model, x)?;
    let total: f64 = model
        .next_state_nodes(x, quad)?
        .iter()
        .map(|(xn, lw)| lw.exp() * f(xn))
        .sum();
    if !total.is_finite() {
        return Err(Error::Divergence(format!(
            "conditional expectation is not finite at {x:?}"
        )));
    }
    Ok(total)
}

/// `log E[exp(g(X')) | X = x]`, stabilized by log-sum-exp.
pub fn log_cond_expect_exp<M: MarkovModel + ?Sized>(
    model: &M,
    g: impl Fn(&[f64]) -> f64,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    quad.validate()?;
    check_state(model, x)?;
    let terms: Vec<f64> = model
        .next_state_nodes(x, quad)?
        .iter()
        .map(|(xn, lw)| lw + g(xn))
        .collect();
    let v = logsumexp(&terms);
    if v.is_nan() || v == f64::INFINITY {
        return Err(Error::Divergence(format!("exponential moment overflows at {x:?}")));
    }
    Ok(v)
}

pub fn stationary_law<M: MarkovModel + ?Sized>(model: &M) -> Result<StationaryLaw> {
    model.stationary_law()
}

/// One transition draw from `x`; deterministic given `seed`.
pub fn sample_transition<M: MarkovModel + ?Sized>(model: &M, x: &[f64], seed: u64) -> Result<Vec<f64>> {
    model.validate()?;
    check_state(model, x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(model.sample_next(x, &mut rng))
}

/// `n` draws from the stationary law; deterministic given `seed`.
pub fn sample_stationary<M: MarkovModel + ?Sized>(model: &M, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    Ok(model.stationary_law()?.sample(n, seed))
}

/// Conditional Laplace transform of the disaster intensity,
/// `E[exp(u h') | h] = exp(φ u h / (1 − u c)) (1 − u c)^(−δ)`.
pub fn arg_laplace(model: &DisasterArgModel, u: f64, h: f64) -> Result<f64> {
    model.laplace(u, h)
}

/// Regime filter `Λ (q(obs) ⊙ p) / 1'(q(obs) ⊙ p)`.
pub fn regime_filter_update(model: &HiddenRegimeModel, beliefs: &[f64], obs: &[f64]) -> Result<nalgebra::DVector<f64>> {
    model.filter_update(beliefs, obs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let text = r#"{"model":"gaussian-var1","params":{"nu":0.1,"A":0.9,"Sigma":0.19,"lambda1":1.0}}"#;
        let m = Model::from_json(text).unwrap();
        let back = Model::from_json(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(m, back);
        assert_eq!(m.tag(), "gaussian-var1");
    }

    #[test]
    fn var_conditional_mean() {
        let m = GaussianVar1Model::scalar(0.9, 0.1, 0.19, 0.0, 0.0).unwrap();
        let e = cond_expect(&m, |x| x[0], &[2.0], &QuadratureSpec::default()).unwrap();
        assert!((e - 1.9).abs() < 1e-12);
    }

    #[test]
    fn ssy_exponential_moment() {
        let m = SsyVolModel::new(0.01, -0.1, 0.9, 0.1).unwrap();
        let alpha = -2.0;
        let h = -0.3;
        let e = cond_expect(&m, |x| (alpha * x[0]).exp(), &[0.0, h], &QuadratureSpec::default()).unwrap();
        let expect = (alpha * 0.01 + 0.5 * alpha * alpha * (2.0 * h).exp()).exp();
        assert!((e / expect - 1.0).abs() < 1e-12);
    }
}

//! Discretized transition kernels on the value state.
//!
//! A value function of a model lives on a (possibly lower-dimensional)
//! "value state": `x` for a Gaussian VAR, the volatility or intensity `h` for
//! the stochastic-volatility and disaster models, `(x, s)` for the
//! regime-switching VAR. Utility growth that depends on shocks not captured by
//! the next value state is integrated out analytically and reported as a
//! log-tilt per node.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::models::law::{gaussian_draw, StationaryLaw};
use crate::numerics::{log_normal_cdf, logsumexp};
use crate::quadrature::{gauss_legendre, hermite_tensor, QuadratureScheme, QuadratureSpec};

/// One quadrature node of the conditional law of the next value state.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionNode {
    pub state: Vec<f64>,
    /// Log probability weight of the node.
    pub log_weight: f64,
    /// E[u | current state, node].
    pub utility_mean: f64,
    /// log E[exp(t·u) | current state, node] for the requested tilt `t`.
    pub log_tilt: f64,
}

/// Nodes of the truncated and renormalized conditional law.
#[derive(Debug, Clone)]
pub struct TruncatedNodes {
    /// Log weights sum to one over the truncation set.
    pub nodes: Vec<TransitionNode>,
    /// log Q(C | current state) under the untruncated law.
    pub log_mass: f64,
}

/// Models whose value recursion can be discretized on a grid.
pub trait ValueKernel: Sync + Send {
    fn value_dim(&self) -> usize;

    /// Nodes of the conditional law of the next value state at `y`, with
    /// log-tilts for the utility multiplier `tilt`.
    fn value_nodes(&self, y: &[f64], tilt: f64, quad: &QuadratureSpec) -> Result<Vec<TransitionNode>>;

    /// Truncated nodes restricted to the box `bounds`, renormalized by Q(C|y).
    fn truncated_value_nodes(
        &self,
        y: &[f64],
        tilt: f64,
        bounds: &[(f64, f64)],
        quad: &QuadratureSpec,
    ) -> Result<TruncatedNodes>;

    /// Utility growth as a function of consecutive value states, when the
    /// model defines it pointwise.
    fn pointwise_utility(&self, _y: &[f64], _y_next: &[f64]) -> Option<f64> {
        None
    }

    /// Stationary law of the value state, used for default grids and
    /// empirical L¹ weights.
    fn value_law(&self) -> Result<StationaryLaw>;
}

/// Gaussian shock nodes `mean + L z` (Gauss–Hermite tensor, or seeded draws
/// when the scheme is Monte Carlo). Returns states with log weights.
pub(crate) fn gaussian_nodes(
    mean: &DVector<f64>,
    factor: &DMatrix<f64>,
    quad: &QuadratureSpec,
) -> Vec<(Vec<f64>, f64)> {
    if factor.ncols() == 0 {
        return vec![(mean.as_slice().to_vec(), 0.0)];
    }
    if quad.scheme == QuadratureScheme::MonteCarlo {
        let mut rng = ChaCha8Rng::seed_from_u64(quad.seed);
        let lw = -(quad.n as f64).ln();
        return (0..quad.n)
            .map(|_| (gaussian_draw(mean, factor, &mut rng), lw))
            .collect();
    }
    let (points, weights) = hermite_tensor(factor.ncols(), quad.n);
    points
        .into_iter()
        .zip(weights)
        .map(|(z, w)| {
            let x = mean + factor * DVector::from_vec(z);
            (x.as_slice().to_vec(), w.ln())
        })
        .collect()
}

/// Composite Gauss–Legendre nodes on `[lo, hi]` with panels no wider than
/// `width`. Returns nodes and log length-weights.
pub fn panel_nodes(lo: f64, hi: f64, width: f64, n: usize) -> Vec<(f64, f64)> {
    let panels = (((hi - lo) / width).ceil() as usize).clamp(1, 4000);
    let len = (hi - lo) / panels as f64;
    let rule = gauss_legendre(n);
    let mut out = Vec::with_capacity(panels * n);
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * len;
        for (z, w) in rule.nodes.iter().zip(&rule.weights) {
            out.push((mid + 0.5 * len * z, (w * len).ln()));
        }
    }
    out
}

/// log(Φ(b) − Φ(a)) for a < b, without cancellation in either tail.
pub fn log_normal_interval(a: f64, b: f64) -> f64 {
    if a >= b {
        return f64::NEG_INFINITY;
    }
    if a > 0.0 {
        let la = log_normal_cdf(-a);
        let lb = log_normal_cdf(-b);
        la + (-(lb - la).exp()).ln_1p()
    } else {
        let la = log_normal_cdf(a);
        let lb = log_normal_cdf(b);
        lb + (-(la - lb).exp()).ln_1p()
    }
}

/// Renormalizes log weights to sum to one; errors if the mass is zero.
pub(crate) fn normalize_truncated(mut nodes: Vec<TransitionNode>, context: &str) -> Result<(Vec<TransitionNode>, f64)> {
    let lws: Vec<f64> = nodes.iter().map(|n| n.log_weight).collect();
    let total = logsumexp(&lws);
    if !total.is_finite() {
        return Err(Error::Domain(format!(
            "truncation set has numerically zero conditional probability at {context}"
        )));
    }
    for n in &mut nodes {
        n.log_weight -= total;
    }
    Ok((nodes, total))
}

pub(crate) fn check_bounds_len(bounds: &[(f64, f64)], dim: usize) -> Result<()> {
    if bounds.len() != dim {
        return Err(Error::invalid(format!(
            "truncation bounds have {} dimensions, value state has {dim}",
            bounds.len()
        )));
    }
    for &(lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::invalid("truncation bounds must be finite and increasing"));
        }
    }
    Ok(())
}

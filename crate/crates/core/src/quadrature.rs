//! Quadrature rules and the [`QuadratureSpec`] configuration record.
//!
//! Rules are returned as probability weights (summing to one) against the
//! corresponding reference law: Gauss–Hermite against N(0, 1), generalized
//! Gauss–Laguerre against Gamma(shape, 1), Gauss–Legendre against the uniform
//! measure on [-1, 1] scaled by the interval length.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of Gauss–Hermite nodes per Gaussian shock dimension.
pub const DEFAULT_HERMITE_NODES: usize = 41;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureScheme {
    GaussHermite,
    GaussLegendreTruncated,
    MonteCarlo,
    ClosedForm,
}

/// How conditional expectations are discretized.
///
/// `n` is the node count per Gaussian dimension for Gauss–Hermite, the node
/// count per panel for truncated Gauss–Legendre, and the draw count for Monte
/// Carlo. `ClosedForm` uses analytic reductions where a model provides them
/// and falls back to Gauss–Hermite with `n` nodes elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub scheme: QuadratureScheme,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self::gauss_hermite(DEFAULT_HERMITE_NODES)
    }
}

impl QuadratureSpec {
    pub fn gauss_hermite(n: usize) -> Self {
        Self {
            scheme: QuadratureScheme::GaussHermite,
            n,
            bounds: None,
            seed: 0,
        }
    }

    pub fn truncated(n: usize, bounds: Vec<(f64, f64)>) -> Self {
        Self {
            scheme: QuadratureScheme::GaussLegendreTruncated,
            n,
            bounds: Some(bounds),
            seed: 0,
        }
    }

    pub fn monte_carlo(n: usize, seed: u64) -> Self {
        Self {
            scheme: QuadratureScheme::MonteCarlo,
            n,
            bounds: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("quadrature node count must be at least 1"));
        }
        if self.scheme == QuadratureScheme::GaussLegendreTruncated {
            let bounds = self
                .bounds
                .as_ref()
                .ok_or_else(|| Error::invalid("truncated quadrature requires bounds"))?;
            for &(lo, hi) in bounds {
                if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                    return Err(Error::invalid(format!(
                        "truncation bounds must be finite and increasing, got ({lo}, {hi})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A one-dimensional rule: nodes and probability weights.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

type Cache = Mutex<HashMap<(u8, u64, usize), Arc<Rule>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn memoized(tag: u8, param: f64, n: usize, build: impl FnOnce() -> Rule) -> Arc<Rule> {
    let key = (tag, param.to_bits(), n);
    if let Some(rule) = cache().lock().expect("rule cache poisoned").get(&key) {
        return rule.clone();
    }
    let rule = Arc::new(build());
    cache()
        .lock()
        .expect("rule cache poisoned")
        .entry(key)
        .or_insert(rule)
        .clone()
}

/// Gauss–Hermite rule for E[f(Z)], Z ~ N(0, 1).
pub fn gauss_hermite(n: usize) -> Arc<Rule> {
    memoized(0, 0.0, n, || hermite_physicists(n))
}

/// Gauss–Legendre rule on [-1, 1] with weights summing to one.
pub fn gauss_legendre(n: usize) -> Arc<Rule> {
    memoized(1, 0.0, n, || legendre(n))
}

/// Generalized Gauss–Laguerre rule for E[f(Y)], Y ~ Gamma(shape, 1).
pub fn gauss_laguerre(shape: f64, n: usize) -> Arc<Rule> {
    memoized(2, shape, n, || laguerre_golub_welsch(shape, n))
}

fn hermite_physicists(n: usize) -> Rule {
    // Newton iteration on the orthonormal Hermite recurrence.
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let sqrt_pi = PI.sqrt();
    let mut nodes: Vec<f64> = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
    let mut weights: Vec<f64> = w.iter().map(|v| v / sqrt_pi).collect();
    nodes.reverse();
    weights.reverse();
    Rule { nodes, weights }
}

fn legendre(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 1.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = wi / 2.0;
        weights[n - 1 - i] = wi / 2.0;
    }
    Rule { nodes, weights }
}

fn laguerre_golub_welsch(shape: f64, n: usize) -> Rule {
    let a = shape - 1.0;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        jac[(k, k)] = 2.0 * kf + a + 1.0;
        if k + 1 < n {
            let off = ((kf + 1.0) * (kf + 1.0 + a)).sqrt();
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    let eig = SymmetricEigen::new(jac);
    // Eigenvector weights lose relative accuracy in the far tail; refine each
    // node by Newton and use the Christoffel form 1 / Σ p_k(x)².
    let diag = |k: usize| 2.0 * k as f64 + a + 1.0;
    let off = |k: usize| (k as f64 * (k as f64 + a)).sqrt();
    let eval = |x: f64| {
        let (mut p_prev, mut p) = (0.0, 1.0);
        let (mut d_prev, mut d) = (0.0, 0.0);
        let mut sum_sq = 1.0;
        for k in 0..n {
            let p_next = ((x - diag(k)) * p - off(k) * p_prev) / off(k + 1);
            let d_next = (p + (x - diag(k)) * d - off(k) * d_prev) / off(k + 1);
            if k + 1 < n {
                sum_sq += p_next * p_next;
            }
            p_prev = p;
            p = p_next;
            d_prev = d;
            d = d_next;
        }
        (p, d, sum_sq)
    };
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let mut x = eig.eigenvalues[k].max(0.0);
            for _ in 0..3 {
                let (p, d, _) = eval(x);
                if d != 0.0 && p.is_finite() && d.is_finite() {
                    let step = p / d;
                    if step.abs() < 1e-3 * (1.0 + x) {
                        x -= step;
                    }
                }
            }
            (x, 1.0 / eval(x).2)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    Rule {
        nodes: pairs.iter().map(|p| p.0.max(0.0)).collect(),
        weights: pairs.iter().map(|p| p.1 / total).collect(),
    }
}

/// Tensor-product Gauss–Hermite nodes for a `dim`-dimensional standard normal.
pub fn hermite_tensor(dim: usize, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let rule = gauss_hermite(n);
    let mut points = vec![Vec::new()];
    let mut weights = vec![1.0];
    for _ in 0..dim {
        let mut next_p = Vec::with_capacity(points.len() * n);
        let mut next_w = Vec::with_capacity(points.len() * n);
        for (p, w) in points.iter().zip(&weights) {
            for (z, wz) in rule.nodes.iter().zip(&rule.weights) {
                let mut q = p.clone();
                q.push(*z);
                next_p.push(q);
                next_w.push(w * wz);
            }
        }
        points = next_p;
        weights = next_w;
    }
    (points, weights)
}

/// Support of a one-dimensional log-space integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    Real,
    Positive,
}

/// Outcome of [`log_integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogIntegral {
    Finite(f64),
    /// Integrand mass does not decay at the edges of the mapped domain.
    Divergent,
}

impl LogIntegral {
    pub fn value(self) -> f64 {
        match self {
            LogIntegral::Finite(v) => v,
            LogIntegral::Divergent => f64::INFINITY,
        }
    }
}

/// `log ∫ exp(ψ(x)) dx` over the given support.
///
/// The real line is mapped by `x = center + scale·sinh(t)` and the positive
/// half-line by `x = scale·exp(t)`, then integrated with composite
/// Gauss–Legendre panels in `t`. Integrands that are still within 40 log
/// units of their peak at the edge of the mapped domain (|x| ~ 10⁸·scale) are
/// reported as divergent.
pub fn log_integrate(psi: impl Fn(f64) -> f64, support: Support, center: f64, scale: f64) -> LogIntegral {
    let (t_lo, t_hi): (f64, f64) = match support {
        Support::Real => (-20.0, 20.0),
        Support::Positive => (-60.0, 20.0),
    };
    let map = |t: f64| -> (f64, f64) {
        match support {
            Support::Real => (center + scale * t.sinh(), (scale * t.cosh()).ln()),
            Support::Positive => (scale * t.exp(), scale.ln() + t),
        }
    };
    let panel: f64 = 0.05;
    let panels = ((t_hi - t_lo) / panel).round() as usize;
    let rule = gauss_legendre(8);
    let mut acc = crate::numerics::LogSumExp::new();
    let mut edge = f64::NEG_INFINITY;
    for p in 0..panels {
        let a = t_lo + p as f64 * panel;
        let half = 0.5 * panel;
        let mid = a + half;
        for (z, w) in rule.nodes.iter().zip(&rule.weights) {
            let t = mid + half * z;
            let (x, log_jac) = map(t);
            let val = psi(x);
            if val == f64::INFINITY || val.is_nan() {
                return LogIntegral::Divergent;
            }
            let term = val + log_jac + (w * panel).ln();
            acc.push(term);
            if p == 0 || p + 1 == panels {
                edge = edge.max(term);
            }
        }
    }
    let total = acc.value();
    if edge > acc.max() - 40.0 || total == f64::INFINITY {
        LogIntegral::Divergent
    } else {
        LogIntegral::Finite(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moment(rule: &Rule, k: i32) -> f64 {
        rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(k)).sum()
    }

    #[test]
    fn hermite_reproduces_normal_moments() {
        let r = gauss_hermite(41);
        assert!((moment(&r, 0) - 1.0).abs() < 1e-13);
        assert!(moment(&r, 1).abs() < 1e-13);
        assert!((moment(&r, 2) - 1.0).abs() < 1e-12);
        assert!((moment(&r, 4) - 3.0).abs() < 1e-11);
        // E e^{Z} = e^{1/2}
        let mgf: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.exp()).sum();
        assert!((mgf - 0.5f64.exp()).abs() < 1e-13);
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let r = gauss_legendre(8);
        assert!((moment(&r, 0) - 1.0).abs() < 1e-14);
        assert!((moment(&r, 2) - 1.0 / 3.0).abs() < 1e-14);
        assert!((moment(&r, 14) - 1.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn laguerre_matches_gamma_moments() {
        let r = gauss_laguerre(2.5, 30);
        assert!((moment(&r, 0) - 1.0).abs() < 1e-12);
        assert!((moment(&r, 1) - 2.5).abs() < 1e-10);
        assert!((moment(&r, 2) - 2.5 * 3.5).abs() < 1e-9);
    }

    #[test]
    fn log_integrate_gaussian_and_divergent() {
        let norm = (2.0 * PI).sqrt().ln();
        let v = log_integrate(|x| -0.5 * x * x, Support::Real, 0.0, 1.0).value();
        assert!((v - norm).abs() < 1e-10);
        assert_eq!(
            log_integrate(|x| 0.1 * x * x, Support::Real, 0.0, 1.0),
            LogIntegral::Divergent
        );
        let g = log_integrate(|x| -x, Support::Positive, 0.0, 1.0).value();
        assert!(g.abs() < 1e-10);
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::gauss_hermite(0).validate().is_err());
        assert!(QuadratureSpec::truncated(8, vec![(1.0, -1.0)]).validate().is_err());
        assert!(QuadratureSpec::truncated(8, vec![(-1.0, 1.0)]).validate().is_ok());
    }
}

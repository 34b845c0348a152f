//! Worst-case change of measure, the subgradient `D_v f = β E_v f`, and
//! growth-rate diagnostics for it.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function_space::{Extrapolation, GridFunction, StateGrid};
use crate::models::Model;
use crate::numerics::{logsumexp, EXP_OVERFLOW};
use crate::operators::robust::RobustOperator;
use crate::operators::transition::DiscreteTransition;
use crate::preferences::RobustSpec;
use crate::quadrature::QuadratureSpec;

/// Distorted conditional expectation on a grid: the underlying transition
/// plus, per row, the distorted probabilities `w·m_v` and `log m_v`.
#[derive(Debug, Clone)]
pub struct DistortedKernel {
    pub beta: f64,
    transition: DiscreteTransition,
    probs: Vec<Vec<f64>>,
    log_density: Vec<Vec<f64>>,
}

impl DistortedKernel {
    /// Rows proportional to `w_j exp(scale·v(x'_j) + log_tilt_j)`, explicitly
    /// renormalized to sum to one.
    pub fn tilted(transition: &DiscreteTransition, beta: f64, v: &GridFunction, scale: f64) -> Result<Self> {
        transition.check_function(v)?;
        let grid = transition.grid();
        let rows: Vec<(Vec<f64>, Vec<f64>)> = transition
            .rows()
            .par_iter()
            .enumerate()
            .map(|(i, r)| {
                let z: Vec<f64> = (0..r.len())
                    .map(|j| r.log_weights[j] + scale * r.eval(j, &v.values) + r.log_tilts[j])
                    .collect();
                let lse = logsumexp(&z);
                let excess = z
                    .iter()
                    .zip(&r.log_weights)
                    .map(|(a, b)| a - b)
                    .fold(f64::NEG_INFINITY, f64::max)
                    - lse;
                if !lse.is_finite() || excess > EXP_OVERFLOW {
                    return Err(Error::Divergence(format!(
                        "worst-case density overflows at node {i} ({:?})",
                        grid.node(i)
                    )));
                }
                let mut p: Vec<f64> = z.iter().map(|zj| (zj - lse).exp()).collect();
                let total: f64 = p.iter().sum();
                for pj in &mut p {
                    *pj /= total;
                }
                let lm: Vec<f64> = p.iter().zip(&r.log_weights).map(|(pj, lw)| pj.ln() - lw).collect();
                Ok((p, lm))
            })
            .collect::<Result<_>>()?;
        let (probs, log_density) = rows.into_iter().unzip();
        Ok(Self {
            beta,
            transition: transition.clone(),
            probs,
            log_density,
        })
    }

    /// The undistorted kernel (`m ≡ 1`) discounted by `beta`.
    pub fn undistorted(transition: &DiscreteTransition, beta: f64) -> Result<Self> {
        let zero = GridFunction::constant(transition.grid(), 0.0);
        let plain = strip_tilts(transition);
        Self::tilted(&plain, beta, &zero, 0.0)
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        Self { beta, ..self.clone() }
    }

    pub fn grid(&self) -> &StateGrid {
        self.transition.grid()
    }

    pub fn transition(&self) -> &DiscreteTransition {
        &self.transition
    }

    /// Distorted probabilities of row `i`.
    pub fn probs(&self, i: usize) -> &[f64] {
        &self.probs[i]
    }

    /// `log m_v` of row `i`.
    pub fn log_density(&self, i: usize) -> &[f64] {
        &self.log_density[i]
    }

    /// `max_x |Σ w m_v − 1|`, recomputed from the stored weights and density.
    pub fn normalization_error(&self) -> f64 {
        self.transition
            .rows()
            .par_iter()
            .zip(&self.log_density)
            .map(|(r, lm)| {
                let s: f64 = r.log_weights.iter().zip(lm).map(|(lw, l)| (lw + l).exp()).sum();
                (s - 1.0).abs()
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Distorted conditional expectation of coordinate `coord` of `X'`.
    pub fn distorted_mean(&self, i: usize, coord: usize) -> f64 {
        let r = self.transition.row(i);
        self.probs[i].iter().zip(&r.states).map(|(p, s)| p * s[coord]).sum()
    }

    /// `log Ẽ[exp(scale·f(X'))]` at every node.
    pub fn log_expect_exp(&self, f: &GridFunction, scale: f64) -> Result<Vec<f64>> {
        self.transition.check_function(f)?;
        Ok(self
            .transition
            .rows()
            .par_iter()
            .zip(&self.probs)
            .map(|(r, p)| {
                let z: Vec<f64> = (0..r.len()).map(|j| p[j].ln() + scale * r.eval(j, &f.values)).collect();
                logsumexp(&z)
            })
            .collect())
    }

    /// `D f = β Ẽ f`.
    pub fn apply_subgradient(&self, f: &GridFunction) -> Result<GridFunction> {
        self.transition.check_function(f)?;
        Ok(f.with_values(self.apply_values(&f.values)))
    }

    fn apply_values(&self, values: &[f64]) -> Vec<f64> {
        let beta = self.beta;
        self.transition
            .rows()
            .par_iter()
            .zip(&self.probs)
            .map(|(r, p)| beta * (0..r.len()).map(|j| p[j] * r.eval(j, values)).sum::<f64>())
            .collect()
    }

    /// CSV dump with columns `x.., x'.., weight, m`.
    pub fn to_csv(&self) -> String {
        let d = self.grid().dim();
        let mut s = String::new();
        for i in 0..d {
            let _ = write!(s, "x{i},");
        }
        for i in 0..d {
            let _ = write!(s, "xn{i},");
        }
        s.push_str("weight,m\n");
        for (i, r) in self.transition.rows().iter().enumerate() {
            let x = self.grid().node(i);
            for j in 0..r.len() {
                for v in &x {
                    let _ = write!(s, "{v:.12e},");
                }
                for v in &r.states[j] {
                    let _ = write!(s, "{v:.12e},");
                }
                let _ = writeln!(
                    s,
                    "{:.12e},{:.12e}",
                    r.log_weights[j].exp(),
                    self.log_density[i][j].exp()
                );
            }
        }
        s
    }

    /// Sparse matrix of `D` on grid values, using clamped stencils so every
    /// entry is nonnegative. Rows are sorted by column.
    pub fn perron_matrix(&self) -> Vec<Vec<(usize, f64)>> {
        let clamped = self.transition.restencil(Extrapolation::Clamp);
        let beta = self.beta;
        clamped
            .rows()
            .par_iter()
            .zip(&self.probs)
            .map(|(r, p)| {
                let mut entries: Vec<(usize, f64)> = Vec::new();
                for j in 0..r.len() {
                    for (k, w) in r.stencil(j) {
                        entries.push((k, beta * p[j] * w));
                    }
                }
                entries.sort_by_key(|e| e.0);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
                for (k, w) in entries {
                    match merged.last_mut() {
                        Some(last) if last.0 == k => last.1 += w,
                        _ => merged.push((k, w)),
                    }
                }
                merged
            })
            .collect()
    }
}

fn strip_tilts(t: &DiscreteTransition) -> DiscreteTransition {
    let mut out = t.clone();
    out.zero_tilts();
    out
}

/// `m_v` for the robust operator at `v`, on `v`'s grid.
pub fn worst_case_density(
    spec: &RobustSpec,
    model: &Model,
    v: &GridFunction,
    quad: &QuadratureSpec,
) -> Result<DistortedKernel> {
    RobustOperator::new(*spec, model, &v.grid, quad)?.worst_case(v)
}

/// `D_v f = β E_v f`.
pub fn apply_subgradient(d: &DistortedKernel, f: &GridFunction) -> Result<GridFunction> {
    d.apply_subgradient(f)
}

/// Growth rates of one test function under powers of `D`.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthRates {
    pub name: String,
    /// `(‖Dⁿf‖_∞ / ‖f‖_∞)^{1/n}` for `n = 1..=n_powers`.
    pub sup: Vec<f64>,
    /// Same in `L¹(μ̂)` with the supplied node weights.
    pub l1: Vec<f64>,
}

/// Surrogate diagnostics for the spectral radius of `D_v`.
#[derive(Debug, Clone, Serialize)]
pub struct RadiusDiagnostic {
    pub beta: f64,
    pub n_powers: usize,
    pub growth: Vec<GrowthRates>,
    /// Perron root of the clamped discretized matrix.
    pub perron_root: f64,
    /// Collatz–Wielandt bracket around the Perron root.
    pub perron_lower: f64,
    pub perron_upper: f64,
    pub perron_iterations: usize,
    pub perron_converged: bool,
    pub note: String,
}

/// Iteration cap of the Perron power iteration.
pub const PERRON_MAX_ITER: usize = 50_000;

const SURROGATE_NOTE: &str = "grid surrogate: sup-norm and L1 growth rates plus the Perron root of the \
discretized kernel; the matrix root equals beta for any normalized kernel and is not the Orlicz-space radius";

/// Growth-rate and Perron-root diagnostics for `d`. `l1_weights` are node
/// weights of the empirical measure (uniform when `None`).
pub fn spectral_radius_est(
    d: &DistortedKernel,
    tests: &[(String, GridFunction)],
    n_powers: usize,
    l1_weights: Option<&[f64]>,
) -> Result<RadiusDiagnostic> {
    let n = d.grid().len();
    let uniform = vec![1.0 / n as f64; n];
    let weights = match l1_weights {
        Some(w) if w.len() == n => w,
        Some(_) => return Err(Error::invalid("L1 weights must have one entry per grid node")),
        None => &uniform[..],
    };
    let l1 = |v: &[f64]| v.iter().zip(weights).map(|(a, w)| a.abs() * w).sum::<f64>();
    let sup = |v: &[f64]| crate::numerics::sup_abs(v);

    let mut growth = Vec::with_capacity(tests.len());
    for (name, f) in tests {
        d.transition.check_function(f)?;
        let (s0, l0) = (sup(&f.values), l1(&f.values));
        let mut cur = f.values.clone();
        let mut rates = GrowthRates {
            name: name.clone(),
            sup: Vec::with_capacity(n_powers),
            l1: Vec::with_capacity(n_powers),
        };
        for k in 1..=n_powers {
            cur = d.apply_values(&cur);
            let e = 1.0 / k as f64;
            rates.sup.push(if s0 > 0.0 { (sup(&cur) / s0).powf(e) } else { 0.0 });
            rates.l1.push(if l0 > 0.0 { (l1(&cur) / l0).powf(e) } else { 0.0 });
        }
        growth.push(rates);
    }

    let (root, lo, hi, iters, converged) = perron_root(&d.perron_matrix());
    Ok(RadiusDiagnostic {
        beta: d.beta,
        n_powers,
        growth,
        perron_root: root,
        perron_lower: lo,
        perron_upper: hi,
        perron_iterations: iters,
        perron_converged: converged,
        note: SURROGATE_NOTE.to_string(),
    })
}

/// Power iteration with Collatz–Wielandt bounds on a nonnegative sparse
/// matrix. Returns `(root, lower, upper, iterations, converged)`.
pub fn perron_root(rows: &[Vec<(usize, f64)>]) -> (f64, f64, f64, usize, bool) {
    let n = rows.len();
    if n == 0 {
        return (0.0, 0.0, 0.0, 0, true);
    }
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * i as f64 / n as f64).collect();
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    for it in 1..=PERRON_MAX_ITER {
        let w: Vec<f64> = rows
            .par_iter()
            .map(|r| r.iter().map(|(k, a)| a * v[*k]).sum::<f64>())
            .collect();
        let wmax = w.iter().cloned().fold(0.0, f64::max);
        if wmax == 0.0 {
            return (0.0, 0.0, 0.0, it, true);
        }
        lo = f64::INFINITY;
        hi = 0.0;
        for (a, b) in w.iter().zip(&v) {
            let q = a / b;
            lo = lo.min(q);
            hi = hi.max(q);
        }
        if hi - lo <= 1e-13 * hi {
            return (0.5 * (lo + hi), lo, hi, it, true);
        }
        v = w.into_iter().map(|a| a / wmax).collect();
        if v.iter().any(|x| *x <= 0.0) {
            // Reducible pattern: fall back to a strictly positive start.
            v = v.into_iter().map(|x| x.max(1e-300)).collect();
        }
    }
    (0.5 * (lo + hi), lo, hi, PERRON_MAX_ITER, false)
}

//! Luxemburg norms `‖f‖_{φr} = inf{c > 0 : E exp(|f/c|^r) ≤ 2}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::law::{Marginal, StationaryLaw, DEFAULT_LAW_SEED};
use crate::models::MarkovModel;
use crate::numerics::{logsumexp, EXP_OVERFLOW};
use crate::quadrature::{log_integrate, LogIntegral, Support};

/// Smallest sample size accepted by the Monte Carlo estimator.
pub const MIN_SAMPLES: usize = 1_000;
const BISECTION_CAP: usize = 400;
/// Scales above this multiple of the typical size of `|f|` are treated as
/// no finite norm; the quadrature domain cannot resolve tails beyond it.
const SCALE_CAP_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrliczMethod {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrliczEstimate {
    pub r: f64,
    /// Midpoint of the final bracket; `+∞` when no finite `c` qualifies.
    pub norm: f64,
    pub n_samples: usize,
    /// Standard error of the Monte Carlo estimate of `E exp(|f/c|^r)` at
    /// `c = norm`; zero for quadrature.
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: OrliczMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrliczOptions {
    pub r: f64,
    pub tol: f64,
    pub n: usize,
    pub seed: u64,
}

impl Default for OrliczOptions {
    fn default() -> Self {
        Self {
            r: 1.0,
            tol: 1e-9,
            n: 100_000,
            seed: DEFAULT_LAW_SEED,
        }
    }
}

fn check_args(r: f64, tol: f64) -> Result<()> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::invalid("Orlicz exponent r must be at least 1"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    Ok(())
}

/// Bisection for the smallest `c` with `log_e(c) ≤ log 2`, given a `c_hi`
/// known to qualify. `log_e` must be nonincreasing in `c`.
fn bisect(log_e: impl Fn(f64) -> f64, c_hi: f64, tol: f64) -> (f64, f64) {
    let target = std::f64::consts::LN_2;
    let mut hi = c_hi;
    let mut lo = c_hi / 2.0;
    let mut guard = 0;
    while log_e(lo) <= target {
        hi = lo;
        lo /= 2.0;
        guard += 1;
        if lo < 1e-300 || guard > BISECTION_CAP {
            return (0.0, hi);
        }
    }
    for _ in 0..BISECTION_CAP {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if log_e(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

/// Monte Carlo norm from a fixed sample of `f` values. The same sample is
/// used for every `c`, so the estimated map `c ↦ Ê exp(|f/c|^r)` is exactly
/// nonincreasing.
pub fn orlicz_norm_samples(values: &[f64], r: f64, tol: f64) -> Result<OrliczEstimate> {
    check_args(r, tol)?;
    if values.len() < MIN_SAMPLES {
        return Err(Error::invalid(format!("need at least {MIN_SAMPLES} samples")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("sampled function values must be finite"));
    }
    let n = values.len();
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let max = abs.iter().copied().fold(0.0, f64::max);
    let est = |lower: f64, upper: f64, std_error: f64| OrliczEstimate {
        r,
        norm: 0.5 * (lower + upper),
        n_samples: n,
        std_error,
        lower,
        upper,
        method: OrliczMethod::MonteCarlo,
    };
    if max == 0.0 {
        return Ok(est(0.0, 0.0, 0.0));
    }
    let ln_n = (n as f64).ln();
    let log_e = |c: f64| {
        let terms: Vec<f64> = abs.iter().map(|a| (a / c).powf(r)).collect();
        if terms.iter().any(|t| *t > EXP_OVERFLOW) {
            return f64::INFINITY;
        }
        logsumexp(&terms) - ln_n
    };
    let c_hi = max / std::f64::consts::LN_2.powf(1.0 / r);
    let (lo, hi) = bisect(log_e, c_hi, tol);
    let c = 0.5 * (lo + hi);
    let std_error = if c > 0.0 {
        let terms: Vec<f64> = abs.iter().map(|a| (a / c).powf(r)).collect();
        if terms.iter().any(|t| *t > EXP_OVERFLOW) {
            f64::INFINITY
        } else {
            let mean = terms.iter().map(|t| t.exp()).sum::<f64>() / n as f64;
            let var = terms.iter().map(|t| (t.exp() - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            (var / n as f64).sqrt()
        }
    } else {
        0.0
    };
    Ok(est(lo, hi, std_error))
}

/// `log E exp(|f(X)/c|^r)` for `X` with a closed-form one-dimensional law.
pub fn log_expect_marginal(marginal: &Marginal, f: &dyn Fn(f64) -> f64, r: f64, c: f64) -> LogIntegral {
    let psi = |x: f64| marginal.ln_pdf(x) + (f(x).abs() / c).powf(r);
    match *marginal {
        Marginal::Gaussian { mean, sd } => {
            if sd == 0.0 {
                return LogIntegral::Finite((f(mean).abs() / c).powf(r));
            }
            log_integrate(psi, Support::Real, mean, sd)
        }
        Marginal::Gamma { shape, scale } => log_integrate(psi, Support::Positive, 0.0, shape * scale),
    }
}

/// Quadrature norm for a closed-form one-dimensional law.
pub fn orlicz_norm_marginal(marginal: &Marginal, f: &dyn Fn(f64) -> f64, r: f64, tol: f64) -> Result<OrliczEstimate> {
    check_args(r, tol)?;
    let log_e = |c: f64| log_expect_marginal(marginal, f, r, c).value();
    let target = std::f64::consts::LN_2;
    let est = |lower: f64, upper: f64| OrliczEstimate {
        r,
        norm: if upper.is_finite() {
            0.5 * (lower + upper)
        } else {
            f64::INFINITY
        },
        n_samples: 0,
        std_error: 0.0,
        lower,
        upper,
        method: OrliczMethod::Quadrature,
    };
    let (center, scale) = match *marginal {
        Marginal::Gaussian { mean, sd } => (mean, sd),
        Marginal::Gamma { shape, scale } => (shape * scale, (shape).sqrt() * scale),
    };
    let typical = [center - 3.0 * scale, center, center + 3.0 * scale]
        .iter()
        .map(|x| f(*x).abs())
        .filter(|v| v.is_finite())
        .fold(1.0, f64::max);
    let cap = SCALE_CAP_FACTOR * typical;
    let mut c = 1.0;
    while log_e(c) > target {
        c *= 2.0;
        if c > cap {
            return Ok(est(cap, f64::INFINITY));
        }
    }
    let (lo, hi) = bisect(log_e, c, tol);
    Ok(est(lo, hi))
}

/// Norm of `f(X)` for `X ~ law`: quadrature when the law is one-dimensional
/// with a closed-form marginal, Monte Carlo on `opts.n` draws otherwise.
pub fn orlicz_norm(
    law: &StationaryLaw,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    opts: &OrliczOptions,
) -> Result<OrliczEstimate> {
    if law.dim() == 1 {
        if let Some(m) = law.marginal(0) {
            return orlicz_norm_marginal(&m, &|x| f(&[x]), opts.r, opts.tol);
        }
    }
    let draws = law.sample(opts.n, opts.seed);
    let values: Vec<f64> = draws.iter().map(|x| f(x)).collect();
    orlicz_norm_samples(&values, opts.r, opts.tol)
}

/// Stationary pairs `(X, X')` under `μ ⊗ Q`: `n` stationary draws, each
/// followed by one transition.
pub fn stationary_pairs<M: MarkovModel + ?Sized>(model: &M, n: usize, seed: u64) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let xs = model.stationary_law()?.sample(n, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    Ok(xs
        .into_iter()
        .map(|x| {
            let xn = model.sample_next(&x, &mut rng);
            (x, xn)
        })
        .collect())
}

/// Norm of `u(X, X')` under the stationary pair law, by Monte Carlo.
pub fn orlicz_norm_pairs<M: MarkovModel + ?Sized>(
    model: &M,
    u: &dyn Fn(&[f64], &[f64]) -> f64,
    opts: &OrliczOptions,
) -> Result<OrliczEstimate> {
    let values: Vec<f64> = stationary_pairs(model, opts.n, opts.seed)?
        .iter()
        .map(|(x, xn)| u(x, xn))
        .collect();
    orlicz_norm_samples(&values, opts.r, opts.tol)
}

/// The constant of the Hölder-type embedding `‖f‖_{φs} ≤ K ‖f‖_{φr}` for
/// `s ≤ r`: `K = (log 2)^{1/r − 1/s}`.
pub fn embedding_constant(s: f64, r: f64) -> f64 {
    std::f64::consts::LN_2.powf(1.0 / r - 1.0 / s)
}

/// Upper bound on `E exp(Y^r / a^r)` for `Y = |Z|`, `Z ~ N(0,1)`, valid for
/// `a > 0` and `r ∈ [1, 2)`.
pub fn abs_normal_power_bound(a: f64, r: f64) -> f64 {
    let ar = a.powf(r);
    let e = 1.0 / (2.0 - r);
    let t1 = (2.0 / ar).powf(e) * (2f64.powf(r * e) / a.powf(2.0 * r * e)).exp();
    let t2 = (4.0 / ar).powf(e);
    (2.0 / std::f64::consts::PI).sqrt() * (t1 + t2 + std::f64::consts::PI.sqrt())
}

/// `log E exp(|Z|^r / a^r)` for `Z ~ N(0,1)` by quadrature.
pub fn log_abs_normal_power_moment(a: f64, r: f64) -> LogIntegral {
    log_expect_marginal(&Marginal::Gaussian { mean: 0.0, sd: 1.0 }, &|x| x, r, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_function_norm() {
        let est = orlicz_norm_samples(&vec![1.0; 2000], 1.0, 1e-12).unwrap();
        assert!((est.norm - 1.0 / std::f64::consts::LN_2).abs() < 1e-9);
        assert!(est.lower <= est.norm && est.norm <= est.upper);
    }

    #[test]
    fn zero_function_norm() {
        let est = orlicz_norm_samples(&vec![0.0; 2000], 2.0, 1e-9).unwrap();
        assert_eq!(est.norm, 0.0);
    }

    #[test]
    fn gaussian_square_norm() {
        let m = Marginal::Gaussian { mean: 0.0, sd: 1.0 };
        let est = orlicz_norm_marginal(&m, &|x| x, 2.0, 1e-10).unwrap();
        assert!((est.norm - (8.0f64 / 3.0).sqrt()).abs() < 1e-6, "{}", est.norm);
    }

    #[test]
    fn quartic_is_not_square_integrable() {
        let m = Marginal::Gaussian { mean: 0.0, sd: 1.0 };
        let est = orlicz_norm_marginal(&m, &|x| x * x, 2.0, 1e-6).unwrap();
        assert!(est.norm.is_infinite());
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(orlicz_norm_samples(&[1.0; 10], 1.0, 1e-6).is_err());
    }
}

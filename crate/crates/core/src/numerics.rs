//! Scalar helpers for working in log space.

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{LN_2, PI, SQRT_2};

/// Exponent above which `exp` overflows in double precision.
pub const EXP_OVERFLOW: f64 = 700.0;

/// `log Σ exp(x_i)`, stabilized by the running maximum.
///
/// Returns `-inf` for an empty slice or when every term is `-inf`, `+inf`
/// when any term is `+inf`, and NaN if any term is NaN.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for &x in xs {
        if x.is_nan() {
            return f64::NAN;
        }
        if x > m {
            m = x;
        }
    }
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    scaled: f64,
    nan: bool,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
            nan: false,
        }
    }

    pub fn push(&mut self, x: f64) {
        if x.is_nan() {
            self.nan = true;
            return;
        }
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            if self.max.is_finite() {
                self.scaled *= (self.max - x).exp();
            }
            self.scaled += 1.0;
            self.max = x;
        } else {
            self.scaled += (x - self.max).exp();
        }
    }

    /// Largest term pushed so far.
    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn value(&self) -> f64 {
        if self.nan {
            return f64::NAN;
        }
        if !self.max.is_finite() {
            return self.max;
        }
        self.max + self.scaled.ln()
    }
}

/// `log(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    if m == f64::INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// `log Φ(z)`, accurate in the far left tail.
pub fn log_normal_cdf(z: f64) -> f64 {
    if z > -20.0 {
        normal_cdf(z).ln()
    } else {
        // Mills-ratio asymptotic expansion
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - (-z).ln() - 0.5 * (2.0 * PI).ln() + series.ln()
    }
}

pub fn log_normal_pdf(z: f64) -> f64 {
    -0.5 * z * z - 0.5 * (2.0 * PI).ln()
}

pub fn ln_poisson_pmf(k: usize, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let k = k as f64;
    k * mean.ln() - mean - ln_gamma(k + 1.0)
}

/// Log density of Gamma(shape, scale) at `x > 0`.
pub fn ln_gamma_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()
}

/// `log E[exp(|Y| / c)]` for `Y ~ N(mean, sd²)`, in closed form.
pub fn log_mgf_abs_normal(mean: f64, sd: f64, c: f64) -> f64 {
    if sd == 0.0 {
        return mean.abs() / c;
    }
    let t = 1.0 / c;
    let half = 0.5 * t * t * sd * sd;
    let pos = t * mean + half + log_normal_cdf(mean / sd + t * sd);
    let neg = -t * mean + half + log_normal_cdf(-mean / sd + t * sd);
    log_add_exp(pos, neg)
}

pub fn ln2() -> f64 {
    LN_2
}

/// Supremum norm of the difference of two equally sized slices.
pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn sup_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_matches_naive_sum() {
        let xs = [0.1, -2.0, 1.5, 0.0];
        let naive: f64 = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((logsumexp(&xs) - naive).abs() < 1e-14);

        let mut acc = LogSumExp::new();
        for &x in &xs {
            acc.push(x);
        }
        assert!((acc.value() - naive).abs() < 1e-14);
    }

    #[test]
    fn logsumexp_handles_huge_exponents() {
        let xs = [1000.0, 1000.0];
        assert!((logsumexp(&xs) - (1000.0 + LN_2)).abs() < 1e-12);
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
        assert_eq!(logsumexp(&[f64::INFINITY, 0.0]), f64::INFINITY);
    }

    #[test]
    fn log_normal_cdf_tail_is_continuous() {
        let left = log_normal_cdf(-20.0 - 1e-9);
        let right = log_normal_cdf(-20.0 + 1e-9);
        assert!((left - right).abs() < 1e-6);
        assert!((log_normal_cdf(0.0) - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn abs_normal_mgf_matches_point_mass() {
        assert!((log_mgf_abs_normal(-2.0, 0.0, 0.5) - 4.0).abs() < 1e-15);
        // symmetric zero-mean: E e^{|Z|} = 2 e^{1/2} Φ(1)
        let expect = (2.0 * 0.5f64.exp() * normal_cdf(1.0)).ln();
        assert!((log_mgf_abs_normal(0.0, 1.0, 1.0) - expect).abs() < 1e-13);
    }
}

//! Closed-form affine fixed points: the Gaussian VAR robust recursion and the
//! two-root disaster recursion with its coefficient map.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{DisasterArgModel, GaussianVar1Model, ValueKernel};
use crate::numerics::logsumexp;
use crate::preferences::RobustSpec;
use crate::quadrature::QuadratureSpec;
use crate::solvers::iterate::{BasinLabel, IterationTrace};

/// Candidate fixed point `v(x) = a + b'x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineSolution {
    pub a: f64,
    pub b: Vec<f64>,
    /// Sup of `|Tv − v|` over the residual check points.
    pub residual: f64,
}

impl AffineSolution {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.a + self.b.iter().zip(x).map(|(b, x)| b * x).sum::<f64>()
    }
}

/// Points `μ + k σ_i e_i` for `k` in `−4..=4` along each coordinate.
fn check_points(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let d = mean.len();
    let mut pts = vec![mean.as_slice().to_vec()];
    for i in 0..d {
        let sd = cov[(i, i)].max(0.0).sqrt();
        for k in -8..=8 {
            if k == 0 {
                continue;
            }
            let mut p = mean.as_slice().to_vec();
            p[i] += 0.5 * k as f64 * sd;
            pts.push(p);
        }
    }
    pts
}

/// `b = αβ(I−βA')⁻¹(λ0 + A'λ1)`,
/// `a = β/(1−β)[(αλ1+b)'ν + ½(αλ1+b)'Σ(αλ1+b)]`, with the operator residual
/// evaluated by quadrature at points within four stationary standard
/// deviations.
pub fn affine_solve_gaussian_robust(
    model: &GaussianVar1Model,
    spec: &RobustSpec,
    quad: &QuadratureSpec,
) -> Result<AffineSolution> {
    spec.validate()?;
    let (alpha, beta) = (spec.alpha, spec.beta);
    let d = model.dim();
    let (l0, l1) = (model.lambda0(), model.lambda1());
    let m = DMatrix::<f64>::identity(d, d) - model.a.transpose() * beta;
    let rhs = (&l0 + model.a.transpose() * &l1) * (alpha * beta);
    let b = crate::linalg::solve(&m, &rhs)?;
    let c = &l1 * alpha + &b;
    let a = beta / (1.0 - beta) * (c.dot(&model.nu) + 0.5 * (c.transpose() * &model.sigma * &c)[(0, 0)]);
    let mut sol = AffineSolution {
        a,
        b: b.as_slice().to_vec(),
        residual: 0.0,
    };
    let pts = check_points(&model.stationary_mean()?, &model.stationary_cov()?);
    let mut worst: f64 = 0.0;
    for x in &pts {
        let nodes = model.value_nodes(x, alpha, quad)?;
        let z: Vec<f64> = nodes
            .iter()
            .map(|n| n.log_weight + sol.eval(&n.state) + n.log_tilt)
            .collect();
        worst = worst.max((beta * logsumexp(&z) - sol.eval(x)).abs());
    }
    sol.residual = worst;
    Ok(sol)
}

/// Coefficients of the disaster recursion
/// `v(h) = 𝖺 + 𝖻h + β log E[e^{v(h')} | h]` under the ARG law of `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisasterAffineParams {
    pub a_const: f64,
    pub b_const: f64,
    pub beta: f64,
    pub c: f64,
    pub phi: f64,
    pub delta: f64,
}

/// Roots of the coefficient map, or the reason there are none.
#[derive(Debug, Clone, Serialize)]
pub struct DisasterRoots {
    pub q: f64,
    pub discriminant: f64,
    /// `(smaller, larger)` root in `b`.
    pub roots: Option<(AffineSolution, AffineSolution)>,
    pub note: String,
}

impl DisasterAffineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0)
            || !(self.c > 0.0)
            || !(self.phi > 0.0 && self.phi < 1.0)
            || !(self.delta > 0.0)
        {
            return Err(Error::invalid("need beta, phi in (0,1) and c, delta > 0"));
        }
        if !self.a_const.is_finite() || !self.b_const.is_finite() {
            return Err(Error::invalid("coefficients must be finite"));
        }
        Ok(())
    }

    /// `𝖺 = αβν_g + ½α²βσ²`, `𝖻 = β(e^{αν_j + ½α²σ_j²} − 1)`.
    pub fn from_model(model: &DisasterArgModel, spec: &RobustSpec) -> Result<Self> {
        use crate::models::MarkovModel;
        model.validate()?;
        spec.validate()?;
        if !model.is_original() {
            return Err(Error::Unsupported("affine solutions need varsigma = 1".into()));
        }
        let (al, be) = (spec.alpha, spec.beta);
        Ok(Self {
            a_const: al * be * model.nu_g + 0.5 * al * al * be * model.sigma * model.sigma,
            b_const: be * ((al * model.nu_j + 0.5 * al * al * model.sigma_j * model.sigma_j).exp() - 1.0),
            beta: be,
            c: model.c,
            phi: model.phi,
            delta: model.delta,
        })
    }

    /// `𝗊 = 1 + c𝖻 − βφ`.
    pub fn q(&self) -> f64 {
        1.0 + self.c * self.b_const - self.beta * self.phi
    }

    pub fn discriminant(&self) -> f64 {
        let q = self.q();
        q * q - 4.0 * self.c * self.b_const
    }

    /// One step `(a, b) ↦ (𝖺 + βa − βδ log(1−bc), 𝖻 + βφb/(1−bc))`.
    pub fn step(&self, a: f64, b: f64) -> Result<(f64, f64)> {
        let s = 1.0 - b * self.c;
        if !(s > 0.0) {
            return Err(Error::Domain(format!(
                "1 - b c = {s} <= 0: the Laplace transform is infinite"
            )));
        }
        Ok((
            self.a_const + self.beta * a - self.beta * self.delta * s.ln(),
            self.b_const + self.beta * self.phi * b / s,
        ))
    }

    fn intercept(&self, b: f64) -> f64 {
        (self.a_const - self.beta * self.delta * (1.0 - b * self.c).ln()) / (1.0 - self.beta)
    }

    /// An ARG model carrying `(φ, c, δ)`, for Laplace-transform residuals.
    fn arg_model(&self) -> Result<DisasterArgModel> {
        DisasterArgModel::new(0.0, 1.0, -1.0, 1.0, self.phi, self.c, self.delta, 1.0)
    }

    /// Sup over `h` in `points` of
    /// `|𝖺 + 𝖻h + β(a + log E[e^{b h'} | h]) − (a + b h)|`.
    pub fn residual(&self, a: f64, b: f64, points: &[f64]) -> Result<f64> {
        let m = self.arg_model()?;
        let mut worst: f64 = 0.0;
        for &h in points {
            let lhs = self.a_const + self.b_const * h + self.beta * (a + crate::models::arg_laplace(&m, b, h)?.ln());
            worst = worst.max((lhs - (a + b * h)).abs());
        }
        Ok(worst)
    }

    /// Default residual points: a spread over the stationary intensity law.
    pub fn residual_points(&self) -> Vec<f64> {
        let mean = self.delta * self.c / (1.0 - self.phi);
        (0..=20).map(|k| mean * k as f64 / 4.0).collect()
    }
}

/// Both affine fixed points when `𝗊² − 4c𝖻 > 0` and `1 − b_i c > 0`:
/// `b₁ = 2𝖻/(𝗊 + √D)`, `b₂ = (𝗊 + √D)/(2c)` (the stable forms of
/// `(𝗊 ∓ √D)/(2c)`), `a_i = (𝖺 − βδ log(1 − b_i c))/(1 − β)`.
pub fn affine_solve_disaster(params: &DisasterAffineParams) -> Result<DisasterRoots> {
    params.validate()?;
    let q = params.q();
    let disc = params.discriminant();
    let empty = |note: String| DisasterRoots {
        q,
        discriminant: disc,
        roots: None,
        note,
    };
    if !(disc > 0.0) {
        return Ok(empty(format!("discriminant {disc} <= 0: no affine fixed point")));
    }
    let sq = disc.sqrt();
    if !(q + sq > 0.0) {
        return Ok(empty("both roots violate 1 - b c > 0".into()));
    }
    let b1 = 2.0 * params.b_const / (q + sq);
    let b2 = (q + sq) / (2.0 * params.c);
    let pts = params.residual_points();
    let mut sols = Vec::new();
    for b in [b1, b2] {
        if !(1.0 - b * params.c > 0.0) {
            return Ok(empty(format!("root b = {b} violates 1 - b c > 0")));
        }
        let a = params.intercept(b);
        sols.push(AffineSolution {
            a,
            b: vec![b],
            residual: params.residual(a, b, &pts)?,
        });
    }
    let s2 = sols.pop().expect("two roots");
    let s1 = sols.pop().expect("two roots");
    Ok(DisasterRoots {
        q,
        discriminant: disc,
        roots: Some((s1, s2)),
        note: "two affine fixed points".into(),
    })
}

/// `(a, b) ↦ T(a, b)`.
pub fn affine_map_step(params: &DisasterAffineParams, a: f64, b: f64) -> Result<(f64, f64)> {
    params.step(a, b)
}

/// Result of iterating the coefficient map.
#[derive(Debug, Clone, Serialize)]
pub struct AffineIteration {
    pub a0: f64,
    pub b0: f64,
    pub path: Vec<(f64, f64)>,
    pub label: BasinLabel,
    pub steps: usize,
    pub trace: IterationTrace,
}

/// Magnitude treated as divergence in coefficient space.
pub const AFFINE_BLOWUP: f64 = 1e12;

/// Rounding allowance, in machine epsilons, for `b0` to count as a root of the
/// `b`-recursion.
pub const UNSTABLE_ULPS: f64 = 64.0;

/// Iterates the coefficient map from `(a0, b0)`. A start that is the larger
/// root `b₂` (a fixed point of the `b`-recursion up to rounding) is labelled
/// at-unstable; other starts are labelled by where they
/// flow: converge-to-smallest within `tol` of `(a₁, b₁)`, diverge when
/// `1 − bc ≤ 0` or the coefficients blow up, undetermined otherwise.
pub fn affine_map_iterate(
    params: &DisasterAffineParams,
    a0: f64,
    b0: f64,
    max_iter: usize,
    tol: f64,
) -> Result<AffineIteration> {
    params.validate()?;
    let roots = affine_solve_disaster(params)?.roots;
    let mut out = AffineIteration {
        a0,
        b0,
        path: vec![(a0, b0)],
        label: BasinLabel::Undetermined,
        steps: 0,
        trace: IterationTrace::default(),
    };
    if let Some((s1, s2)) = &roots {
        let fixed = params
            .step(a0, b0)
            .map(|(_, nb)| (nb - b0).abs() <= UNSTABLE_ULPS * f64::EPSILON * b0.abs().max(1.0))
            .unwrap_or(false);
        if fixed && (b0 - s2.b[0]).abs() < (b0 - s1.b[0]).abs() {
            out.label = BasinLabel::AtUnstable;
            out.trace.basin = Some(out.label);
            return Ok(out);
        }
    }
    let (mut a, mut b) = (a0, b0);
    for it in 1..=max_iter {
        out.steps = it;
        match params.step(a, b) {
            Err(_) => {
                out.label = BasinLabel::Diverge;
                break;
            }
            Ok((na, nb)) => {
                out.trace.sup_changes.push((na - a).abs().max((nb - b).abs()));
                a = na;
                b = nb;
                out.path.push((a, b));
                if !a.is_finite() || !b.is_finite() || a.abs().max(b.abs()) > AFFINE_BLOWUP {
                    out.label = BasinLabel::Diverge;
                    break;
                }
                if let Some((s1, _)) = &roots {
                    if (a - s1.a).abs() < tol && (b - s1.b[0]).abs() < tol {
                        out.label = BasinLabel::ConvergeToSmallest;
                        break;
                    }
                }
            }
        }
    }
    out.trace.basin = Some(out.label);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> DisasterAffineParams {
        DisasterAffineParams {
            a_const: 0.0,
            b_const: 0.1,
            beta: 0.9,
            c: 0.2,
            phi: 0.8,
            delta: 1.0,
        }
    }

    #[test]
    fn two_roots() {
        let r = affine_solve_disaster(&params()).unwrap();
        assert!((r.q - 0.3).abs() < 1e-15 && (r.discriminant - 0.01).abs() < 1e-15);
        let (s1, s2) = r.roots.unwrap();
        assert!((s1.b[0] - 0.5).abs() < 1e-12 && (s2.b[0] - 1.0).abs() < 1e-12);
        assert!((s1.a - 0.948_244_640_920_436_7).abs() < 1e-12);
        assert!((s2.a - 2.008_291_961_827_887_8).abs() < 1e-12);
        assert!(s1.residual < 1e-8 && s2.residual < 1e-8);
    }

    #[test]
    fn map_step_and_basins() {
        let p = params();
        assert_eq!(affine_map_step(&p, 0.0, 0.0).unwrap(), (0.0, 0.1));
        let conv = affine_map_iterate(&p, 0.0, 0.0, 10_000, 1e-10).unwrap();
        assert_eq!(conv.label, BasinLabel::ConvergeToSmallest);
        let div = affine_map_iterate(&p, 0.0, 1.2, 500, 1e-10).unwrap();
        assert_eq!(div.label, BasinLabel::Diverge);
        let at = affine_map_iterate(&p, 0.0, 1.0, 500, 1e-10).unwrap();
        assert_eq!(at.label, BasinLabel::AtUnstable);
    }

    #[test]
    fn no_roots_when_discriminant_negative() {
        let mut p = params();
        p.b_const = 2.0;
        assert!(affine_solve_disaster(&p).unwrap().roots.is_none());
    }

    #[test]
    fn gaussian_reference() {
        let m = GaussianVar1Model::scalar(0.9, 0.0, 0.01, 1.0, 0.0).unwrap();
        let spec = RobustSpec::with_alpha(0.95, -1.0).unwrap();
        let s = affine_solve_gaussian_robust(&m, &spec, &QuadratureSpec::default()).unwrap();
        assert!((s.b[0] + 6.551_724_137_931_034_5).abs() < 1e-12);
        assert!((s.a - 4.077_883_472_057_075).abs() < 1e-10);
        assert!(s.residual < 1e-10);
    }
}

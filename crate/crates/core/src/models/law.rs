use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{psd_factor, serde_matrices, serde_matrix, serde_vector, serde_vectors};
use crate::models::{MarkovModel, Model};
use crate::numerics::{ln_gamma_pdf, log_normal_pdf};

/// Burn-in used for stationary laws that are only available by simulation.
pub const DEFAULT_BURN_IN: usize = 100_000;
/// Sample count used to estimate moments of simulated stationary laws.
pub const DEFAULT_MOMENT_SAMPLES: usize = 100_000;
/// Seed used for simulated stationary laws unless a caller overrides it.
pub const DEFAULT_LAW_SEED: u64 = 0x5eed;

/// Closed-form law of a single state coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Marginal {
    Gaussian { mean: f64, sd: f64 },
    Gamma { shape: f64, scale: f64 },
}

impl Marginal {
    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Gaussian { mean, .. } => mean,
            Marginal::Gamma { shape, scale } => shape * scale,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Marginal::Gaussian { sd, .. } => sd * sd,
            Marginal::Gamma { shape, scale } => shape * scale * scale,
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Gaussian { mean, sd } => {
                if sd == 0.0 {
                    return if x == mean { f64::INFINITY } else { f64::NEG_INFINITY };
                }
                log_normal_pdf((x - mean) / sd) - sd.ln()
            }
            Marginal::Gamma { shape, scale } => ln_gamma_pdf(x, shape, scale),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LawKind {
    Gaussian,
    Gamma {
        shape: f64,
        scale: f64,
    },
    /// Finite mixture of Gaussians; zero-variance directions are point masses.
    GaussianMixture {
        weights: Vec<f64>,
        #[serde(with = "serde_vectors")]
        means: Vec<DVector<f64>>,
        #[serde(with = "serde_matrices")]
        covs: Vec<DMatrix<f64>>,
    },
    Discrete {
        support: Vec<Vec<f64>>,
        probs: Vec<f64>,
    },
    /// Long-run simulation of the chain from its start state.
    Simulated {
        burn_in: usize,
        seed: u64,
    },
}

/// Stationary distribution μ of a Markov state.
#[derive(Debug, Clone, Serialize)]
pub struct StationaryLaw {
    pub kind: LawKind,
    #[serde(with = "serde_vector")]
    pub mean: DVector<f64>,
    #[serde(with = "serde_matrix")]
    pub cov: DMatrix<f64>,
    /// Closed-form marginal laws of individual coordinates, where known.
    pub marginals: Vec<Option<Marginal>>,
    /// True when `mean`/`cov` are exact rather than simulation estimates.
    pub exact_moments: bool,
    #[serde(skip)]
    model: Option<Box<Model>>,
}

impl StationaryLaw {
    pub fn gaussian(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        let marginals = (0..mean.len())
            .map(|i| {
                Some(Marginal::Gaussian {
                    mean: mean[i],
                    sd: cov[(i, i)].max(0.0).sqrt(),
                })
            })
            .collect();
        Self {
            kind: LawKind::Gaussian,
            mean,
            cov,
            marginals,
            exact_moments: true,
            model: None,
        }
    }

    pub fn gamma(shape: f64, scale: f64) -> Self {
        Self {
            kind: LawKind::Gamma { shape, scale },
            mean: DVector::from_element(1, shape * scale),
            cov: DMatrix::from_element(1, 1, shape * scale * scale),
            marginals: vec![Some(Marginal::Gamma { shape, scale })],
            exact_moments: true,
            model: None,
        }
    }

    pub fn gaussian_mixture(weights: Vec<f64>, means: Vec<DVector<f64>>, covs: Vec<DMatrix<f64>>) -> Self {
        let d = means[0].len();
        let mut mean = DVector::zeros(d);
        for (w, m) in weights.iter().zip(&means) {
            mean += m * *w;
        }
        let mut cov = DMatrix::zeros(d, d);
        for ((w, m), c) in weights.iter().zip(&means).zip(&covs) {
            let dm = m - &mean;
            cov += (c + &dm * dm.transpose()) * *w;
        }
        Self {
            kind: LawKind::GaussianMixture { weights, means, covs },
            mean,
            cov,
            marginals: vec![None; d],
            exact_moments: true,
            model: None,
        }
    }

    pub fn discrete(support: Vec<Vec<f64>>, probs: Vec<f64>) -> Self {
        let d = support.first().map_or(0, Vec::len);
        let mut mean = DVector::zeros(d);
        for (x, p) in support.iter().zip(&probs) {
            mean += DVector::from_column_slice(x) * *p;
        }
        let mut cov = DMatrix::zeros(d, d);
        for (x, p) in support.iter().zip(&probs) {
            let dx = DVector::from_column_slice(x) - &mean;
            cov += &dx * dx.transpose() * *p;
        }
        Self {
            kind: LawKind::Discrete { support, probs },
            mean,
            cov,
            marginals: vec![None; d],
            exact_moments: true,
            model: None,
        }
    }

    /// Simulation-backed law. When `moments` is `None` they are estimated
    /// from [`DEFAULT_MOMENT_SAMPLES`] draws at the declared seed.
    pub(crate) fn simulated(
        model: Model,
        burn_in: usize,
        seed: u64,
        moments: Option<(DVector<f64>, DMatrix<f64>)>,
        marginals: Vec<Option<Marginal>>,
    ) -> Self {
        let mut law = Self {
            kind: LawKind::Simulated { burn_in, seed },
            mean: DVector::zeros(0),
            cov: DMatrix::zeros(0, 0),
            marginals,
            exact_moments: moments.is_some(),
            model: Some(Box::new(model)),
        };
        match moments {
            Some((m, c)) => {
                law.mean = m;
                law.cov = c;
            }
            None => {
                let draws = law.sample(DEFAULT_MOMENT_SAMPLES, seed);
                let (m, c) = sample_moments(&draws);
                law.mean = m;
                law.cov = c;
            }
        }
        law
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Draws `n` states; deterministic given `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match &self.kind {
            LawKind::Gaussian => {
                let l = psd_factor(&self.cov).expect("validated covariance");
                (0..n).map(|_| gaussian_draw(&self.mean, &l, &mut rng)).collect()
            }
            LawKind::Gamma { shape, scale } => {
                let g = Gamma::new(*shape, *scale).expect("validated gamma parameters");
                (0..n).map(|_| vec![g.sample(&mut rng)]).collect()
            }
            LawKind::GaussianMixture { weights, means, covs } => {
                let factors: Vec<_> = covs
                    .iter()
                    .map(|c| psd_factor(c).expect("validated covariance"))
                    .collect();
                (0..n)
                    .map(|_| {
                        let k = categorical(weights, &mut rng);
                        gaussian_draw(&means[k], &factors[k], &mut rng)
                    })
                    .collect()
            }
            LawKind::Discrete { support, probs } => {
                (0..n).map(|_| support[categorical(probs, &mut rng)].clone()).collect()
            }
            LawKind::Simulated { burn_in, .. } => {
                let model = self.model.as_ref().expect("simulated law keeps its model");
                let mut x = model.initial_state();
                for _ in 0..*burn_in {
                    x = model.sample_next(&x, &mut rng);
                }
                let mut out = Vec::with_capacity(n);
                for _ in 0..n {
                    x = model.sample_next(&x, &mut rng);
                    out.push(x.clone());
                }
                out
            }
        }
    }

    /// Density of coordinate `i` when its marginal is closed-form.
    pub fn marginal(&self, i: usize) -> Option<Marginal> {
        self.marginals.get(i).copied().flatten()
    }

    pub fn one_dimensional(&self) -> Result<Marginal> {
        if self.dim() != 1 {
            return Err(Error::Unsupported("law is not one-dimensional".into()));
        }
        self.marginal(0)
            .ok_or_else(|| Error::Unsupported("law has no closed-form marginal".into()))
    }
}

pub(crate) fn gaussian_draw(mean: &DVector<f64>, factor: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let z = DVector::from_fn(factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = mean + factor * z;
    x.as_slice().to_vec()
}

pub(crate) fn categorical(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Sample mean and (population) covariance of a set of draws.
pub fn sample_moments(draws: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let d = draws.first().map_or(0, Vec::len);
    let n = draws.len() as f64;
    let mut mean = DVector::zeros(d);
    for x in draws {
        mean += DVector::from_column_slice(x);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for x in draws {
        let dx = DVector::from_column_slice(x) - &mean;
        cov += &dx * dx.transpose();
    }
    cov /= n;
    (mean, cov)
}

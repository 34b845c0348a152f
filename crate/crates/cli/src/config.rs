//! Experiment configuration. Every field is optional in the JSON document;
//! each experiment fills in its own defaults before validation, and the
//! resolved document is echoed in the report.

use serde::{Deserialize, Serialize};

use recutil::function_space::{Extrapolation, StateGrid};
use recutil::models::{MarkovModel, Model};
use recutil::preferences::{EzSpec, LearningSpec, RecursionSpec, RobustSpec};
use recutil::quadrature::{QuadratureScheme, QuadratureSpec};
use recutil::solvers::DisasterAffineParams;

use crate::error::{config_err, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Explicit box per state dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<usize>>,
    /// Half-width in stationary standard deviations when `bounds` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd_multiple: Option<f64>,
    /// Node spacing, used by sweeps whose box changes between solves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extrapolation: Option<Extrapolation>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blowup: Option<f64>,
}

/// Parameters of the sweeps some experiments run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Truncation levels: half-widths `H` for nonexistence-ssy, multiples of
    /// the stationary sd for truncation-bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    /// Initial `b0` values for the basin sweep (with `a0 = 0`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basin_starts: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basin_steps: Option<usize>,
    /// Random pairs for the operator property suite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub property_cases: Option<usize>,
    /// Monte Carlo sample size for tail diagnostics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_report")]
    pub report: String,
    /// Prepended to every file name written to the output directory.
    #[serde(default)]
    pub prefix: String,
}

fn default_report() -> String {
    "report.json".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            report: default_report(),
            prefix: String::new(),
        }
    }
}

pub const DEFAULT_SEED: u64 = 20_240_601;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the tag given on the command line when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Model>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recursion: Option<RecursionSpec>,
    /// Coefficients of the affine disaster map, for nonuniqueness-bs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine: Option<DisasterAffineParams>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub outputs: OutputSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            model: None,
            recursion: None,
            affine: None,
            grid: GridSpec::default(),
            quadrature: None,
            solver: SolverSpec::default(),
            sweep: SweepSpec::default(),
            seed: DEFAULT_SEED,
            outputs: OutputSpec::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn from_path(path: &std::path::Path) -> CliResult<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks everything that is present against the library invariants.
    pub fn validate(&self) -> CliResult<()> {
        if let Some(m) = &self.model {
            m.validate()?;
        }
        if let Some(r) = &self.recursion {
            r.validate()?;
        }
        if let Some(a) = &self.affine {
            a.validate()?;
        }
        if let Some(q) = &self.quadrature {
            q.validate()?;
        }
        let g = &self.grid;
        if let Some(b) = &g.bounds {
            if b.iter()
                .any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite())
            {
                return Err(config_err("grid bounds must be finite with lo < hi"));
            }
        }
        if let Some(n) = &g.nodes {
            if n.iter().any(|k| *k < 2) {
                return Err(config_err("every grid axis needs at least 2 nodes"));
            }
        }
        if matches!(g.sd_multiple, Some(k) if !(k > 0.0 && k.is_finite())) {
            return Err(config_err("grid.sd_multiple must be positive"));
        }
        if matches!(g.spacing, Some(h) if !(h > 0.0 && h.is_finite())) {
            return Err(config_err("grid.spacing must be positive"));
        }
        let s = &self.solver;
        if matches!(s.tol, Some(t) if !(t > 0.0 && t.is_finite())) {
            return Err(config_err("solver.tol must be positive"));
        }
        if s.max_iter == Some(0) {
            return Err(config_err("solver.max_iter must be positive"));
        }
        if matches!(s.blowup, Some(b) if !(b > 0.0)) {
            return Err(config_err("solver.blowup must be positive"));
        }
        let w = &self.sweep;
        if let Some(l) = &w.levels {
            if l.is_empty() || l.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(config_err("sweep.levels must be non-empty and positive"));
            }
        }
        if matches!(&w.basin_starts, Some(b) if b.iter().any(|v| !v.is_finite())) {
            return Err(config_err("sweep.basin_starts must be finite"));
        }
        if w.basin_steps == Some(0) || w.property_cases == Some(0) || w.samples == Some(0) {
            return Err(config_err("sweep counts must be positive"));
        }
        let o = &self.outputs;
        if o.report.is_empty() || o.report.contains(['/', '\\']) || o.prefix.contains(['/', '\\']) {
            return Err(config_err("output names must be plain file names"));
        }
        Ok(())
    }

    pub fn model(&self) -> CliResult<&Model> {
        self.model.as_ref().ok_or_else(|| config_err("model is missing"))
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        self.quadrature.clone().unwrap_or_default()
    }

    pub fn robust(&self) -> CliResult<RobustSpec> {
        match self.recursion {
            Some(RecursionSpec::Robust(s)) => Ok(s),
            _ => Err(config_err("this experiment needs a robust recursion")),
        }
    }

    pub fn learning(&self) -> CliResult<LearningSpec> {
        match self.recursion {
            Some(RecursionSpec::Learning(s)) => Ok(s),
            _ => Err(config_err("this experiment needs a learning recursion")),
        }
    }

    pub fn epstein_zin(&self) -> CliResult<EzSpec> {
        match self.recursion {
            Some(RecursionSpec::EpsteinZin(s)) => Ok(s),
            _ => Err(config_err("this experiment needs an epstein-zin recursion")),
        }
    }

    /// Panel quadrature on the box `c`: the configured node count when the
    /// configured scheme is already truncated, `default_n` otherwise.
    pub fn truncated_quadrature(&self, c: &[(f64, f64)], default_n: usize) -> QuadratureSpec {
        let n = match &self.quadrature {
            Some(q) if q.scheme == QuadratureScheme::GaussLegendreTruncated => q.n,
            _ => default_n,
        };
        QuadratureSpec::truncated(n, c.to_vec())
    }

    /// Sorted truncation levels.
    pub fn levels(&self) -> Vec<f64> {
        let mut v = self.sweep.levels.clone().unwrap_or_default();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn tol(&self) -> f64 {
        self.solver.tol.unwrap_or(1e-10)
    }

    pub fn max_iter(&self) -> usize {
        self.solver.max_iter.unwrap_or(20_000)
    }

    /// Grid bounds: explicit, or the stationary mean ± `sd_multiple` sds of
    /// each coordinate of the model.
    pub fn bounds(&self) -> CliResult<Vec<(f64, f64)>> {
        if let Some(b) = &self.grid.bounds {
            return Ok(b.clone());
        }
        let k = self.grid.sd_multiple.unwrap_or(4.0);
        let law = self.model()?.stationary_law()?;
        (0..law.dim())
            .map(|i| {
                let m = law.marginal(i).ok_or_else(|| {
                    config_err(format!("no stationary marginal for coordinate {i}; give grid.bounds"))
                })?;
                let (mu, sd) = (m.mean(), m.variance().sqrt());
                Ok((mu - k * sd, mu + k * sd))
            })
            .collect()
    }

    /// Grid on `bounds`, with node counts from `grid.nodes` or `grid.spacing`.
    pub fn build_grid(&self, bounds: &[(f64, f64)]) -> CliResult<StateGrid> {
        let counts = match (&self.grid.nodes, self.grid.spacing) {
            (Some(n), _) => n.clone(),
            (None, Some(h)) => bounds
                .iter()
                .map(|(lo, hi)| ((hi - lo) / h).round() as usize + 1)
                .collect(),
            (None, None) => vec![101; bounds.len()],
        };
        if counts.len() != bounds.len() {
            return Err(config_err(format!(
                "grid.nodes has {} entries for {} dimensions",
                counts.len(),
                bounds.len()
            )));
        }
        let policy = self.grid.extrapolation.unwrap_or_default();
        Ok(StateGrid::build(bounds, &counts, policy)?)
    }
}

//! The experiment catalog and dispatcher.

use std::time::Instant;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{config_err, CliError, CliResult};
use crate::report::ExperimentReport;

mod ez_gaussian;
mod learning_regime;
mod nonexistence_ssy;
mod nonuniqueness_bs;
mod robust_gaussian;
mod truncation_bound;

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub tag: &'static str,
    /// Topic of the result the experiment reproduces.
    pub topic: &'static str,
    pub description: &'static str,
    /// Declared wall-time budget in seconds on desk hardware.
    pub budget_s: f64,
}

struct Experiment {
    entry: CatalogEntry,
    resolve: fn(ExperimentConfig) -> CliResult<ExperimentConfig>,
    run: fn(&ExperimentConfig, &mut ExperimentReport) -> CliResult<()>,
}

fn experiments() -> Vec<Experiment> {
    vec![
        Experiment {
            entry: CatalogEntry {
                tag: "ez-gaussian",
                topic: "Epstein-Zin recursion: eigenvalue condition and envelope squeeze",
                description: "Gaussian eigenpair (closed form and power iteration), eigenvalue condition, monotone solves from both envelopes, recursion residual",
                budget_s: 60.0,
            },
            resolve: ez_gaussian::resolve,
            run: ez_gaussian::run,
        },
        Experiment {
            entry: CatalogEntry {
                tag: "learning-regime",
                topic: "Learning recursion: hidden regimes with two robustness parameters",
                description: "fixed point on the belief simplex from constant envelopes, residual, and operator property suite",
                budget_s: 60.0,
            },
            resolve: learning_regime::resolve,
            run: learning_regime::run,
        },
        Experiment {
            entry: CatalogEntry {
                tag: "nonexistence-ssy",
                topic: "Non-existence under stochastic volatility",
                description: "truncated solves on growing boxes, thin-tail diagnostic and upper-envelope divergence",
                budget_s: 60.0,
            },
            resolve: nonexistence_ssy::resolve,
            run: nonexistence_ssy::run,
        },
        Experiment {
            entry: CatalogEntry {
                tag: "nonuniqueness-bs",
                topic: "Non-uniqueness with rare disasters: two affine fixed points",
                description: "both roots of the affine map with residuals, and a basin sweep of the coefficient iteration",
                budget_s: 10.0,
            },
            resolve: nonuniqueness_bs::resolve,
            run: nonuniqueness_bs::run,
        },
        Experiment {
            entry: CatalogEntry {
                tag: "robust-gaussian",
                topic: "Robust recursion with Gaussian VAR: closed-form fixed point",
                description: "closed form versus monotone solves from both envelopes and a truncated contraction solve",
                budget_s: 60.0,
            },
            resolve: robust_gaussian::resolve,
            run: robust_gaussian::run,
        },
        Experiment {
            entry: CatalogEntry {
                tag: "truncation-bound",
                topic: "Truncated-state approximation and its error bound",
                description: "gap between truncated and untruncated fixed points against the log-mass bound over widening boxes",
                budget_s: 60.0,
            },
            resolve: truncation_bound::resolve,
            run: truncation_bound::run,
        },
    ]
}

/// The catalog, sorted by tag.
pub fn list_experiments() -> Vec<CatalogEntry> {
    let mut v: Vec<CatalogEntry> = experiments().into_iter().map(|e| e.entry).collect();
    v.sort_by(|a, b| a.tag.cmp(b.tag));
    v
}

/// Resolves defaults, validates, runs, and times one experiment. Nothing is
/// written to disk; see [`ExperimentReport::write`].
pub fn run_experiment(tag: &str, config: ExperimentConfig) -> CliResult<ExperimentReport> {
    let exp = experiments()
        .into_iter()
        .find(|e| e.entry.tag == tag)
        .ok_or_else(|| CliError::UnknownExperiment(tag.to_string()))?;
    if let Some(t) = &config.experiment {
        if t != tag {
            return Err(config_err(format!("config is for '{t}' but '{tag}' was requested")));
        }
    }
    config.validate()?;
    let mut resolved = (exp.resolve)(config)?;
    resolved.experiment = Some(tag.to_string());
    resolved.validate()?;
    let mut report = ExperimentReport::new(tag, exp.entry.description, resolved.clone());
    let t0 = Instant::now();
    (exp.run)(&resolved, &mut report)?;
    let wall = t0.elapsed().as_secs_f64();
    report.timing.wall_time_s = wall;
    report.timing.budget_s = exp.entry.budget_s;
    report.timing.within_budget = wall <= exp.entry.budget_s;
    report.timing.threads = rayon::current_num_threads();
    report.finish_summary();
    Ok(report)
}

/// Runs `f` and turns a core divergence into a finding instead of an error.
pub(crate) fn as_finding<T>(
    report: &mut ExperimentReport,
    what: &str,
    r: recutil::error::Result<T>,
) -> CliResult<Option<T>> {
    use recutil::error::Error;
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e @ (Error::Divergence(_) | Error::NonConvergence { .. })) => {
            report.finding(format!("{what}: {e}"));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

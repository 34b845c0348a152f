//! Envelope functions that start monotone iteration: the series upper and
//! lower envelopes of the robust recursion, constant envelopes of the learning
//! recursion and the two Epstein–Zin envelopes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::function_space::{GridFunction, StateGrid};
use crate::models::{Model, ValueKernel};
use crate::numerics::{logsumexp, EXP_OVERFLOW};
use crate::operators::{eigenvalue_condition, DiscreteTransition, EzOperator, LearningOperator};
use crate::preferences::RobustSpec;
use crate::quadrature::QuadratureSpec;

/// Relative tail tolerance of the envelope series.
pub const ENVELOPE_TAIL_TOL: f64 = 1e-8;
/// Relative tail tolerance of the lower Neumann series.
pub const LOWER_TAIL_TOL: f64 = 1e-10;
/// Cap on the number of series terms when the count is chosen adaptively.
pub const MAX_SERIES_TERMS: usize = 20_000;

/// Windowed estimate of `E[h(X') | x]` used to detect an infinite integral
/// that a fixed quadrature rule would report as finite.
#[derive(Debug, Clone, Serialize)]
pub struct DivergenceProbe {
    pub node: Vec<f64>,
    /// Window half-widths in conditional standard deviations.
    pub windows: Vec<f64>,
    /// log of the windowed partial integral for each window.
    pub log_partials: Vec<f64>,
    pub diverges: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeResult {
    pub function: GridFunction,
    /// Number of series terms summed.
    pub terms: usize,
    /// Estimated sup of the neglected tail.
    pub tail_bound: f64,
    pub diverged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<DivergenceProbe>,
}

impl EnvelopeResult {
    fn diverged(grid: &StateGrid, note: String, probes: Vec<DivergenceProbe>) -> Self {
        let mut function = GridFunction::constant(grid, f64::INFINITY);
        function.diverged = true;
        Self {
            function,
            terms: 0,
            tail_bound: f64::INFINITY,
            diverged: true,
            note: Some(note),
            probes,
        }
    }
}

const PROBE_WINDOWS: [f64; 4] = [4.0, 8.0, 16.0, 32.0];
const PROBE_PANEL_NODES: usize = 8;

fn probe_node(
    kernel: &dyn ValueKernel,
    y: &[f64],
    tilt: f64,
    quad: &QuadratureSpec,
) -> Result<Option<DivergenceProbe>> {
    let nodes = kernel.value_nodes(y, 0.0, quad)?;
    let (mut m, mut m2) = (0.0, 0.0);
    for n in &nodes {
        let w = n.log_weight.exp();
        m += w * n.state[0];
        m2 += w * n.state[0] * n.state[0];
    }
    let sd = (m2 - m * m).max(0.0).sqrt();
    if !(sd > 0.0) {
        return Ok(None);
    }
    let g0 = |z: f64| -> Result<f64> {
        let nodes = kernel.value_nodes(&[z], tilt, quad)?;
        let lws: Vec<f64> = nodes.iter().map(|n| n.log_weight + n.log_tilt).collect();
        Ok(logsumexp(&lws))
    };
    let panel = QuadratureSpec::gauss_hermite(PROBE_PANEL_NODES);
    let mut log_partials = Vec::with_capacity(PROBE_WINDOWS.len());
    for &k in &PROBE_WINDOWS {
        let bounds = [(m - k * sd, m + k * sd)];
        let t = match kernel.truncated_value_nodes(y, 0.0, &bounds, &panel) {
            Ok(t) => t,
            Err(Error::Unsupported(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let mut terms = Vec::with_capacity(t.nodes.len());
        for n in &t.nodes {
            terms.push(n.log_weight + g0(n.state[0])?);
        }
        log_partials.push(t.log_mass + logsumexp(&terms));
    }
    // Increments of the partial integrals relative to the first window.
    let base = log_partials[0];
    let levels: Vec<f64> = log_partials.iter().map(|l| (l - base).exp()).collect();
    let incs: Vec<f64> = levels.windows(2).map(|w| w[1] - w[0]).collect();
    let finite = log_partials.iter().all(|l| l.is_finite() && *l < EXP_OVERFLOW);
    let last = incs[incs.len() - 1];
    let prev = incs[incs.len() - 2];
    let diverges = !finite || !last.is_finite() || last > prev.max(1e-8);
    Ok(Some(DivergenceProbe {
        node: y.to_vec(),
        windows: PROBE_WINDOWS.to_vec(),
        log_partials,
        diverges,
    }))
}

fn probe_nodes(grid: &StateGrid) -> Vec<Vec<f64>> {
    let n = grid.len();
    let mut idx = vec![0, n / 2, n - 1];
    idx.dedup();
    idx.into_iter().map(|k| grid.node(k)).collect()
}

/// `v̄ = (1−β) Σ_{n≥0} β^{n+1} g_n` with `g_0 = log h`,
/// `h = E[e^{αu/(1−β)} | x]` and `g_{n+1} = log E[e^{g_n(X')} | x]`.
///
/// With `n_terms = None` terms are added until the estimated tail is below
/// `1e-8` of the leading term. For one-dimensional value states the
/// integrability of `h` is probed on widening windows first; a growing
/// integral, a non-finite `h` or an overflowing series sets the divergence
/// flag instead of returning an error.
pub fn upper_envelope_robust(
    spec: &RobustSpec,
    model: &Model,
    grid: &StateGrid,
    n_terms: Option<usize>,
    quad: &QuadratureSpec,
) -> Result<EnvelopeResult> {
    upper_envelope_from_kernel(spec, model.value_kernel()?, grid, n_terms, quad)
}

pub fn upper_envelope_from_kernel(
    spec: &RobustSpec,
    kernel: &dyn ValueKernel,
    grid: &StateGrid,
    n_terms: Option<usize>,
    quad: &QuadratureSpec,
) -> Result<EnvelopeResult> {
    spec.validate()?;
    if n_terms == Some(0) {
        return Err(Error::invalid("the envelope series needs at least one term"));
    }
    let beta = spec.beta;
    let tilt = spec.alpha / (1.0 - beta);
    let mut probes = Vec::new();
    if kernel.value_dim() == 1 && spec.alpha != 0.0 {
        for y in probe_nodes(grid) {
            if let Some(p) = probe_node(kernel, &y, tilt, quad)? {
                probes.push(p);
            }
        }
        if let Some(p) = probes.iter().find(|p| p.diverges) {
            let note = format!(
                "E[h(X') | x] grows without bound over widening windows at x = {:?}",
                p.node
            );
            return Ok(EnvelopeResult::diverged(grid, note, probes));
        }
    }
    let th = DiscreteTransition::build(kernel, grid, tilt, quad)?;
    let zero = GridFunction::constant(grid, 0.0);
    let log_h = th.log_expect_exp(&zero, 1.0)?;
    if log_h.iter().any(|v| !v.is_finite() || v.abs() > EXP_OVERFLOW) {
        return Ok(EnvelopeResult::diverged(
            grid,
            "h is not finite on the grid".into(),
            probes,
        ));
    }
    let t0 = DiscreteTransition::build(kernel, grid, 0.0, quad)?;
    let mut g = zero.with_values(log_h);
    let mut acc = vec![0.0; grid.len()];
    let mut weight = beta;
    let lead = (1.0 - beta) * beta * g.sup_norm();
    let cap = n_terms.unwrap_or(MAX_SERIES_TERMS);
    let mut terms = 0;
    let mut tail = f64::INFINITY;
    let mut prev: Option<GridFunction> = None;
    while terms < cap {
        for (a, v) in acc.iter_mut().zip(&g.values) {
            *a += (1.0 - beta) * weight * v;
        }
        terms += 1;
        let delta = prev.as_ref().map_or(g.sup_norm(), |p| g.sup_diff(p));
        // |g_n| ≤ |g_N| + (n−N)Δ for the remaining terms.
        tail =
            (1.0 - beta) * (weight * beta / (1.0 - beta) * g.sup_norm() + delta * weight * beta / (1.0 - beta).powi(2));
        if n_terms.is_none() && tail < ENVELOPE_TAIL_TOL * lead.max(1.0) {
            break;
        }
        if terms == cap {
            break;
        }
        let next = t0.log_expect_exp(&g, 1.0)?;
        if next.iter().any(|v| !v.is_finite() || v.abs() > EXP_OVERFLOW) {
            return Ok(EnvelopeResult::diverged(
                grid,
                format!("iterated log-expectation overflowed after {terms} terms"),
                probes,
            ));
        }
        prev = Some(g.clone());
        g = g.with_values(next);
        weight *= beta;
    }
    Ok(EnvelopeResult {
        function: zero.with_values(acc),
        terms,
        tail_bound: tail,
        diverged: false,
        note: None,
        probes,
    })
}

/// Neumann series `Σ_n (βE)^n h₁` with `h₁ = βE[αu | x]`, a subsolution by
/// Jensen's inequality.
pub fn lower_envelope_robust(
    spec: &RobustSpec,
    model: &Model,
    grid: &StateGrid,
    quad: &QuadratureSpec,
) -> Result<EnvelopeResult> {
    lower_envelope_from_kernel(spec, model.value_kernel()?, grid, None, quad)
}

pub fn lower_envelope_from_kernel(
    spec: &RobustSpec,
    kernel: &dyn ValueKernel,
    grid: &StateGrid,
    n_terms: Option<usize>,
    quad: &QuadratureSpec,
) -> Result<EnvelopeResult> {
    spec.validate()?;
    let beta = spec.beta;
    let t0 = DiscreteTransition::build(kernel, grid, 0.0, quad)?;
    let zero = GridFunction::constant(grid, 0.0);
    let mut s = zero.with_values(
        t0.expect_linear(&zero, spec.alpha)?
            .into_iter()
            .map(|v| beta * v)
            .collect(),
    );
    let lead = s.sup_norm();
    let mut acc = s.values.clone();
    let cap = n_terms.unwrap_or(MAX_SERIES_TERMS);
    let mut terms = 1;
    let mut tail = s.sup_norm() * beta / (1.0 - beta);
    while terms < cap && (n_terms.is_some() || tail >= LOWER_TAIL_TOL * lead.max(1.0)) {
        s = s.with_values(t0.expect_linear(&s, 0.0)?.into_iter().map(|v| beta * v).collect());
        for (a, v) in acc.iter_mut().zip(&s.values) {
            *a += v;
        }
        terms += 1;
        tail = s.sup_norm() * beta / (1.0 - beta);
    }
    Ok(EnvelopeResult {
        function: zero.with_values(acc),
        terms,
        tail_bound: tail,
        diverged: false,
        note: None,
        probes: Vec::new(),
    })
}

/// Constant super- and subsolutions `sup T0/(1−β)` and `inf T0/(1−β)` of the
/// learning recursion on its compact belief grid.
pub fn learning_envelopes(op: &LearningOperator) -> Result<(GridFunction, GridFunction)> {
    let beta = op.spec().beta;
    let t0 = op.apply(&GridFunction::constant(op.grid(), 0.0))?;
    if t0.diverged {
        return Err(Error::Divergence("the learning operator is not finite at zero".into()));
    }
    let hi = t0.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = t0.values.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((
        GridFunction::constant(op.grid(), hi / (1.0 - beta)),
        GridFunction::constant(op.grid(), lo / (1.0 - beta)),
    ))
}

/// Envelopes of the Epstein–Zin operator.
#[derive(Debug, Clone, Serialize)]
pub struct EzEnvelopes {
    /// `log((1−β) Σ_n (βλ^{1/κ})^n Ẽ^n ι^{−1/κ})`.
    pub upper: GridFunction,
    /// `log(1−β) − κ⁻¹ log ι`.
    pub lower: GridFunction,
    pub terms: usize,
    /// Estimated sup of the neglected tail, relative to the partial sum.
    pub tail_bound: f64,
}

/// Both envelopes of `op`. The upper series is summed in log space until the
/// geometric tail estimate falls below `1e-8` of the partial sum, or for
/// exactly `n_terms` terms. Rejected when the eigenvalue condition fails.
pub fn ez_envelope(op: &EzOperator, n_terms: Option<usize>) -> Result<EzEnvelopes> {
    let spec = op.spec();
    let pair = op.pair();
    let kappa = spec.kappa();
    let cond = eigenvalue_condition(spec.beta, pair.lambda, kappa)?;
    if !cond.pass {
        return Err(Error::InvalidParameter(format!(
            "eigenvalue condition fails: beta * lambda^(1/kappa) = {}",
            cond.value
        )));
    }
    if n_terms == Some(0) {
        return Err(Error::invalid("the envelope series needs at least one term"));
    }
    let log_q = cond.value.ln();
    let mut g = pair.log_iota.map(|li| -li / kappa);
    let mut acc = g.values.clone();
    let cap = n_terms.unwrap_or(MAX_SERIES_TERMS);
    let mut terms = 1;
    let mut tail = f64::INFINITY;
    while terms < cap {
        let next = g.with_values(op.distorted().log_expect_exp(&g, 1.0)?);
        let n = terms as f64;
        // Largest one-step growth of the terms, and the resulting tail.
        let log_ratio = log_q
            + next
                .values
                .iter()
                .zip(&g.values)
                .map(|(a, b)| a - b)
                .fold(f64::NEG_INFINITY, f64::max);
        for (a, v) in acc.iter_mut().zip(&next.values) {
            *a = crate::numerics::log_add_exp(*a, n * log_q + v);
        }
        g = next;
        terms += 1;
        if log_ratio < 0.0 {
            let rel = next_tail(&acc, &g.values, n * log_q, log_ratio);
            tail = rel;
            if n_terms.is_none() && rel < ENVELOPE_TAIL_TOL {
                break;
            }
        }
    }
    let c = (1.0 - spec.beta).ln();
    Ok(EzEnvelopes {
        upper: g.with_values(acc.into_iter().map(|a| c + a).collect()),
        lower: op.lower_envelope(),
        terms,
        tail_bound: tail,
    })
}

/// Sup over nodes of `term·r/(1−r) / partial_sum` for the last term.
fn next_tail(acc: &[f64], g: &[f64], log_weight: f64, log_ratio: f64) -> f64 {
    let r = log_ratio.exp();
    acc.iter()
        .zip(g)
        .map(|(a, v)| (log_weight + v - a).exp() * r / (1.0 - r))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_space::Extrapolation;
    use crate::models::{GaussianVar1Model, SsyVolModel};

    fn setup() -> (Model, StateGrid) {
        let m = GaussianVar1Model::scalar(0.9, 0.0, 0.01, 1.0, 0.0).unwrap();
        let sd = (0.01f64 / (1.0 - 0.81)).sqrt();
        let g = StateGrid::build(&[(-4.0 * sd, 4.0 * sd)], &[41], Extrapolation::Linear).unwrap();
        (Model::GaussianVar1(m), g)
    }

    #[test]
    fn zero_alpha_gives_zero_envelopes() {
        let (m, g) = setup();
        let spec = RobustSpec::with_alpha(0.95, 0.0).unwrap();
        let q = QuadratureSpec::default();
        let up = upper_envelope_robust(&spec, &m, &g, None, &q).unwrap();
        let lo = lower_envelope_robust(&spec, &m, &g, &q).unwrap();
        assert!(up.function.sup_norm() < 1e-14 && lo.function.sup_norm() < 1e-14);
    }

    #[test]
    fn gaussian_envelopes_bracket_closed_form() {
        let (m, g) = setup();
        let spec = RobustSpec::with_alpha(0.95, -1.0).unwrap();
        let q = QuadratureSpec::default();
        let up = upper_envelope_robust(&spec, &m, &g, None, &q).unwrap();
        let lo = lower_envelope_robust(&spec, &m, &g, &q).unwrap();
        assert!(!up.diverged);
        let (a, b) = (4.077_883_472_057_075, -6.551_724_137_931_034);
        for k in 0..g.len() {
            let v = a + b * g.node(k)[0];
            assert!(lo.function.values[k] <= v + 1e-9);
            assert!(up.function.values[k] >= v - 1e-9);
        }
    }

    #[test]
    fn ssy_upper_envelope_diverges() {
        let m = Model::SsyVol(SsyVolModel::new(0.0, -0.1, 0.9, 0.1).unwrap());
        let g = StateGrid::build(&[(-2.0, 0.0)], &[21], Extrapolation::Linear).unwrap();
        let spec = RobustSpec::with_alpha(0.95, -1.0).unwrap();
        let r = upper_envelope_robust(&spec, &m, &g, None, &QuadratureSpec::default()).unwrap();
        assert!(r.diverged);
    }
}

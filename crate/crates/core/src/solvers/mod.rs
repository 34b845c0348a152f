//! Fixed-point strategies: monotone iteration from envelopes, contraction on
//! truncated spaces, closed-form affine solutions and the truncation gap.

pub mod affine;
pub mod envelopes;
pub mod gap;
pub mod iterate;

pub use affine::{
    affine_map_iterate, affine_map_step, affine_solve_disaster, affine_solve_gaussian_robust, AffineIteration,
    AffineSolution, DisasterAffineParams, DisasterRoots, AFFINE_BLOWUP, UNSTABLE_ULPS,
};
pub use envelopes::{
    ez_envelope, learning_envelopes, lower_envelope_from_kernel, lower_envelope_robust, upper_envelope_from_kernel,
    upper_envelope_robust, DivergenceProbe, EnvelopeResult, EzEnvelopes, ENVELOPE_TAIL_TOL, LOWER_TAIL_TOL,
    MAX_SERIES_TERMS,
};
pub use gap::{gap_report, truncation_gap_check, truncation_gap_check_kernel, GapReport, GAP_TOL};
pub use iterate::{
    contraction_solve, monotone_solve, BasinLabel, Direction, FixedPointResult, IterationTrace, MonotoneOptions,
    SolveStatus, CONTRACTION_SLACK, DEFAULT_BLOWUP,
};

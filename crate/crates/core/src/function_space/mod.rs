//! Grid representations of value functions and Orlicz-class tail diagnostics.

pub mod grid;
pub mod orlicz;
pub mod thin_tail;

pub use grid::{Extrapolation, GridFunction, StateGrid, Stencil};
pub use orlicz::{
    abs_normal_power_bound, embedding_constant, log_abs_normal_power_moment, orlicz_norm, orlicz_norm_marginal,
    orlicz_norm_pairs, orlicz_norm_samples, OrliczEstimate, OrliczMethod, OrliczOptions,
};
pub use thin_tail::{thin_tail_check, Finiteness, ThinTailReport, Verdict};

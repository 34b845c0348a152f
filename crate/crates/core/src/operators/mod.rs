//! Recursion operators on grids: robust, truncated, learning and
//! Epstein–Zin, with the worst-case distortion and its diagnostics.

pub mod distorted;
pub mod ez;
pub mod learning;
pub mod robust;
pub mod transition;

pub use distorted::{
    apply_subgradient, perron_root, spectral_radius_est, worst_case_density, DistortedKernel, GrowthRates,
    RadiusDiagnostic,
};
pub use ez::{
    apply_ez, eigen_residual, eigenvalue_condition, ez_eigenpair, ez_eigenpair_closed_form, ez_eigenpair_power,
    log_eigen_residual, nearest_node, sdf_evaluate, sdf_log_normalizer, EigenMethod, EigenvalueCondition, EzEigenpair,
    EzOperator,
};
pub use learning::{apply_learning, belief_from_coords, belief_grid, BeliefKind, LearningOperator};
pub use robust::{apply_robust, apply_truncated, RobustOperator};
pub use transition::{DiscreteTransition, KernelRow};
